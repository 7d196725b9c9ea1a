import json

import numpy as np
import pytest

from conftest import CN
from ocvalign import io
from ocvalign.cli import main
from ocvalign.estimator import EstimationProblem, estimate_window, fraction_window
from ocvalign.metrics import aggregate
from ocvalign.synth import reference_nominal_curve


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def trace_csv(tmp_path, capsys):
    path = tmp_path / "trace.csv"
    code, _, _ = run(capsys, "simulate", "--capacity", 0.9 * CN, "--z0", 0.95, "--sigma", 0.002, "--seed", 4, "-o", path)
    assert code == 0
    return path


def test_estimate(capsys, trace_csv):
    code, out, err = run(capsys, "estimate", "--trace", trace_csv)
    assert code == 0
    doc = json.loads(out)
    assert doc["capacity_ah"] == pytest.approx(0.9 * CN, rel=5e-3)
    assert doc["converged"] is True and doc["window"] is None


def test_estimate_to_file(capsys, trace_csv, tmp_path):
    code, out, _ = run(capsys, "estimate", "--trace", trace_csv, "-o", tmp_path / "r.json")
    assert code == 0 and out == ""
    assert "capacity_ah" in json.loads((tmp_path / "r.json").read_text())


def test_estimate_flat_voltage(capsys, tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("time_s,current_a,ocv_v\n" + "".join(f"{60 * k},-1,3.65\n" for k in range(20)))
    code, out, err = run(capsys, "estimate", "--trace", path)
    assert code == 2 and out == ""
    assert "DegenerateData" in err


def test_estimate_window_delegates(capsys, trace_csv):
    code, out, _ = run(capsys, "estimate", "--trace", trace_csv, "--window", "0.33:0.66")
    assert code == 0
    doc = json.loads(out)
    problem = EstimationProblem.from_trace(reference_nominal_curve(), io.read_trace_csv(trace_csv), CN)
    expected = estimate_window(problem, fraction_window(problem.n_residuals, 0.33, 0.66))
    assert doc["capacity_ah"] == expected.capacity
    assert doc["window"] == list(expected.window)


def test_estimate_index_window(capsys, trace_csv):
    code, out, _ = run(capsys, "estimate", "--trace", trace_csv, "--window", "10:60")
    assert code == 0 and json.loads(out)["window"] == [10, 60]


def test_config_file_with_flag_override(capsys, trace_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"trace": trace_csv.name, "capacity_bounds": [3.5, 4.3], "grid": 16}))
    code, out, _ = run(capsys, "estimate", "--config", cfg)
    assert code == 0
    assert json.loads(out)["capacity_ah"] <= 4.3  # truth 4.365 lies outside
    code, out, _ = run(capsys, "estimate", "--config", cfg, "--capacity-bounds", "3.0:6.0")
    assert json.loads(out)["capacity_ah"] == pytest.approx(0.9 * CN, rel=5e-3)


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"colour": 1}')
    assert run(capsys, "estimate", "--config", cfg)[0] == 1


def test_usage_errors(capsys, trace_csv):
    assert run(capsys)[0] == 1
    assert run(capsys, "estimate")[0] == 1
    assert run(capsys, "estimate", "--trace", trace_csv, "--window", "0.7:0.2")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1


def test_parse_error_exit_code(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time_s,current_a,ocv_v\n0,-1,4.0\n10,x,3.9\n")
    code, _, err = run(capsys, "estimate", "--trace", path)
    assert code == 1 and "line 3" in err


def test_simulate_deterministic(capsys, tmp_path):
    args = ["simulate", "--capacity", 4.0, "--z0", 0.9, "--sigma", 0.003, "--seed", 9]
    assert run(capsys, *args, "-o", tmp_path / "a.csv")[0] == 0
    assert run(capsys, *args, "-o", tmp_path / "b.csv")[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_simulate_identity_to_stdout(capsys):
    code, out, _ = run(capsys, "simulate", "--capacity", CN, "--z0", 1.0)
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()[1:]]
    v = np.array([float(r[2]) for r in rows])
    nominal = reference_nominal_curve()
    z = 1.0 - np.arange(v.size) / 240
    np.testing.assert_allclose(v, np.interp(np.clip(z, 0, 1), nominal.soc, nominal.ocv), atol=1e-12)


def test_simulate_range_exceeded(capsys, tmp_path):
    (tmp_path / "nom.csv").write_text("soc,ocv_v\n0.2,3.4\n0.6,3.7\n1.0,4.2\n")
    (tmp_path / "s.json").write_text(
        json.dumps({"true_capacity_ah": 4.0, "true_z0": 0.9, "soc_stop": 0.1, "nominal_curve": "nom.csv"})
    )
    code, _, err = run(capsys, "simulate", "--scenario", tmp_path / "s.json")
    assert code == 2 and "RangeExceeded" in err


def _manifest(capsys, tmp_path, n):
    lines = ["cycle_id,trace_path,actual_capacity_ah"]
    for k in range(n):
        cap = CN * (1 - 0.015 * k)
        path = tmp_path / f"c{k}.csv"
        run(capsys, "simulate", "--capacity", cap, "--z0", 0.9, "--sigma", 0.004, "--seed", k, "--soc-stop", 0.1, "-o", path)
        lines.append(f"{k * 30},{path.name},{cap!r}")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def test_validate(capsys, tmp_path):
    manifest = _manifest(capsys, tmp_path, 12)
    code, out, _ = run(capsys, "validate", "--manifest", manifest, "--jobs", 4, "--report-csv", tmp_path / "r.csv")
    assert code == 0
    doc = json.loads(out)
    assert doc["n_cycles"] == 12
    assert [row["cycle_id"] for row in doc["per_cycle"]] == [str(30 * k) for k in range(12)]
    again = aggregate((r["cycle_id"], r["estimated_ah"], r["actual_ah"]) for r in doc["per_cycle"])
    assert doc["rmse_ah"] == again.rmse_ah and doc["mae_ah"] == again.mae_ah
    assert doc["mean_are_percent"] == again.mean_are_percent
    assert doc["mean_are_percent"] < 1.0
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 13


def test_validate_empty_manifest(capsys, tmp_path):
    (tmp_path / "m.csv").write_text("cycle_id,trace_path,actual_capacity_ah\n")
    code, _, err = run(capsys, "validate", "--manifest", tmp_path / "m.csv")
    assert code == 2 and "EmptyInput" in err


def test_plot_data(capsys, trace_csv, tmp_path):
    code, _, _ = run(capsys, "plot-data", "--trace", trace_csv, "-o", tmp_path / "p.csv")
    assert code == 0
    names = {s.name for s in io.read_plot_data(tmp_path / "p.csv")}
    assert names == {"nominal", "aged_transformed"}


def test_oracle_certifies(capsys, trace_csv):
    code, out, _ = run(capsys, "oracle", "--trace", trace_csv)
    assert code == 0
    doc = json.loads(out)
    assert doc["certified"] is True
    assert doc["estimate"]["objective_v2"] <= doc["oracle"]["objective_v2"] + 1e-12


def test_oracle_coarse_grid(capsys, trace_csv):
    assert run(capsys, "oracle", "--trace", trace_csv, "--oracle-grid", 2, 2)[0] == 0


def test_oracle_starved_solver(capsys, trace_csv):
    code, out, _ = run(capsys, "oracle", "--trace", trace_csv, "--max-iter", 0, "--grid", 4)
    doc = json.loads(out)
    assert code == (0 if doc["certified"] else 3)
    assert doc["estimate"]["converged"] is False
