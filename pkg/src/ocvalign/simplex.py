"""Box-constrained Nelder-Mead simplex minimizer.

Points outside the box, and points where the objective returns ``inf``,
are simply worse than every finite vertex; the simplex contracts away from
them. That is all the constraint handling the two-parameter alignment
problem needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    converged: bool


def nelder_mead(
    fun,
    x0,
    step,
    lower=None,
    upper=None,
    ftol: float = 1e-14,
    xtol: float = 1e-13,
    max_iter: int = 500,
    max_restarts: int = 10,
) -> SimplexResult:
    """Minimize ``fun`` from ``x0`` with an axis-aligned initial simplex.

    A run has converged when the spread of vertex values drops below
    ``ftol`` or the simplex has collapsed below ``xtol`` in every coordinate
    (relative to ``step``). After convergence the simplex is rebuilt around
    the best vertex and the search continues, until a restart no longer
    improves by more than ``ftol`` or ``max_restarts`` is reached; this
    undoes collapse against the box walls. ``step`` entries point into the
    box from the start point when the outward step would leave it.
    """
    x0 = np.asarray(x0, dtype=float)
    step = np.broadcast_to(np.asarray(step, dtype=float), x0.shape).copy()
    n = x0.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    n_eval = 0

    def f(x):
        nonlocal n_eval
        if np.any(x < lower) or np.any(x > upper):
            return math.inf
        n_eval += 1
        value = fun(x)
        return math.inf if not np.isfinite(value) else float(value)

    best_x, best_f = x0, f(x0)
    n_iter = 0
    converged = False
    for _ in range(max_restarts + 1):
        inward = np.where(best_x + step <= upper, step, -step)
        x, fx, used, converged = _run(f, best_x, best_f, inward, ftol, xtol, max_iter - n_iter)
        n_iter += used
        improved = best_f - fx
        if fx <= best_f:
            best_x, best_f = x, fx
        if not converged or n_iter >= max_iter or not improved > ftol:
            break
    return SimplexResult(best_x.copy(), float(best_f), n_iter, n_eval, converged)


def _run(f, x0, f0, step, ftol, xtol, max_iter):
    n = x0.size
    scale = np.abs(step)
    simplex = np.vstack([x0] + [x0 + np.eye(n)[j] * step[j] for j in range(n)])
    values = np.array([f0] + [f(v) for v in simplex[1:]])

    n_iter = 0
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        spread = values[-1] - values[0]
        width = np.max(np.abs(simplex[1:] - simplex[0]), axis=0) / scale
        if spread < ftol or np.all(width < xtol):
            return simplex[0], values[0], n_iter, True
        if n_iter >= max_iter:
            return simplex[0], values[0], n_iter, False
        n_iter += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + REFLECT * (centroid - worst)
        fr = f(xr)
        if fr < values[0]:
            xe = centroid + EXPAND * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + CONTRACT * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + CONTRACT * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        best = simplex[0]
        simplex[1:] = best + SHRINK * (simplex[1:] - best)
        values[1:] = [f(v) for v in simplex[1:]]
