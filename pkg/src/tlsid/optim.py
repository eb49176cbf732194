"""Box-constrained Nelder-Mead and tensor-grid search in two dimensions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class OptimResult:
    x: np.ndarray
    f: float
    iters: int
    converged: bool
    nfev: int = 0


@dataclass
class GridResult:
    x: np.ndarray
    f: float
    axes: tuple[np.ndarray, np.ndarray]
    values: np.ndarray  # shape (len(axes[0]), len(axes[1]))


def _as_box(box):
    box = np.asarray(box, dtype=float)
    if box.shape != (2, 2) or np.any(box[:, 0] > box[:, 1]):
        raise ValueError("box must be [[lo0, hi0], [lo1, hi1]] with lo <= hi")
    return box


def nelder_mead(objective, x0, box, tol: float = 1e-10, max_iters: int = 2000,
                initial_step: float = 0.05) -> OptimResult:
    """Minimize ``objective`` over a 2-D box by the downhill simplex method.

    Trial points are projected back onto the box. Iteration stops once the
    largest vertex distance from the best vertex falls below ``tol``.

    Parameters
    ----------
    objective : callable
        Maps a length-2 array to a float. NaN is treated as +inf.
    x0 : array_like
        Start point, must lie inside ``box``.
    box : array_like
        ``[[lo0, hi0], [lo1, hi1]]``.
    initial_step : float
        Initial simplex edge as a fraction of the box width on each axis.
    """
    box = _as_box(box)
    lo, hi = box[:, 0], box[:, 1]
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < lo - 1e-12) or np.any(x0 > hi + 1e-12):
        raise ValueError(f"start point {x0} outside box")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x0 = np.clip(x0, lo, hi)
    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        v = float(objective(x))
        return np.inf if np.isnan(v) else v

    def project(x):
        return np.clip(x, lo, hi)

    width = hi - lo
    simplex = [x0]
    for i in range(2):
        v = x0.copy()
        step = initial_step * width[i]
        if step == 0:
            step = initial_step
        v[i] = x0[i] + step if x0[i] + step <= hi[i] else x0[i] - step
        simplex.append(project(v))
    simplex = np.array(simplex)
    fvals = np.array([f(v) for v in simplex])

    iters = 0
    converged = False
    while iters < max_iters:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)) < tol:
            converged = True
            break
        iters += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = project(centroid + REFLECT * (centroid - worst))
        fr = f(xr)
        if fr < fvals[0]:
            xe = project(centroid + EXPAND * (xr - centroid))
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = project(centroid + CONTRACT * (xr - centroid))
            fc = f(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = project(centroid + CONTRACT * (worst - centroid))
            fc = f(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        best = simplex[0]
        for i in range(1, 3):
            simplex[i] = project(best + SHRINK * (simplex[i] - best))
            fvals[i] = f(simplex[i])

    i = int(np.argmin(fvals))
    return OptimResult(simplex[i].copy(), float(fvals[i]), iters, converged, nfev)


def grid_axes(box, grid_shape) -> tuple[np.ndarray, np.ndarray]:
    box = _as_box(box)
    n0, n1 = grid_shape
    if n0 < 2 or n1 < 2:
        raise ValueError("grid needs at least 2 x 2 points")
    return np.linspace(box[0, 0], box[0, 1], n0), np.linspace(box[1, 0], box[1, 1], n1)


def grid_multistart(objective, box, grid_shape=(60, 40), vectorized: bool = False) -> GridResult:
    """Evaluate ``objective`` on a tensor grid and return the lowest point.

    With ``vectorized=True`` the objective receives two meshgrid arrays
    (``indexing="ij"``) and must return an array of the same shape.
    Ties go to the lowest scan index (first axis outermost).
    """
    a0, a1 = grid_axes(box, grid_shape)
    if vectorized:
        X, Y = np.meshgrid(a0, a1, indexing="ij")
        values = np.asarray(objective(X, Y), dtype=float)
    else:
        values = np.array([[objective(np.array([u, v])) for v in a1] for u in a0], dtype=float)
    masked = np.where(np.isnan(values), np.inf, values)
    k = int(np.argmin(masked))
    i, j = np.unravel_index(k, masked.shape)
    return GridResult(np.array([a0[i], a1[j]]), float(masked[i, j]), (a0, a1), values)
