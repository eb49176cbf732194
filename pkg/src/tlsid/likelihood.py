"""Marginalized maximum-likelihood estimation of (omega, gamma).

The signal is modelled as ``alpha1 g1(t) + alpha2 g2(t)`` with unknown
amplitudes and unknown Gaussian noise scale. Integrating both out leaves a
log-likelihood that depends on the data only through the fraction of its
power captured by the span of the basis functions::

    L = (m_b - N_t) / 2 * log(1 - m_b <h^2> / (N_t <d^2>))

where ``h`` is the projection of the data on an orthonormalized basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import BRANCH_TOL, ModelKind, basis_matrix
from .noise import MeasurementTrace
from .optim import grid_multistart, nelder_mead

M_B = 2
LOG_FLOOR = 1e-15
DEGENERATE_EIG = 1e-12
DEFAULT_BOX = ((0.05, 3.0), (0.001, 1.0))
DEFAULT_GRID = (60, 40)
# the conversion from likelihood FWHM to uncertainty, as printed in the source method
FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))


class DegenerateBasisError(ValueError):
    """Basis functions are (numerically) linearly dependent on the sample times."""


class EstimationFailedError(RuntimeError):
    pass


class AngleRecoveryError(ValueError):
    pass


@dataclass
class BasisProjection:
    G: np.ndarray
    H: np.ndarray
    h: np.ndarray

    @property
    def captured_power(self) -> float:
        return float(self.h @ self.h)


@dataclass
class FitResult:
    omega: float
    gamma: float
    logL_max: float
    sigma_est: float
    alpha: tuple[float, float]
    d_omega: float = math.nan
    d_gamma: float = math.nan
    theta_I_est: float = math.nan
    theta_M_est: float = math.nan
    saturated: bool = False
    n_samples: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["alpha"] = list(self.alpha)
        return _nan_to_none(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "FitResult":
        def num(x):
            return math.nan if x is None else float(x)

        return cls(
            omega=num(data["omega"]), gamma=num(data["gamma"]),
            logL_max=num(data["logL_max"]), sigma_est=num(data["sigma_est"]),
            alpha=tuple(num(a) for a in data["alpha"]),
            d_omega=num(data.get("d_omega")), d_gamma=num(data.get("d_gamma")),
            theta_I_est=num(data.get("theta_I_est")), theta_M_est=num(data.get("theta_M_est")),
            saturated=bool(data.get("saturated", False)),
            n_samples=int(data.get("n_samples", 0)),
            extra=data.get("extra") or {},
        )


def _nan_to_none(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, np.generic):
        return _nan_to_none(obj.item())
    return obj


def orthonormal_projection(G, d) -> BasisProjection:
    """Orthonormalize the rows of ``G`` through the eigendecomposition of ``G G^T``."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    d = np.asarray(d, dtype=float)
    m, n = G.shape
    if n < m + 3:
        raise ValueError(f"need at least {m + 3} samples for {m} basis functions, got {n}")
    a, E = np.linalg.eigh(G @ G.T)
    if not np.all(np.isfinite(a)) or a.max() <= 0 or a.min() < DEGENERATE_EIG * a.max():
        raise DegenerateBasisError("basis functions are linearly dependent on these times")
    H = (E / np.sqrt(a)).T @ G
    return BasisProjection(G, H, H @ d)


def _as_trace(trace, times=None) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(trace, MeasurementTrace):
        return trace.times, trace.values
    return np.asarray(times, dtype=float), np.asarray(trace, dtype=float)


def log_likelihood(omega: float, gamma: float, trace: MeasurementTrace, kind: ModelKind | str) -> float:
    """Amplitude- and noise-marginalized log-likelihood of ``(omega, gamma)``."""
    times, d = _as_trace(trace)
    proj = orthonormal_projection(basis_matrix(kind, omega, gamma, times), d)
    return _loglike_from_power(proj.captured_power, float(d @ d), d.size)


def _loglike_from_power(hh, dd, n):
    if dd <= 0:
        raise EstimationFailedError("data vector is identically zero")
    arg = np.maximum(LOG_FLOOR, 1.0 - hh / dd)
    return 0.5 * (M_B - n) * np.log(arg)


def log_likelihood_grid(omegas, gammas, trace: MeasurementTrace, kind: ModelKind | str) -> np.ndarray:
    """Vectorized log-likelihood over arrays of (omega, gamma) of equal shape.

    Uses the closed-form inverse of the 2 x 2 Gram matrix; entries whose Gram
    matrix is degenerate come back as NaN.
    """
    times, d = _as_trace(trace)
    W = np.asarray(omegas, dtype=float)[..., None]
    Gm = np.asarray(gammas, dtype=float)[..., None]
    g1, g2 = _batched_basis(ModelKind.parse(kind), W, Gm, times)
    a = np.einsum("...n,...n->...", g1, g1)
    b = np.einsum("...n,...n->...", g1, g2)
    c = np.einsum("...n,...n->...", g2, g2)
    u = g1 @ d
    v = g2 @ d
    det = a * c - b * b
    half_tr = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(half_tr ** 2 - det, 0.0))
    lam_max = half_tr + disc
    lam_min = det / np.where(lam_max > 0, lam_max, 1.0)
    ok = (lam_max > 0) & (lam_min >= DEGENERATE_EIG * lam_max)
    safe_det = np.where(ok, det, 1.0)
    hh = (c * u * u - 2 * b * u * v + a * v * v) / safe_det
    L = _loglike_from_power(hh, float(d @ d), d.size)
    return np.where(ok, L, np.nan)


def _batched_basis(kind, W, Gm, t):
    decay = np.exp(-Gm * t)
    if kind is ModelKind.FID:
        return np.ones(np.broadcast(W, Gm, t).shape), decay * np.cos(W * t)
    w2 = W * W - 0.25 * Gm * Gm
    half = np.exp(-0.5 * Gm * t)
    aw = np.sqrt(np.abs(w2))
    safe = np.where(aw > 0, aw, 1.0)
    osc = half * (np.cos(aw * t) + 0.5 * Gm * np.sin(aw * t) / safe)
    ep = np.exp(np.minimum((aw - 0.5 * Gm) * t, 700.0))
    em = np.exp(-(aw + 0.5 * Gm) * t)
    hyp = 0.5 * (ep + em) + 0.25 * Gm / safe * (ep - em)
    crit = half * (1.0 + 0.5 * Gm * t)
    g2 = np.where(w2 > BRANCH_TOL, osc, np.where(w2 < -BRANCH_TOL, hyp, crit))
    return decay * np.ones_like(g2), g2


def estimate_noise_sigma(projection: BasisProjection, d) -> float:
    """Residual noise scale ``sqrt((|d|^2 - |h|^2) / (N_t - m_b - 2))``."""
    d = np.asarray(d, dtype=float)
    m = projection.h.size
    n = d.size
    if n <= m + 2:
        raise ValueError("too few samples to estimate the noise level")
    s2 = (float(d @ d) - projection.captured_power) / (n - m - 2)
    return math.sqrt(max(s2, 0.0))


def estimate_amplitudes(omega: float, gamma: float, trace: MeasurementTrace,
                        kind: ModelKind | str) -> tuple[float, float]:
    """Least-squares basis coefficients at ``(omega, gamma)``."""
    times, d = _as_trace(trace)
    G = basis_matrix(kind, omega, gamma, times)
    gram = G @ G.T
    a = np.linalg.eigvalsh(gram)
    if a.max() <= 0 or a.min() < DEGENERATE_EIG * a.max():
        raise DegenerateBasisError("basis functions are linearly dependent on these times")
    alpha = np.linalg.solve(gram, G @ d)
    return float(alpha[0]), float(alpha[1])


def angles_from_alphas(alpha1: float, alpha2: float, kind: ModelKind | str,
                       tol: float = 0.05) -> tuple[float, float]:
    """Initialization and measurement angles from the basis amplitudes.

    Both models give ``cos(theta_I + theta_M)`` and ``cos(theta_I - theta_M)``
    as sums and differences of the amplitudes; for the driven model the
    roles of the two amplitudes swap.
    """
    kind = ModelKind.parse(kind)
    if kind is ModelKind.FID:
        u, v = alpha1 - alpha2, alpha1 + alpha2
    else:
        u, v = alpha2 - alpha1, alpha2 + alpha1
    for x in (u, v):
        if not math.isfinite(x) or abs(x) > 1 + tol:
            raise AngleRecoveryError(f"amplitude combination {x:.4f} outside [-1, 1]")
    a, b = math.acos(min(1.0, max(-1.0, u))), math.acos(min(1.0, max(-1.0, v)))
    return 0.5 * (a + b), 0.5 * (a - b)


def fwhm_uncertainty(L, omega_hat: float, gamma_hat: float, box=DEFAULT_BOX,
                     conversion_factor: float = FWHM_FACTOR, step0: float = 1e-4,
                     xtol: float = 1e-6) -> tuple[float, float, bool]:
    """Widths of the likelihood peak along the omega and gamma axes.

    Steps away from the maximum (doubling from ``step0``) until the
    likelihood drops below half its peak value, then bisects the crossing to
    ``xtol``. The full width is multiplied by ``conversion_factor``. An axis
    whose half-maximum lies outside ``box`` reports the box width and sets
    the returned saturation flag.
    """
    box = np.asarray(box, dtype=float)
    L_max = L(omega_hat, gamma_hat)
    threshold = L_max - math.log(2.0)
    centre = (omega_hat, gamma_hat)
    saturated = False
    widths = []
    for axis in range(2):
        def below(delta, sign):
            x = list(centre)
            x[axis] += sign * delta
            val = L(*x)
            return not (val >= threshold)  # NaN counts as below

        total = 0.0
        axis_saturated = False
        for sign in (1.0, -1.0):
            limit = (box[axis, 1] - centre[axis]) if sign > 0 else (centre[axis] - box[axis, 0])
            lo, hi = 0.0, step0
            while True:
                if hi >= limit:
                    if limit <= 0 or not below(limit, sign):
                        axis_saturated = True
                        break
                    hi = limit
                    break
                if below(hi, sign):
                    break
                lo, hi = hi, 2 * hi
            if axis_saturated:
                break
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                if below(mid, sign):
                    hi = mid
                else:
                    lo = mid
            total += 0.5 * (lo + hi)
        if axis_saturated:
            saturated = True
            widths.append(float(box[axis, 1] - box[axis, 0]))
        else:
            widths.append(conversion_factor * total)
    return widths[0], widths[1], saturated


def strategy3(trace: MeasurementTrace, kind: ModelKind | str = ModelKind.FID, search_box=DEFAULT_BOX,
              grid_shape=DEFAULT_GRID, uncertainties: bool = True,
              conversion_factor: float = FWHM_FACTOR, tol: float = 1e-10) -> FitResult:
    """Maximum-likelihood (omega, gamma) with amplitude, noise and angle estimates.

    A coarse grid over ``search_box`` locates the likelihood peak and
    Nelder-Mead refines it.
    """
    kind = ModelKind.parse(kind)
    if len(trace) < 5:
        raise ValueError("strategy 3 needs at least 5 samples")
    box = np.asarray(search_box, dtype=float)

    def neg_grid(W, Gm):
        return -log_likelihood_grid(W, Gm, trace, kind)

    grid = grid_multistart(neg_grid, box, grid_shape, vectorized=True)
    if not np.isfinite(grid.f):
        raise EstimationFailedError("log-likelihood undefined on the whole search grid")

    def neg(x):
        return float(-log_likelihood_grid(x[0], x[1], trace, kind))

    res = nelder_mead(neg, grid.x, box, tol=tol)
    omega, gamma = float(res.x[0]), float(res.x[1])
    if res.f > grid.f:
        omega, gamma = float(grid.x[0]), float(grid.x[1])

    times, d = trace.times, trace.values
    proj = orthonormal_projection(basis_matrix(kind, omega, gamma, times), d)
    logL = float(_loglike_from_power(proj.captured_power, float(d @ d), d.size))
    sigma = estimate_noise_sigma(proj, d)
    alpha = estimate_amplitudes(omega, gamma, trace, kind)
    try:
        theta_I, theta_M = angles_from_alphas(*alpha, kind)
    except AngleRecoveryError:
        theta_I = theta_M = math.nan

    fit = FitResult(omega, gamma, logL, sigma, alpha, theta_I_est=theta_I, theta_M_est=theta_M,
                    n_samples=len(trace))
    if uncertainties:
        def L(w, g):
            return float(log_likelihood_grid(w, g, trace, kind))

        fit.d_omega, fit.d_gamma, fit.saturated = fwhm_uncertainty(
            L, omega, gamma, box, conversion_factor)
    return fit
