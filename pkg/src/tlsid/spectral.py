"""Fourier spectra of traces and the two peak-based estimators.

Strategy 1 inverts peak position and height, strategy 2 inverts peak
position and half-width, both using the analytic spectrum of
``u(t) exp(-gamma t) cos(omega0 t)``::

    F(w) = (gamma + i w) / ((gamma + i w)^2 + omega0^2)
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .noise import MeasurementTrace
from .optim import OptimResult, nelder_mead

DEFAULT_GRID_POINTS = 2048
# admissible estimate range shared with the likelihood search box
ADMISSIBLE_BOX = ((0.05, 3.0), (0.001, 1.0))


class DegenerateInputError(ValueError):
    """Raised when a trace or peak carries no usable spectral information."""


class NoRealPeakError(ValueError):
    """Raised when damping is too strong for the power spectrum to peak at w > 0."""


@dataclass
class Spectrum:
    freqs: np.ndarray
    values: np.ndarray
    kind: str  # "dft" or "trapezoid"

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["omega", "re", "im", "power"])
        for w, v, p in zip(self.freqs, self.values, self.power):
            writer.writerow([repr(float(w)), repr(float(v.real)), repr(float(v.imag)), repr(float(p))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass
class PeakInfo:
    omega_star: float
    P_star: float
    d: float
    omega_1: float = math.nan
    omega_2: float = math.nan

    @property
    def broad(self) -> bool:
        """Half-width at least as large as the peak position."""
        return self.d >= self.omega_star


def center_rescale(values) -> np.ndarray:
    """Subtract the mean and scale so the largest deviation is 1."""
    if isinstance(values, MeasurementTrace):
        values = values.values
    d = np.asarray(values, dtype=float)
    if d.size == 0:
        raise DegenerateInputError("empty data")
    centered = d - d.mean()
    scale = np.max(np.abs(centered))
    if scale == 0:
        raise DegenerateInputError("all data values are equal")
    return centered / scale


def _uniform_step(times) -> float:
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two samples")
    steps = np.diff(times)
    dt = steps.mean()
    if np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
        raise ValueError("dft needs uniformly spaced samples; use continuous_ft instead")
    return float(dt)


def dft(values, times=None) -> Spectrum:
    """Discrete Fourier transform ``F(k) = sum_n d_n exp(-2 pi i k n / N)``.

    Bin ``k`` is labelled with angular frequency ``2 pi k / (N dt)``; with
    ``times=None`` a unit step is assumed.
    """
    d = np.asarray(values, dtype=float)
    dt = 1.0 if times is None else _uniform_step(times)
    n = d.size
    return Spectrum(2 * np.pi * np.arange(n) / (n * dt), np.fft.fft(d), "dft")


def default_omega_grid(times, n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """``n_points`` uniform frequencies on ``(0, pi N_t / T]``."""
    times = np.asarray(times, dtype=float)
    span = times[-1] - times[0]
    if span <= 0:
        raise ValueError("need at least two distinct sample times")
    w_max = np.pi * (times.size - 1) / span
    return w_max / n_points * np.arange(1, n_points + 1)


def trapezoid_weights(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def continuous_ft(values, times, omega_grid=None) -> Spectrum:
    """Trapezoidal approximation of the continuous transform, sampled on ``omega_grid``."""
    d = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if d.shape != times.shape:
        raise ValueError("values and times differ in length")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if omega_grid is None:
        omega_grid = default_omega_grid(times)
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size == 0:
        raise ValueError("empty frequency grid")
    weighted = d * trapezoid_weights(times)
    F = np.exp(1j * np.outer(omega_grid, times)) @ weighted
    return Spectrum(omega_grid, F, "trapezoid")


def locate_peak(spectrum: Spectrum) -> PeakInfo:
    """Global maximum of the power spectrum and the span where |F| >= max|F| / 2.

    Multi-peak spectra are not separated: the half-maximum span covers
    every frequency above threshold.
    """
    keep = spectrum.freqs > 0
    w = spectrum.freqs[keep]
    amp = np.abs(spectrum.values[keep])
    if w.size == 0 or not np.any(amp > 0):
        raise DegenerateInputError("spectrum has no positive-frequency content")
    k = int(np.argmax(amp))
    above = w[amp >= 0.5 * amp[k]]
    w1, w2 = float(above.min()), float(above.max())
    d = 0.5 * (w2 - w1)
    if d == 0:
        # single-bin peak: fall back to half the local grid spacing
        d = 0.5 * float(np.median(np.diff(w))) if w.size > 1 else 0.0
    return PeakInfo(float(w[k]), float(amp[k] ** 2), d, w1, w2)


def closed_form_peak(omega0: float, gamma: float) -> PeakInfo:
    """Peak position, height and half-width of the analytic damped-cosine spectrum."""
    if not omega0 > 0 or not gamma > 0:
        raise ValueError("need omega0 > 0 and gamma > 0")
    ws2 = omega0 * math.sqrt(4 * gamma * gamma + omega0 * omega0) - gamma * gamma
    if ws2 <= 0:
        raise NoRealPeakError(f"no peak at positive frequency for omega0={omega0}, gamma={gamma}")
    ws = math.sqrt(ws2)
    P = (omega0 ** 2 + ws2 + gamma ** 2) / (8 * gamma ** 2 * omega0 ** 2)
    d = math.sqrt(ws2 + 2 * math.sqrt(3) * gamma * math.sqrt(ws2 + gamma ** 2)) - ws
    return PeakInfo(ws, P, d)


def peak_equations(omega0: float, gamma: float, peak: PeakInfo) -> tuple[float, float]:
    """Residuals (E1, E2) of the peak position and height relations."""
    ws2 = peak.omega_star ** 2
    e1 = ws2 + gamma ** 2 - omega0 * math.sqrt(4 * gamma ** 2 + omega0 ** 2)
    e2 = 8 * gamma ** 2 * omega0 ** 2 * peak.P_star - (omega0 ** 2 + gamma ** 2 + ws2)
    return e1, e2


def strategy1_start(peak: PeakInfo) -> tuple[float, float]:
    ws = peak.omega_star
    denom = 8 * ws * ws * peak.P_star - 1
    if denom > 0:
        return ws, math.sqrt(2 * ws / denom)
    return ws, peak.d / math.sqrt(3)


def strategy1(peak: PeakInfo, tol: float = 1e-13, restarts: int = 5, full_output: bool = False):
    """Fit (omega0, gamma) to the peak position and height.

    Minimizes ``|E1| + |E2|`` with Nelder-Mead on
    ``[w*/2, 2 w*] x [1e-4, w*]``; the simplex is restarted from its best
    vertex until the objective stops improving, since a single run can
    stall on the kink of the absolute-value objective.
    """
    ws = peak.omega_star
    if not ws > 0 or not peak.P_star > 0:
        raise DegenerateInputError("peak position and height must be positive")
    box = np.array([[0.5 * ws, 2 * ws], [1e-4, max(ws, 2e-4)]])

    def objective(x):
        e1, e2 = peak_equations(x[0], x[1], peak)
        return abs(e1) + abs(e2)

    x = np.clip(np.array(strategy1_start(peak)), box[:, 0], box[:, 1])
    f_start = objective(x)
    total_iters = 0
    result = None
    for _ in range(restarts + 1):
        result = nelder_mead(objective, x, box, tol=tol)
        total_iters += result.iters
        improved = result.f < objective(x)
        x = result.x
        if not improved:
            break
    res = OptimResult(result.x, result.f, total_iters, result.converged, result.nfev)
    if res.f > f_start:
        res = OptimResult(np.array(strategy1_start(peak)), f_start, total_iters, False)
    omega0, gamma = float(res.x[0]), float(res.x[1])
    if full_output:
        return omega0, gamma, res
    return omega0, gamma


def strategy2(peak: PeakInfo, exact_omega: bool = True) -> tuple[float, float]:
    """Invert peak position and half-width in closed form.

    gamma follows from the half-width relation. By default omega0 is then
    taken from the peak-position relation E1 = 0, which makes the inversion
    exact; ``exact_omega=False`` uses ``sqrt(w*^2 + gamma^2)`` instead, the
    small-damping form that treats ``w* = sqrt(omega0^2 - gamma^2)``.
    """
    ws, d = peak.omega_star, peak.d
    g = math.sqrt(9 * ws ** 4 + 12 * d ** 2 * ws ** 2 + 12 * d ** 3 * ws + 3 * d ** 4)
    radicand = 6 * g - 18 * ws ** 2
    if radicand < 0:
        if radicand > -1e-12 * max(1.0, 18 * ws ** 2):
            radicand = 0.0
        else:
            raise DegenerateInputError("peak width inconsistent with a damped cosine")
    gamma = math.sqrt(radicand) / 6
    s = ws * ws + gamma * gamma
    if not exact_omega:
        return math.sqrt(s), gamma
    g2 = gamma * gamma
    # omega0^4 + 4 gamma^2 omega0^2 - s^2 = 0, rationalized against cancellation
    omega0_sq = s * s / (2 * g2 + math.sqrt(4 * g2 * g2 + s * s))
    return math.sqrt(omega0_sq), gamma


def trace_peak(trace: MeasurementTrace, omega_grid=None) -> PeakInfo:
    """Center, rescale and transform a trace, then characterize its main peak."""
    rescaled = center_rescale(trace.values)
    return locate_peak(continuous_ft(rescaled, trace.times, omega_grid))


def fourier_estimate(trace: MeasurementTrace, strategy: int, omega_grid=None,
                     box=ADMISSIBLE_BOX) -> tuple[float, float, bool]:
    """Run strategy 1 or 2 on a trace; returns ``(omega, gamma, clipped)``.

    Estimates are clipped into ``box``; ``clipped`` reports whether that
    changed anything.
    """
    peak = trace_peak(trace, omega_grid)
    if strategy == 1:
        omega, gamma = strategy1(peak)
    elif strategy == 2:
        omega, gamma = strategy2(peak)
    else:
        raise ValueError(f"Fourier strategies are 1 and 2, got {strategy}")
    if not (math.isfinite(omega) and math.isfinite(gamma)):
        raise DegenerateInputError("non-finite Fourier estimate")
    (w_lo, w_hi), (g_lo, g_hi) = box
    co = min(max(omega, w_lo), w_hi)
    cg = min(max(gamma, g_lo), g_hi)
    return co, cg, (co != omega or cg != gamma)
