"""Iterative data acquisition: trace averaging, low-discrepancy time
sampling and the likelihood-driven trace-variance heuristic."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .likelihood import (DEFAULT_BOX, DEFAULT_GRID, EstimationFailedError, FitResult,
                         log_likelihood_grid, strategy3)
from .model import ModelKind, SystemParams, basis_functions
from .noise import MeasurementTrace, NoiseSpec, simulate_trace
from .optim import grid_axes

DEFAULT_POSTERIOR_SAMPLES = 100
DEFAULT_CANDIDATES = 256
DUPLICATE_TOL = 1e-9


@dataclass
class SamplingSchedule:
    times: np.ndarray
    origin: str = "uniform"  # "uniform", "ld" or "variance"
    iteration: int = 0
    info: dict = field(default_factory=dict)


@dataclass
class PosteriorSamples:
    params: np.ndarray  # (J, 2) array of (omega, gamma)
    weights: np.ndarray


def average_traces(traces) -> MeasurementTrace:
    """Pointwise mean of traces sharing one sampling schedule."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to average")
    times = traces[0].times
    for tr in traces[1:]:
        if tr.times.shape != times.shape or not np.array_equal(tr.times, times):
            raise ValueError("traces have different sampling schedules")
    values = np.mean([tr.values for tr in traces], axis=0)
    repeats = sum(tr.repeats for tr in traces)
    return MeasurementTrace(times.copy(), values, traces[0].noise, traces[0].seed, repeats)


def van_der_corput(n: int, base: int = 2) -> float:
    """Radical inverse of ``n`` in ``base``: digits mirrored about the radix point."""
    if n < 1:
        raise ValueError("index must be >= 1")
    if base < 2:
        raise ValueError("base must be >= 2")
    value, denom = 0.0, 1.0
    while n:
        n, digit = divmod(n, base)
        denom *= base
        value += digit / denom
    return value


def van_der_corput_points(start: int, stop: int, base: int = 2) -> np.ndarray:
    """Sequence elements ``start .. stop - 1`` (1-based)."""
    return np.array([van_der_corput(n, base) for n in range(start, stop)])


def ld_schedule(n0: int, ni: int, iterations: int, T: float) -> list[SamplingSchedule]:
    """Cumulative low-discrepancy schedules, one per iteration.

    Iteration 0 holds the first ``n0`` base-2 van der Corput points scaled to
    ``[0, T]``; every later iteration appends the next ``ni``.
    """
    if n0 < 1 or ni < 0 or iterations < 0 or T <= 0:
        raise ValueError("need n0 >= 1, ni >= 0, iterations >= 0 and T > 0")
    out = []
    for k in range(iterations + 1):
        count = n0 + k * ni
        times = np.sort(T * van_der_corput_points(1, count + 1))
        out.append(SamplingSchedule(times, "ld", k, {"n0": n0, "ni": ni}))
    return out


def max_gap(times, T: float) -> float:
    """Largest empty stretch of ``[0, T]`` between consecutive samples."""
    pts = np.concatenate([[0.0], np.sort(np.asarray(times, dtype=float)), [T]])
    return float(np.max(np.diff(pts)))


def star_discrepancy(points) -> float:
    """Exact 1-D star discrepancy of points in [0, 1]."""
    x = np.sort(np.asarray(points, dtype=float))
    n = x.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))


def sample_posterior(trace: MeasurementTrace, kind: ModelKind | str, box=DEFAULT_BOX,
                     J: int = DEFAULT_POSTERIOR_SAMPLES, rng=None,
                     grid_shape=DEFAULT_GRID) -> PosteriorSamples:
    """Draw ``J`` parameter guesses from the likelihood on the coarse search grid.

    Grid cells are drawn with probability proportional to ``exp(L - L_max)``
    and each draw is jittered uniformly inside its cell.
    """
    if J < 2:
        raise ValueError("need J >= 2")
    rng = np.random.default_rng(rng)
    box = np.asarray(box, dtype=float)
    a0, a1 = grid_axes(box, grid_shape)
    W, Gm = np.meshgrid(a0, a1, indexing="ij")
    L = log_likelihood_grid(W, Gm, trace, kind)
    finite = np.isfinite(L)
    if not finite.any():
        raise EstimationFailedError("log-likelihood undefined on the whole grid")
    L_max = L[finite].max()
    if np.all(L[finite] == L_max) and finite.sum() > 1:
        raise EstimationFailedError("log-likelihood is flat at its clamp on the grid")
    prob = np.where(finite, np.exp(L - L_max), 0.0).ravel()
    prob /= prob.sum()
    cells = rng.choice(prob.size, size=J, p=prob)
    i, j = np.unravel_index(cells, W.shape)
    h0, h1 = a0[1] - a0[0], a1[1] - a1[0]
    omegas = np.clip(a0[i] + h0 * rng.uniform(-0.5, 0.5, J), box[0, 0], box[0, 1])
    gammas = np.clip(a1[j] + h1 * rng.uniform(-0.5, 0.5, J), box[1, 0], box[1, 1])
    return PosteriorSamples(np.column_stack([omegas, gammas]), np.full(J, 1.0 / J))


VARIANCE_FLOOR = 1e-20


def predicted_variance(samples: PosteriorSamples, kind: ModelKind | str, times,
                       alpha=(0.0, 1.0)) -> np.ndarray:
    """Variance over the samples of ``alpha1 g1(t) + alpha2 g2(t)``."""
    times = np.asarray(times, dtype=float)
    preds = np.empty((len(samples.params), times.size))
    for row, (w, g) in enumerate(samples.params):
        g1, g2 = basis_functions(kind, w, g)
        preds[row] = alpha[0] * g1(times) + alpha[1] * g2(times)
    return preds.var(axis=0)


def trace_variance_schedule(samples: PosteriorSamples, kind: ModelKind | str, candidate_times,
                            n1: int, alpha=(0.0, 1.0)) -> np.ndarray:
    """Candidate times at local maxima of the predicted-signal variance.

    At most ``n1`` maxima are returned, largest variance first. With no
    strict local maximum the global maximum (earliest on ties) is used.
    """
    if n1 < 1:
        raise ValueError("n1 must be >= 1")
    cand = np.sort(np.asarray(candidate_times, dtype=float))
    if cand.size == 0:
        raise ValueError("no candidate times")
    var = predicted_variance(samples, kind, cand, alpha)
    var[var < VARIANCE_FLOOR] = 0.0  # roundoff from identical samples
    peaks = []
    for k in range(cand.size):
        left = var[k - 1] if k > 0 else -np.inf
        right = var[k + 1] if k + 1 < cand.size else -np.inf
        # plateaus keep their earliest point only
        if var[k] > left and var[k] >= right and var[k] > 0:
            peaks.append(k)
    if not peaks:
        peaks = [int(np.argmax(var))]
    peaks.sort(key=lambda k: (-var[k], k))
    return cand[peaks[:n1]]


def simulated_acquirer(params: SystemParams, kind: ModelKind | str, noise: NoiseSpec, seed=0):
    """Acquisition callback returning fresh noisy samples at the requested times."""
    rng = np.random.default_rng(seed)

    def acquire(times):
        times = np.asarray(times, dtype=float)
        order = np.argsort(times)
        values = np.empty_like(times)
        values[order] = simulate_trace(params, kind, times[order], noise, rng).values
        return values

    return acquire


def refine_loop(initial_times, acquire, method: str = "ld", iterations: int = 10,
                kind: ModelKind | str = ModelKind.FID, T: float = 30.0, ni: int = 8,
                box=DEFAULT_BOX, J: int = DEFAULT_POSTERIOR_SAMPLES,
                n_candidates: int = DEFAULT_CANDIDATES, seed=0,
                uncertainties: bool = False) -> list[FitResult]:
    """Alternate maximum-likelihood fits with schedule extension.

    ``method="ld"`` appends the next ``ni`` low-discrepancy times after the
    ones already used (the initial schedule is assumed to be the first
    ``len(initial_times)`` points of that sequence). ``method="variance"``
    appends up to ``ni`` peaks of the predicted-signal variance. Returns one
    fit per iteration, iteration 0 being the initial schedule.
    """
    if method not in ("ld", "variance"):
        raise ValueError(f"unknown refinement method {method!r}")
    kind = ModelKind.parse(kind)
    rng = np.random.default_rng(seed)
    times = np.sort(np.asarray(initial_times, dtype=float))
    values = np.asarray(acquire(times), dtype=float)
    ld_next = times.size + 1
    candidates = T * van_der_corput_points(1, n_candidates + 1)
    results = []
    for k in range(iterations + 1):
        trace = MeasurementTrace(times, values)
        fit = strategy3(trace, kind, box, uncertainties=uncertainties)
        fit.extra = {"iteration": k, "method": method}
        results.append(fit)
        if k == iterations:
            break
        if method == "ld":
            new = T * van_der_corput_points(ld_next, ld_next + ni)
            ld_next += ni
        else:
            samples = sample_posterior(trace, kind, box, J, rng)
            free = candidates[np.min(np.abs(candidates[:, None] - times[None, :]), axis=1) > DUPLICATE_TOL]
            new = trace_variance_schedule(samples, kind, free, ni, fit.alpha)
        new = np.asarray(new, dtype=float)
        new = new[np.min(np.abs(new[:, None] - times[None, :]), axis=1) > DUPLICATE_TOL]
        if new.size == 0:
            continue
        new_values = np.asarray(acquire(new), dtype=float)
        all_t = np.concatenate([times, new])
        order = np.argsort(all_t)
        times, values = all_t[order], np.concatenate([values, new_values])[order]
    return results


def write_jsonl(results, path=None) -> str:
    text = "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in results)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
