"""Monte-Carlo comparison of the three estimation strategies.

Every simulated trace gets a seed derived from the master seed and the
content of its cell (model index, noise spec, run index), so a cell's
numbers do not depend on which other cells are in the sweep or in what
order they run.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .adaptive import van_der_corput_points
from .likelihood import DEFAULT_BOX, strategy3
from .model import MODEL_TABLE, ModelKind, SystemParams, benchmark_params
from .noise import NoiseSpec, simulate_trace, uniform_schedule
from .spectral import fourier_estimate

logger = logging.getLogger(__name__)

GAUSSIAN_SWEEP = (0.01, 0.02, 0.04, 0.06, 0.08, 0.10)
PROJECTION_SWEEP = (100, 500, 1000, 5000, 10000)
STRATEGIES = (1, 2, 3)


def derive_seed(master: int, model_idx: int, noise: NoiseSpec, run: int) -> int:
    """64-bit seed from a hash of the cell content and run index."""
    key = f"{int(master)}|{int(model_idx)}|{noise.label()}|{int(run)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def build_schedule(spec: dict) -> np.ndarray:
    """Sample times from ``{"type": "uniform" | "ld", "n_t": int, "T": float}``."""
    kind = spec.get("type", "uniform")
    n_t = int(spec.get("n_t", 100))
    T = float(spec.get("T", 30.0))
    if kind == "uniform":
        return uniform_schedule(n_t, T)
    if kind == "ld":
        return np.sort(T * van_der_corput_points(1, n_t + 1))
    raise ValueError(f"unknown schedule type {kind!r}")


@dataclass
class ExperimentConfig:
    models: list = field(default_factory=list)
    kind: ModelKind = ModelKind.FID
    schedule: dict = field(default_factory=lambda: {"type": "uniform", "n_t": 100, "T": 30.0})
    noise_sweep: list = field(default_factory=lambda: [NoiseSpec.gaussian(s) for s in GAUSSIAN_SWEEP])
    strategies: list = field(default_factory=lambda: list(STRATEGIES))
    runs: int = 100
    seed: int = 0
    model_indices: list = field(default_factory=list)

    def __post_init__(self):
        self.kind = ModelKind.parse(self.kind)
        if not self.models:
            self.models = [benchmark_params(i, self.kind) for i in range(1, len(MODEL_TABLE) + 1)]
        if not self.model_indices:
            self.model_indices = list(range(1, len(self.models) + 1))
        if len(self.model_indices) != len(self.models):
            raise ValueError("model_indices and models differ in length")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.noise_sweep:
            raise ValueError("empty noise sweep")
        if not self.strategies or any(s not in STRATEGIES for s in self.strategies):
            raise ValueError("strategies must be a nonempty subset of {1, 2, 3}")
        if self.kind is ModelKind.RABI and any(s != 3 for s in self.strategies):
            raise ValueError("Fourier strategies 1 and 2 only apply to the fid model")

    def to_dict(self) -> dict:
        return {
            "models": [m.to_dict() for m in self.models],
            "model_indices": list(self.model_indices),
            "kind": self.kind.value,
            "schedule": dict(self.schedule),
            "noise_sweep": [n.to_dict() for n in self.noise_sweep],
            "strategies": list(self.strategies),
            "runs": self.runs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        kind = ModelKind.parse(data.get("kind", "fid"))
        models, indices = [], []
        for k, m in enumerate(data.get("models") or []):
            if isinstance(m, int):
                models.append(benchmark_params(m, kind))
                indices.append(m)
            else:
                models.append(SystemParams.from_dict(m))
                indices.append(k + 1)
        if data.get("model_indices"):
            indices = [int(i) for i in data["model_indices"]]
        noise = [NoiseSpec.from_dict(n) for n in data["noise_sweep"]] if data.get("noise_sweep") else None
        kwargs = dict(models=models, kind=kind, model_indices=indices,
                      runs=int(data.get("runs", 100)), seed=int(data.get("seed", 0)))
        if noise is not None:
            kwargs["noise_sweep"] = noise
        if data.get("schedule"):
            kwargs["schedule"] = dict(data["schedule"])
        if data.get("strategies"):
            kwargs["strategies"] = [int(s) for s in data["strategies"]]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CellStats:
    model_idx: int
    omega_true: float
    gamma_true: float
    noise_kind: str
    noise_level: float
    strategy: int
    e_omega: float
    e_gamma: float
    bias_omega: float
    bias_gamma: float
    n_failed: int
    std_omega: float = math.nan
    std_gamma: float = math.nan


COLUMNS = [f.name for f in fields(CellStats)]
_INT_COLUMNS = {"model_idx", "strategy", "n_failed"}
_STR_COLUMNS = {"noise_kind"}


@dataclass
class ErrorStats:
    cells: list = field(default_factory=list)

    def summary(self) -> list[dict]:
        """Min / median / max of the per-model errors for each (noise, strategy)."""
        groups: dict = {}
        for c in self.cells:
            groups.setdefault((c.noise_kind, c.noise_level, c.strategy), []).append(c)
        out = []
        for (kind, level, strategy), cells in sorted(groups.items()):
            row = {"noise_kind": kind, "noise_level": level, "strategy": strategy}
            for name in ("e_omega", "e_gamma"):
                vals = np.array([getattr(c, name) for c in cells], dtype=float)
                vals = vals[np.isfinite(vals)]
                if vals.size:
                    row[f"{name}_min"] = float(vals.min())
                    row[f"{name}_median"] = float(np.median(vals))
                    row[f"{name}_max"] = float(vals.max())
                else:
                    row[f"{name}_min"] = row[f"{name}_median"] = row[f"{name}_max"] = math.nan
            out.append(row)
        return out

    def median_error(self, noise: NoiseSpec, strategy: int, name: str = "e_omega") -> float:
        for row in self.summary():
            if (row["noise_kind"], row["noise_level"], row["strategy"]) == (noise.kind, noise.level, strategy):
                return row[f"{name}_median"]
        raise KeyError((noise.label(), strategy))


def estimate(trace, strategy: int, kind: ModelKind | str = ModelKind.FID, box=DEFAULT_BOX):
    """``(omega, gamma)`` from one strategy; raises on estimator failure."""
    if strategy == 3:
        fit = strategy3(trace, kind, box, uncertainties=False)
        return fit.omega, fit.gamma
    omega, gamma, _ = fourier_estimate(trace, strategy, box=box)
    return omega, gamma


def cell_estimates(params: SystemParams, kind, times, noise: NoiseSpec, strategies, runs: int,
                   master_seed: int, model_idx: int) -> dict[int, np.ndarray]:
    """Per-strategy ``(runs, 2)`` arrays of estimates; failures are NaN rows.

    All strategies see the same simulated traces.
    """
    out = {s: np.full((runs, 2), np.nan) for s in strategies}
    for run in range(runs):
        seed = derive_seed(master_seed, model_idx, noise, run)
        trace = simulate_trace(params, kind, times, noise, seed)
        for s in strategies:
            try:
                out[s][run] = estimate(trace, s, kind)
            except (ValueError, RuntimeError, ArithmeticError) as exc:
                logger.debug("strategy %d failed on model %d run %d: %s", s, model_idx, run, exc)
    return out


def summarize_cell(est: np.ndarray, params: SystemParams, noise: NoiseSpec, strategy: int,
                   model_idx: int) -> CellStats:
    ok = np.all(np.isfinite(est), axis=1)
    good = est[ok]
    n_failed = int((~ok).sum())
    truth = np.array([params.omega, params.gamma])
    if good.shape[0]:
        rel = np.abs(good - truth) / truth
        e = rel.mean(axis=0)
        bias = good.mean(axis=0) - truth
        std = good.std(axis=0, ddof=1) if good.shape[0] > 1 else np.zeros(2)
    else:
        e = bias = std = np.full(2, math.nan)
    return CellStats(model_idx, params.omega, params.gamma, noise.kind, float(noise.level), strategy,
                     float(e[0]), float(e[1]), float(bias[0]), float(bias[1]), n_failed,
                     float(std[0]), float(std[1]))


def _run_cell(args):
    config, m, noise = args
    params = config.models[m]
    idx = config.model_indices[m]
    times = build_schedule(config.schedule)
    est = cell_estimates(params, config.kind, times, noise, config.strategies, config.runs,
                         config.seed, idx)
    return [summarize_cell(est[s], params, noise, s, idx) for s in config.strategies]


def run_comparison(config: ExperimentConfig, workers: int = 1) -> ErrorStats:
    """Relative-error statistics for every (model, noise, strategy) cell."""
    jobs = [(config, m, noise) for noise in config.noise_sweep for m in range(len(config.models))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(job) for job in jobs]
    cells = [c for chunk in chunks for c in chunk]
    cells.sort(key=lambda c: (c.noise_kind, c.noise_level, c.model_idx, c.strategy))
    return ErrorStats(cells)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float
    n: int

    @property
    def standard_error(self) -> float:
        return self.std / math.sqrt(self.n) if self.n else math.nan

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "counts": self.counts.tolist(),
                "mean": self.mean, "std": self.std, "n": self.n}


def bias_histogram(estimates, bins: int = 30) -> Histogram:
    """Fixed-width histogram of finite estimates with their mean and spread."""
    x = np.asarray(estimates, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise ValueError("no finite estimates")
    counts, edges = np.histogram(x, bins=bins)
    std = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return Histogram(edges, counts, float(x.mean()), std, int(x.size))


def emit_results(stats: ErrorStats, path=None, format: str = "csv") -> str:
    records = [asdict(c) for c in stats.cells]
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow([r[k] if k in _INT_COLUMNS | _STR_COLUMNS else repr(float(r[k])) for k in COLUMNS])
        text = buf.getvalue()
    elif format == "json":
        clean = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                 for r in records]
        text = json.dumps(clean, indent=1, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown format {format!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def load_results(text: str, format: str = "csv") -> ErrorStats:
    if format == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
        records = []
        for row in rows:
            rec = {}
            for k in COLUMNS:
                v = row[k]
                rec[k] = int(v) if k in _INT_COLUMNS else v if k in _STR_COLUMNS else float(v)
            records.append(rec)
    elif format == "json":
        records = [{k: (math.nan if v is None else v) for k, v in r.items()} for r in json.loads(text)]
    else:
        raise ValueError(f"unknown format {format!r}")
    return ErrorStats([CellStats(**r) for r in records])
