"""Simulated measurement records with ensemble or single-shot noise."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ModelKind, SystemParams, ideal_signal


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model attached to a trace.

    ``kind`` is one of ``"none"``, ``"gaussian"`` (``level`` = sigma) or
    ``"projection"`` (``level`` = repetitions per point, Ne).
    """

    kind: str = "none"
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "projection"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and not self.level > 0:
            raise ValueError("gaussian noise needs sigma > 0")
        if self.kind == "projection":
            if self.level < 1 or int(self.level) != self.level:
                raise ValueError("projection noise needs an integer Ne >= 1")
            object.__setattr__(self, "level", int(self.level))

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseSpec":
        return cls("gaussian", float(sigma))

    @classmethod
    def projection(cls, ne: int) -> "NoiseSpec":
        return cls("projection", int(ne))

    @property
    def sigma(self) -> float:
        """Nominal per-point standard deviation (1/sqrt(Ne) for projection)."""
        if self.kind == "gaussian":
            return float(self.level)
        if self.kind == "projection":
            return 1.0 / math.sqrt(self.level)
        return 0.0

    def label(self) -> str:
        if self.kind == "none":
            return "none"
        return f"{self.kind}:{self.level!r}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "level": self.level}

    @classmethod
    def from_dict(cls, data: dict | None) -> "NoiseSpec":
        if not data:
            return cls()
        return cls(data.get("kind", "none"), data.get("level", 0.0))


@dataclass
class MeasurementTrace:
    times: np.ndarray
    values: np.ndarray
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int | None = None
    repeats: int = 1  # number of averaged acquisitions behind each value

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if self.times.size == 0:
            raise ValueError("empty trace")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "d"])
        for t, d in zip(self.times, self.values):
            writer.writerow([repr(float(t)), repr(float(d))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "MeasurementTrace":
        """Read a ``t,d`` CSV from a path or an open text stream."""
        if hasattr(source, "read"):
            text = source.read()
        else:
            text = Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["t", "d"]:
            raise ValueError("trace CSV must start with the header 't,d'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:] if a.strip()])
        if data.size == 0:
            raise ValueError("trace CSV has no samples")
        return cls(data[:, 0], data[:, 1])

    def to_json(self) -> str:
        return json.dumps({
            "times": [float(t) for t in self.times],
            "values": [float(v) for v in self.values],
            "noise": self.noise.to_dict(),
            "seed": None if self.seed is None else int(self.seed),
            "repeats": self.repeats,
        })

    @classmethod
    def from_json(cls, text: str) -> "MeasurementTrace":
        data = json.loads(text)
        return cls(np.array(data["times"], dtype=float), np.array(data["values"], dtype=float),
                   NoiseSpec.from_dict(data.get("noise")), data.get("seed"), int(data.get("repeats", 1)))


def gaussian_sigma_from_ensemble(ne: int) -> float:
    """Asymptotic ensemble noise scale ``sqrt(log log Ne / (2 Ne))``.

    Only meaningful for Ne >= 16, where ``log log Ne`` exceeds 1.
    """
    if ne < 16:
        raise ValueError(f"ensemble size must be >= 16, got {ne}")
    return math.sqrt(math.log(math.log(ne)) / (2.0 * ne))


def uniform_schedule(n_t: int = 100, T: float = 30.0) -> np.ndarray:
    """``n_t`` samples ``t_k = k T / n_t``, k = 0..n_t-1."""
    if n_t < 1 or T <= 0:
        raise ValueError("need n_t >= 1 and T > 0")
    return T / n_t * np.arange(n_t)


def projection_sample(p, ne: int, rng: np.random.Generator):
    """Fraction of ``ne`` single shots that land in the upper state.

    Each shot succeeds when a uniform draw is at or below ``(1 + p) / 2``;
    the count of successes is drawn directly from the equivalent binomial
    law. Accepts a scalar or an array of expectation values, each entry
    getting its own ``ne`` shots.
    """
    p = np.asarray(p, dtype=float)
    if np.any(np.abs(p) > 1 + 1e-12):
        raise ValueError("expectation values must lie in [-1, 1]")
    if ne < 1:
        raise ValueError("ne must be >= 1")
    threshold = np.clip(0.5 * (1.0 + p), 0.0, 1.0)
    frac = rng.binomial(int(ne), threshold) / ne
    return frac if p.ndim else float(frac)


def simulate_trace(params: SystemParams, kind: ModelKind | str, times, noise: NoiseSpec | None = None,
                   seed: int | np.random.Generator | None = 0) -> MeasurementTrace:
    """Sample the ideal signal at ``times`` and apply ``noise``.

    An integer ``seed`` initializes a PCG64 generator, so the same arguments
    always reproduce the same trace. A ``Generator`` is used as is (and
    advanced), for callers that draw many traces from one stream.
    """
    noise = noise or NoiseSpec()
    times = np.asarray(times, dtype=float)
    p = ideal_signal(params, kind, times)
    rng = np.random.default_rng(seed)
    if noise.kind == "gaussian":
        values = p + rng.normal(0.0, noise.level, size=p.shape)
    elif noise.kind == "projection":
        values = 2.0 * projection_sample(p, noise.level, rng) - 1.0
    else:
        values = p.copy()
    return MeasurementTrace(times, values, noise, seed if isinstance(seed, (int, np.integer)) else None)
