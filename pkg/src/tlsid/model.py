"""Closed-form measurement signals for dephasing two-level systems.

Two physical situations are covered:

* ``ModelKind.FID`` -- dephasing in the Hamiltonian basis (free-induction
  decay), ``p(t) = exp(-gamma t) cos(omega t) sin(theta_I) sin(theta_M)
  + cos(theta_I) cos(theta_M)``.
* ``ModelKind.RABI`` -- resonant drive ``H = (Omega / 2) sigma_x`` (Bloch
  vector rotating at rate Omega) with dephasing ``V = sqrt(gamma / 2)
  sigma_z``; ``omega`` then holds the Rabi frequency.

All quantities are dimensionless: rates in units of a reference frequency,
times in its inverse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# |omega_hat^2| below this switches phi_x3 to the critically damped limit
BRANCH_TOL = 1e-10


class ModelKind(str, enum.Enum):
    FID = "fid"
    RABI = "rabi"

    @classmethod
    def parse(cls, value: "ModelKind | str") -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown model kind {value!r}; expected 'fid' or 'rabi'") from None


@dataclass(frozen=True)
class SystemParams:
    """Ground-truth system parameters.

    ``omega`` is the precession frequency for FID models and the Rabi
    frequency for driven models.
    """

    omega: float
    gamma: float
    theta_I: float = np.pi / 2
    theta_M: float = np.pi / 2

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        for name in ("theta_I", "theta_M"):
            theta = getattr(self, name)
            if not -1e-12 <= theta <= np.pi + 1e-12:
                raise ValueError(f"{name} must lie in [0, pi], got {theta}")

    def to_dict(self) -> dict:
        return {"omega": self.omega, "gamma": self.gamma,
                "theta_I": self.theta_I, "theta_M": self.theta_M}

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        return cls(float(data["omega"]), float(data["gamma"]),
                   float(data.get("theta_I", np.pi / 2)),
                   float(data.get("theta_M", np.pi / 2)))


# (omega, gamma) of the ten benchmark systems
MODEL_TABLE: tuple[tuple[float, float], ...] = (
    (1.0000, 0.1000),
    (0.9000, 0.1000),
    (0.5003, 0.1243),
    (0.7304, 0.1875),
    (1.2161, 0.2031),
    (1.6211, 0.0993),
    (0.2218, 0.1234),
    (1.5195, 0.0751),
    (0.7551, 0.0533),
    (0.8029, 0.1921),
)


def builtin_models() -> tuple[tuple[float, float], ...]:
    """Return the ten (omega, gamma) benchmark pairs, model 1 first."""
    return MODEL_TABLE


def benchmark_params(index: int, kind: ModelKind | str = ModelKind.FID,
                     theta_I: float | None = None,
                     theta_M: float | None = None) -> SystemParams:
    """SystemParams for 1-based benchmark model ``index``.

    Default angles give maximal visibility: pi/2 for FID, 0 for Rabi.
    """
    if not 1 <= index <= len(MODEL_TABLE):
        raise ValueError(f"model index must be in 1..{len(MODEL_TABLE)}, got {index}")
    kind = ModelKind.parse(kind)
    default = np.pi / 2 if kind is ModelKind.FID else 0.0
    omega, gamma = MODEL_TABLE[index - 1]
    return SystemParams(omega, gamma,
                        default if theta_I is None else theta_I,
                        default if theta_M is None else theta_M)


def phi_x3(Omega: float, gamma: float, t):
    """Driven-dephasing population term.

    ``exp(-gamma t / 2) [cos(w t) + gamma / (2 w) sin(w t)]`` with
    ``w = sqrt(Omega^2 - gamma^2 / 4)``, continued to cosh/sinh when ``w`` is
    imaginary and to ``1 + gamma t / 2`` at the critical point.
    """
    t = np.asarray(t, dtype=float)
    w2 = Omega * Omega - 0.25 * gamma * gamma
    envelope = np.exp(-0.5 * gamma * t)
    if w2 > BRANCH_TOL:
        w = np.sqrt(w2)
        return envelope * (np.cos(w * t) + 0.5 * gamma * np.sin(w * t) / w)
    if w2 < -BRANCH_TOL:
        w = np.sqrt(-w2)
        # cosh/sinh overflow-safe form: exp(-gamma t/2) cosh(w t) with w < gamma/2
        ep = np.exp((w - 0.5 * gamma) * t)
        em = np.exp(-(w + 0.5 * gamma) * t)
        return 0.5 * (ep + em) + 0.25 * gamma / w * (ep - em)
    return envelope * (1.0 + 0.5 * gamma * t)


def basis_functions(kind: ModelKind | str, omega: float, gamma: float):
    """Return the pair ``(g1, g2)`` spanning the model's measurement signals."""
    kind = ModelKind.parse(kind)
    if kind is ModelKind.FID:
        def g1(t):
            return np.ones_like(np.asarray(t, dtype=float))

        def g2(t):
            t = np.asarray(t, dtype=float)
            return np.exp(-gamma * t) * np.cos(omega * t)
    else:
        def g1(t):
            return np.exp(-gamma * np.asarray(t, dtype=float))

        def g2(t):
            return phi_x3(omega, gamma, t)
    return g1, g2


def basis_matrix(kind: ModelKind | str, omega: float, gamma: float, times) -> np.ndarray:
    """2 x N_t matrix ``G[m, n] = g_m(t_n)``."""
    g1, g2 = basis_functions(kind, omega, gamma)
    return np.vstack([g1(times), g2(times)])


def amplitudes(params: SystemParams, kind: ModelKind | str) -> tuple[float, float]:
    """Basis coefficients ``(alpha1, alpha2)`` implied by the angles."""
    kind = ModelKind.parse(kind)
    ci, cm = np.cos(params.theta_I), np.cos(params.theta_M)
    si, sm = np.sin(params.theta_I), np.sin(params.theta_M)
    if kind is ModelKind.FID:
        return ci * cm, si * sm
    return si * sm, ci * cm


def ideal_signal(params: SystemParams, kind: ModelKind | str, t):
    """Noise-free expectation value of the measured observable at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("sample times must be non-negative")
    a1, a2 = amplitudes(params, kind)
    g1, g2 = basis_functions(kind, params.omega, params.gamma)
    return a1 * g1(t) + a2 * g2(t)
