"""Fisher information for (omega, gamma) and the Cramer-Rao gap of an estimator.

The model is the pure damped cosine ``p(t) = exp(-gamma t) cos(omega t)``
observed with i.i.d. Gaussian noise of known scale ``sigma``, for which
``I_ij = sigma^-2 sum_n dp/dtheta_i(t_n) dp/dtheta_j(t_n)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import SystemParams


@dataclass
class FisherMatrix:
    I11: float
    I12: float
    I22: float
    sigma: float
    times: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.I11, self.I12], [self.I12, self.I22]])

    def inverse(self) -> np.ndarray:
        M = self.matrix
        if abs(np.linalg.det(M)) <= 1e-14 * max(np.abs(M).max() ** 2, 1e-300):
            raise np.linalg.LinAlgError("Fisher matrix is singular")
        return np.linalg.inv(M)


@dataclass
class CrbGap:
    covariance: np.ndarray
    inv_fisher: np.ndarray
    min_eig: float
    n_estimates: int = 0

    @property
    def gap(self) -> np.ndarray:
        return self.covariance - self.inv_fisher

    def to_dict(self) -> dict:
        return {
            "covariance": self.covariance.tolist(),
            "inv_fisher": self.inv_fisher.tolist(),
            "min_eig": float(self.min_eig),
            "n_estimates": int(self.n_estimates),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def signal_derivatives(omega: float, gamma: float, times) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of ``exp(-gamma t) cos(omega t)`` w.r.t. omega and gamma."""
    t = np.asarray(times, dtype=float)
    envelope = t * np.exp(-gamma * t)
    return -envelope * np.sin(omega * t), -envelope * np.cos(omega * t)


def fisher_matrix(params: SystemParams, times, sigma: float) -> FisherMatrix:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("empty schedule")
    dw, dg = signal_derivatives(params.omega, params.gamma, times)
    s2 = sigma ** -2
    return FisherMatrix(s2 * float(dw @ dw), s2 * float(dw @ dg), s2 * float(dg @ dg), sigma, times)


def projection_fisher_matrix(params: SystemParams, times, ne: int) -> FisherMatrix:
    """Fisher information of binomial single-shot data averaged over ``ne`` shots.

    Each point ``d_n = 2 N1 / ne - 1`` has variance ``(1 - p_n^2) / ne``, so
    the Gaussian form is weighted point by point. Points with ``|p_n| = 1``
    carry no information and are dropped. ``sigma`` is reported as
    ``ne ** -0.5``.
    """
    if ne < 1:
        raise ValueError("ne must be >= 1")
    t = np.asarray(times, dtype=float)
    p = np.exp(-params.gamma * t) * np.cos(params.omega * t)
    var = 1.0 - p * p
    informative = var > 1e-12
    weight = np.zeros_like(var)
    weight[informative] = ne / var[informative]
    dw, dg = signal_derivatives(params.omega, params.gamma, t)
    return FisherMatrix(float(weight @ (dw * dw)), float(weight @ (dw * dg)),
                        float(weight @ (dg * dg)), ne ** -0.5, t)


def crb_gap(estimates, fisher: FisherMatrix) -> CrbGap:
    """Compare the sample covariance of ``(omega, gamma)`` estimates with ``I^-1``.

    A non-negative ``min_eig`` means the estimator respects the bound; values
    near zero mean it is close to efficient.
    """
    est = np.asarray(estimates, dtype=float)
    if est.ndim != 2 or est.shape[1] != 2:
        raise ValueError("estimates must be an (n, 2) array")
    if est.shape[0] < 30:
        raise ValueError("need at least 30 estimates for a covariance")
    cov = np.cov(est, rowvar=False, ddof=1)
    inv = fisher.inverse()
    C = cov - inv
    min_eig = float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])
    return CrbGap(cov, inv, min_eig, est.shape[0])
