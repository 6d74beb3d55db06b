"""Per-observation quasi-log-likelihood families.

A family bundles the log density ``psi`` and its analytic derivatives in the
scalar group effect (first and second order) plus the gradient in the common
parameters.  All callables are vectorized: ``y`` and ``gamma`` broadcast,
``x`` carries a trailing covariate axis, and ``psi_theta`` returns a trailing
axis of length ``d_theta``.  Custom families register by constructing the
dataclass; there is no automatic differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .panel import PanelData


@dataclass(frozen=True)
class LikelihoodFamily:
    name: str
    d_theta: int
    psi: Callable                    # (y, x, theta, gamma) -> array like y
    psi_theta: Callable              # -> array shaped y.shape + (d_theta,)
    psi_gamma: Callable              # -> array like y
    psi_gammagamma: Callable         # -> array like y
    init_theta: Callable | None = field(default=None, compare=False)
    # working residual y - x'beta used to seed cell effects; defaults to y
    working_residual: Callable | None = field(default=None, compare=False)


def eval_psi(family: LikelihoodFamily, y, x, theta, gamma):
    """Evaluate psi, raising DomainError outside the family's domain."""
    return family.psi(np.asarray(y, float), np.asarray(x, float),
                      np.asarray(theta, float), np.asarray(gamma, float))


def eval_derivatives(family: LikelihoodFamily, y, x, theta, gamma):
    """Analytic (psi_theta, psi_gamma, psi_gammagamma) at one parameter point."""
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    theta = np.asarray(theta, float)
    gamma = np.asarray(gamma, float)
    return (family.psi_theta(y, x, theta, gamma),
            family.psi_gamma(y, x, theta, gamma),
            family.psi_gammagamma(y, x, theta, gamma))


def gaussian_fixed_scale(n_covariates: int) -> LikelihoodFamily:
    """psi = -(y - x'theta - gamma)^2 / 2; unit scale."""
    K = int(n_covariates)

    def resid(y, x, theta, gamma):
        return y - (x @ theta if K else 0.0) - gamma

    def psi(y, x, theta, gamma):
        return -0.5 * resid(y, x, theta, gamma) ** 2

    def psi_theta(y, x, theta, gamma):
        return x * resid(y, x, theta, gamma)[..., None]

    def psi_gamma(y, x, theta, gamma):
        return resid(y, x, theta, gamma)

    def psi_gammagamma(y, x, theta, gamma):
        return np.full(np.shape(y), -1.0)

    def init_theta(panel: PanelData) -> np.ndarray:
        return _pooled_ols(panel)

    def working_residual(y, x, theta):
        return y - (x @ theta if K else 0.0)

    return LikelihoodFamily("gaussian-fixed-scale", K, psi, psi_theta,
                            psi_gamma, psi_gammagamma, init_theta, working_residual)


def gaussian_full_scale(n_covariates: int) -> LikelihoodFamily:
    """psi = -log(s2)/2 - (y - x'beta - gamma)^2 / (2 s2), theta = (beta, s2)."""
    K = int(n_covariates)

    def split(theta):
        s2 = float(theta[-1])
        if s2 <= 0.0:
            raise DomainError(f"scale must be positive, got sigma^2 = {s2}")
        return theta[:-1], s2

    def resid(y, x, beta, gamma):
        return y - (x @ beta if K else 0.0) - gamma

    def psi(y, x, theta, gamma):
        beta, s2 = split(theta)
        return -0.5 * np.log(s2) - resid(y, x, beta, gamma) ** 2 / (2.0 * s2)

    def psi_theta(y, x, theta, gamma):
        beta, s2 = split(theta)
        r = resid(y, x, beta, gamma)
        out = np.empty(np.shape(y) + (K + 1,))
        if K:
            out[..., :K] = x * (r / s2)[..., None]
        out[..., K] = -0.5 / s2 + r ** 2 / (2.0 * s2 ** 2)
        return out

    def psi_gamma(y, x, theta, gamma):
        beta, s2 = split(theta)
        return resid(y, x, beta, gamma) / s2

    def psi_gammagamma(y, x, theta, gamma):
        _, s2 = split(theta)
        return np.full(np.shape(y), -1.0 / s2)

    def init_theta(panel: PanelData) -> np.ndarray:
        beta = _pooled_ols(panel)
        r = panel.y - (panel.x @ beta if panel.K else 0.0)
        r = r - r.mean()
        return np.append(beta, max(float(np.mean(r ** 2)), 1e-8))

    def working_residual(y, x, theta):
        beta, _ = split(theta)
        return y - (x @ beta if K else 0.0)

    return LikelihoodFamily("gaussian-full-scale", K + 1, psi, psi_theta,
                            psi_gamma, psi_gammagamma, init_theta, working_residual)


def _pooled_ols(panel: PanelData) -> np.ndarray:
    if panel.K == 0:
        return np.zeros(0)
    X = panel.x.reshape(-1, panel.K)
    Xc = X - X.mean(axis=0)
    yc = panel.y.reshape(-1) - panel.y.mean()
    beta, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    return beta


def check_derivatives(family: LikelihoodFamily, points, h: float = 1e-5) -> float:
    """Max relative gap between analytic derivatives and finite differences.

    ``psi_theta`` and ``psi_gamma`` are checked against central differences of
    ``psi``; ``psi_gammagamma`` against central differences of ``psi_gamma``
    (second differences of psi would drown in rounding at this step size).
    Gaps are relative to max(1, |finite difference|), the finite difference
    being the independent reference.

    Parameters
    ----------
    points : iterable of (y, x, theta, gamma)
        Evaluation points inside the family's domain.
    h : float
        Central-difference step.
    """
    worst = 0.0
    for y, x, theta, gamma in points:
        y = float(y)
        x = np.asarray(x, float)
        theta = np.asarray(theta, float)
        gamma = float(gamma)

        an_t, an_g, an_gg = eval_derivatives(family, y, x, theta, gamma)

        fd_g = (eval_psi(family, y, x, theta, gamma + h)
                - eval_psi(family, y, x, theta, gamma - h)) / (2.0 * h)
        worst = max(worst, abs(fd_g - float(an_g)) / max(1.0, abs(fd_g)))

        fd_gg = (float(family.psi_gamma(y, x, theta, gamma + h))
                 - float(family.psi_gamma(y, x, theta, gamma - h))) / (2.0 * h)
        worst = max(worst, abs(fd_gg - float(an_gg)) / max(1.0, abs(fd_gg)))

        for k in range(family.d_theta):
            step = np.zeros_like(theta)
            step[k] = h
            fd_t = (eval_psi(family, y, x, theta + step, gamma)
                    - eval_psi(family, y, x, theta - step, gamma)) / (2.0 * h)
            an_tk = float(np.asarray(an_t)[..., k])
            worst = max(worst, abs(fd_t - an_tk) / max(1.0, abs(fd_t)))
    return worst
