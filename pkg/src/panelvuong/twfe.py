"""Linear-model test: grouped time effects versus two-way fixed effects.

Model 1 gives every known unit group its own time path; model 2 is the
additive unit + time specification.  The squared-residual contrast is
recentred by a plug-in estimate of the incidental-parameter bias gap and
standardized by a hybrid variance estimator.

The bias and variance plug-ins enter in a small-sample form: per-unit second
moments are rescaled by the exact degrees-of-freedom factors of the two
projections (cells of size n_g for model 1; the n + T - 1 additive layout for
model 2, which is also why the model-2 weight uses T - 1), and the cross
moments carry the geometric mean of the two factors so every positivity
inequality survives rescaling.  Without these factors the statistic's mean is
off by several standard errors at realistic panel sizes because the raw
model-1 term multiplies each unit's variance by T / n_g.  The unscaled
moments are kept alongside for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GroupingViolation
from .estimation import GroupedTimeFit, TwfeFit, fit_grouped_time, fit_twfe
from .panel import GroupMap, PanelData, validate_panel
from .report import TestReport, decide

SATURATED_NOTE = ("every unit is its own group; the grouped-time model fits "
                  "each cell exactly and the large-group approximation does not apply")
SINGLETON_NOTE = ("singleton group(s) present: their cells are fit exactly and "
                  "contribute zero model-1 residual variance")


@dataclass
class TwfeTestComponents:
    """Residual moments and aggregates behind the grouped-time vs TWFE test."""

    resid_1: np.ndarray      # (n, T) grouped-time residuals
    resid_2: np.ndarray      # (n, T) two-way residuals
    sigma2_1: np.ndarray     # per-unit mean squared residuals, model 1
    sigma2_2: np.ndarray     # per-unit mean squared residuals, model 2
    sigma12: np.ndarray      # per-unit residual cross moments
    qlr: float               # uncorrected statistic
    bias: float              # estimated bias gap E[S]
    mqlr: float
    sigma2_nt: float
    sigma2_u: float          # dof-rescaled, as used in omega2
    sigma2_u_raw: float      # unscaled moments, for reference
    omega2: float
    n: int
    T: int
    g_1: int                 # model-1 group count

    def scalars(self) -> dict:
        return {
            "qlr": self.qlr,
            "bias": self.bias,
            "mqlr": self.mqlr,
            "sigma2_nt": self.sigma2_nt,
            "sigma2_u": self.sigma2_u,
            "sigma2_u_raw": self.sigma2_u_raw,
            "omega2": self.omega2,
            "n": self.n,
            "T": self.T,
            "groups_model1": self.g_1,
        }


def residuals(panel: PanelData, fit) -> np.ndarray:
    """Residual array of a grouped-time or two-way fit on its panel."""
    if not isinstance(fit, (GroupedTimeFit, TwfeFit)):
        raise TypeError(f"expected GroupedTimeFit or TwfeFit, got {type(fit).__name__}")
    if fit.residuals.shape != panel.y.shape:
        raise GroupingViolation(
            f"fit residuals {fit.residuals.shape} do not match panel ({panel.n}, {panel.T})")
    return fit.residuals


def qlr_twfe(resid_1: np.ndarray, resid_2: np.ndarray) -> float:
    """Scaled squared-residual contrast; positive favors model 1."""
    n, T = resid_1.shape
    return float((resid_2 ** 2 - resid_1 ** 2).sum() / (2.0 * np.sqrt(n * T)))


def dof_factors(gmap: GroupMap, n: int, T: int) -> tuple[np.ndarray, float]:
    """Per-unit model-1 factor n_g/(n_g - 1) and scalar model-2 factor.

    Singleton groups get factor 1: their cells are fit exactly, so the
    rescaled moment stays zero regardless.
    """
    sizes = gmap.sizes.astype(float)[gmap.codes]
    a = np.where(sizes > 1.0, sizes / np.maximum(sizes - 1.0, 1.0), 1.0)
    b = (n * T) / ((n - 1.0) * (T - 1.0))
    return a, float(b)


def bias_hat(sigma2_1: np.ndarray, sigma2_2: np.ndarray, gmap: GroupMap,
             T: int) -> float:
    """Plug-in bias gap between the two maximized likelihoods.

    Model 1 contributes T/n_g per unit variance; model 2 contributes one unit
    of variance per estimated effect, n + T - 1 of them in total, hence the
    1 + (T-1)/n weight.
    """
    n = gmap.n
    sizes = gmap.sizes.astype(float)[gmap.codes]
    bracket = (T / sizes) * sigma2_1 - (1.0 + (T - 1.0) / n) * sigma2_2
    return float(bracket.sum() / (2.0 * np.sqrt(n * T)))


def variance_components_twfe(resid_1: np.ndarray, resid_2: np.ndarray,
                             mqlr: float, gmap: GroupMap,
                             dof_corrected: bool = True) -> tuple[float, float]:
    """(sigma2_nt, sigma2_u): sample variance of the squared-residual
    contrast and the incidental-parameter variance term.

    sigma2_u is nonnegative for any input by the regrouped decomposition
    (see :func:`sigma2_u_regrouped`); sigma2_nt may be tiny-negative in
    pathological samples and is not clamped.
    """
    n, T = resid_1.shape
    d = resid_2 ** 2 - resid_1 ** 2
    sigma2_nt = float((d ** 2).sum() / (4.0 * n * T) - mqlr ** 2 / (n * T))
    v1, v2, v12 = unit_moments(resid_1, resid_2, gmap, dof_corrected)
    return sigma2_nt, sigma2_u_direct(v1, v2, v12, gmap, T)


def unit_moments(resid_1: np.ndarray, resid_2: np.ndarray, gmap: GroupMap,
                 dof_corrected: bool = True):
    """Per-unit (sigma2_1, sigma2_2, sigma12), optionally dof-rescaled."""
    n, T = resid_1.shape
    v1 = (resid_1 ** 2).mean(axis=1)
    v2 = (resid_2 ** 2).mean(axis=1)
    v12 = (resid_1 * resid_2).mean(axis=1)
    if dof_corrected:
        a, b = dof_factors(gmap, n, T)
        v1 = v1 * a
        v2 = v2 * b
        v12 = v12 * np.sqrt(a * b)
    return v1, v2, v12


def _group_sums(v1, v2, v12, gmap: GroupMap):
    if np.asarray(v1).shape != (gmap.n,):
        raise GroupingViolation(f"per-unit array has shape {np.asarray(v1).shape}, "
                                f"expected ({gmap.n},)")
    s1 = np.bincount(gmap.codes, weights=v1, minlength=gmap.G)
    s2 = np.bincount(gmap.codes, weights=v2, minlength=gmap.G)
    s12 = np.bincount(gmap.codes, weights=v12, minlength=gmap.G)
    return s1, s2, s12


def sigma2_u_direct(v1: np.ndarray, v2: np.ndarray, v12: np.ndarray,
                    gmap: GroupMap, T: int) -> float:
    """Incidental-parameter variance term, term by term as displayed."""
    n = gmap.n
    sizes = gmap.sizes.astype(float)
    s1, s2, s12 = _group_sums(v1, v2, v12, gmap)
    return float(
        (np.asarray(v2) ** 2).sum() / (2.0 * n * T)
        + (s1 ** 2 / sizes ** 2).sum() / (2.0 * n)
        + s2.sum() ** 2 / (2.0 * n ** 3)
        - (s12 ** 2 / sizes).sum() / n ** 2
    )


def sigma2_u_regrouped(v1: np.ndarray, v2: np.ndarray, v12: np.ndarray,
                       gmap: GroupMap, T: int) -> float:
    """Algebraically equal form exposing nonnegativity.

    Splits the square of the model-2 total into cross-group products plus
    per-group squares, then completes each group's square; both remaining
    brackets are nonnegative by Cauchy-Schwarz, so the whole expression is.
    """
    n = gmap.n
    sizes = gmap.sizes.astype(float)
    s1, s2, s12 = _group_sums(v1, v2, v12, gmap)
    cross_pairs = (s2.sum() ** 2 - (s2 ** 2).sum()) / 2.0
    bracket = (s1 / sizes - s2 / n) ** 2 + 2.0 * (s1 * s2 - s12 ** 2) / (sizes * n)
    return float(
        (np.asarray(v2) ** 2).sum() / (2.0 * n * T)
        + cross_pairs / n ** 3
        + bracket.sum() / (2.0 * n)
    )


def run_twfe_test(panel: PanelData, gmap: GroupMap,
                  level: float = 0.05) -> TestReport:
    """Fit both linear models and run the comparison at the given level."""
    panel = validate_panel(panel)
    if gmap.n != panel.n:
        raise GroupingViolation(f"group map covers {gmap.n} units, panel has {panel.n}")
    fit_1 = fit_grouped_time(panel, gmap)
    fit_2 = fit_twfe(panel)
    comp = twfe_components(panel, fit_1, fit_2, gmap)

    warnings = []
    if gmap.G == panel.n:
        warnings.append(SATURATED_NOTE)
    elif np.any(gmap.sizes == 1):
        warnings.append(SINGLETON_NOTE)
    return decide("twfe", comp.mqlr, comp.omega2, level, comp, warnings)


def twfe_components(panel: PanelData, fit_1: GroupedTimeFit, fit_2: TwfeFit,
                    gmap: GroupMap) -> TwfeTestComponents:
    n, T = panel.n, panel.T
    e1 = residuals(panel, fit_1)
    e2 = residuals(panel, fit_2)
    qlr = qlr_twfe(e1, e2)

    raw1, raw2, raw12 = unit_moments(e1, e2, gmap, dof_corrected=False)
    c1, c2, _ = unit_moments(e1, e2, gmap, dof_corrected=True)
    bias = bias_hat(c1, c2, gmap, T)
    mqlr = qlr - bias
    sigma2_nt, sigma2_u = variance_components_twfe(e1, e2, mqlr, gmap, dof_corrected=True)
    sigma2_u_raw = sigma2_u_direct(raw1, raw2, raw12, gmap, T)
    omega2 = omega2_twfe(sigma2_nt, sigma2_u)

    return TwfeTestComponents(
        resid_1=e1, resid_2=e2,
        sigma2_1=raw1, sigma2_2=raw2, sigma12=raw12,
        qlr=qlr, bias=bias, mqlr=mqlr,
        sigma2_nt=sigma2_nt, sigma2_u=sigma2_u, sigma2_u_raw=sigma2_u_raw,
        omega2=omega2, n=n, T=T, g_1=gmap.G,
    )


def omega2_twfe(sigma2_nt: float, sigma2_u: float) -> float:
    """Hybrid variance: max of the corrected sample variance and sigma2_u.

    The correction here subtracts sigma2_u (the sample variance of the
    squared-residual contrast double-counts it); this differs from the
    classic construction, which has a separate third term.
    """
    return max(sigma2_nt - sigma2_u, sigma2_u)
