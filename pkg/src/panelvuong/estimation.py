"""Grouped-panel estimators.

Closed-form least-squares fits for the linear model families (cell effects,
group-by-time effects, additive two-way effects) and a generic profile-Newton
quasi-MLE that maximizes any registered likelihood family subject to a known
group structure.  All fits return exact first-order conditions up to the
stated tolerances and cache the per-observation scores and per-cell curvature
needed by the model-comparison tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoConvergence, RankDeficient, SingularInformation
from .families import LikelihoodFamily, gaussian_fixed_scale
from .panel import GroupMap, PanelData, TimeGroupMap, single_block, validate_panel

COND_LIMIT = 1e12
EIG_FLOOR = 1e-12
INFO_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """A likelihood family plus the known unit/time group structure."""

    family: LikelihoodFamily
    gmap: GroupMap
    mmap: TimeGroupMap | None = None   # defaults to a single block (M = 1)

    def time_map(self, T: int) -> TimeGroupMap:
        return self.mmap if self.mmap is not None else single_block(T)


@dataclass
class FitResult:
    """Maximized grouped quasi-likelihood with cached score/curvature."""

    theta: np.ndarray          # (d_theta,)
    gamma: np.ndarray          # (G, M) cell effects
    loglik: float
    loglik_obs: np.ndarray     # (n, T) psi at the optimum
    score_gamma: np.ndarray    # (n, T) psi_gamma at the optimum
    info_gamma: np.ndarray     # (G, M) cell averages of psi_gammagamma
    converged: bool
    iterations: int
    spec: ModelSpec


@dataclass
class TwfeFit:
    """Additive two-way fixed effects fit with sum-zero time effects."""

    theta: np.ndarray          # (K,)
    alpha: np.ndarray          # (n,) unit effects
    delta: np.ndarray          # (T,) time effects, sum exactly zero
    residuals: np.ndarray      # (n, T)


@dataclass
class GroupedTimeFit:
    """Separate time path per known unit group."""

    theta: np.ndarray          # (K,)
    gamma_gt: np.ndarray       # (G, T)
    residuals: np.ndarray      # (n, T)
    gmap: GroupMap


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve an SPD normalized Gram system with rank diagnostics."""
    eig = np.linalg.eigvalsh(gram)
    lo, hi = float(eig[0]), float(eig[-1])
    if lo < EIG_FLOOR or hi / max(lo, 1e-300) > COND_LIMIT:
        raise RankDeficient(
            f"demeaned Gram matrix is rank deficient (eigenvalues in [{lo:.3e}, {hi:.3e}])")
    c = np.linalg.cholesky(gram)
    return np.linalg.solve(c.T, np.linalg.solve(c, rhs))


def _group_indicator(gmap: GroupMap) -> np.ndarray:
    return (gmap.codes[None, :] == np.arange(gmap.G)[:, None]).astype(float)


def fit_linear_cells(panel: PanelData, gmap: GroupMap,
                     mmap: TimeGroupMap | None = None) -> FitResult:
    """Exact least squares with one effect per (group, block) cell.

    Minimizes sum (y - x'theta - gamma_{g(i),m(t)})^2 by within-cell
    demeaning; the first-order conditions hold by linear algebra rather than
    iteration.  The returned log-likelihood is the unit-scale Gaussian one.
    """
    panel = validate_panel(panel)
    n, T, K = panel.n, panel.T, panel.K
    mmap = mmap if mmap is not None else single_block(T)
    if gmap.n != n or mmap.T != T:
        raise RankDeficient(f"group maps cover ({gmap.n}, {mmap.T}), panel is ({n}, {T})")

    cell = (gmap.codes[:, None] * mmap.M + mmap.codes[None, :])
    ncell = gmap.G * mmap.M
    counts = np.bincount(cell.ravel(), minlength=ncell).astype(float)

    def cell_mean(a: np.ndarray) -> np.ndarray:
        return np.bincount(cell.ravel(), weights=a.ravel(), minlength=ncell) / counts

    if K:
        xm = np.stack([cell_mean(panel.x[:, :, k]) for k in range(K)], axis=1)  # (ncell, K)
        xdot = panel.x - xm[cell]
        gram = np.einsum("itk,itl->kl", xdot, xdot) / (n * T)
        rhs = np.einsum("itk,it->k", xdot, panel.y) / (n * T)
        theta = _solve_gram(gram, rhs)
        work = panel.y - panel.x @ theta
    else:
        theta = np.zeros(0)
        work = panel.y

    gamma_flat = cell_mean(work)
    resid = work - gamma_flat[cell]
    loglik_obs = -0.5 * resid ** 2
    return FitResult(
        theta=theta,
        gamma=gamma_flat.reshape(gmap.G, mmap.M),
        loglik=float(loglik_obs.sum()),
        loglik_obs=loglik_obs,
        score_gamma=resid,
        info_gamma=np.full((gmap.G, mmap.M), -1.0),
        converged=True,
        iterations=0,
        spec=ModelSpec(gaussian_fixed_scale(K), gmap, mmap),
    )


def fit_grouped_time(panel: PanelData, gmap: GroupMap) -> GroupedTimeFit:
    """Group-by-time effects: theta from within-(g, t) demeaning, effects as
    cell means of the working residual."""
    panel = validate_panel(panel)
    n, T, K = panel.n, panel.T, panel.K
    Z = _group_indicator(gmap)
    sizes = gmap.sizes.astype(float)

    ybar_gt = (Z @ panel.y) / sizes[:, None]                       # (G, T)
    if K:
        xbar_gt = np.einsum("gi,itk->gtk", Z, panel.x) / sizes[:, None, None]
        xdot = panel.x - xbar_gt[gmap.codes]
        gram = np.einsum("itk,itl->kl", xdot, xdot) / (n * T)
        rhs = np.einsum("itk,it->k", xdot, panel.y) / (n * T)
        theta = _solve_gram(gram, rhs)
        gamma_gt = ybar_gt - xbar_gt @ theta
        resid = panel.y - panel.x @ theta - gamma_gt[gmap.codes]
    else:
        theta = np.zeros(0)
        gamma_gt = ybar_gt
        resid = panel.y - gamma_gt[gmap.codes]
    return GroupedTimeFit(theta=theta, gamma_gt=gamma_gt, residuals=resid, gmap=gmap)


def fit_twfe(panel: PanelData) -> TwfeFit:
    """Additive unit + time effects with the time effects summing to zero."""
    panel = validate_panel(panel)
    n, T, K = panel.n, panel.T, panel.K
    y = panel.y
    ybar_i = y.mean(axis=1)
    ybar_t = y.mean(axis=0)
    ybar = y.mean()

    if K:
        xbar_i = panel.x.mean(axis=1)                  # (n, K)
        xbar_t = panel.x.mean(axis=0)                  # (T, K)
        xbar = panel.x.mean(axis=(0, 1))               # (K,)
        xddot = panel.x - xbar_i[:, None, :] - xbar_t[None, :, :] + xbar
        gram = np.einsum("itk,itl->kl", xddot, xddot) / (n * T)
        rhs = np.einsum("itk,it->k", xddot, y) / (n * T)
        theta = _solve_gram(gram, rhs)
        alpha = ybar_i - xbar_i @ theta
        delta = (ybar_t - ybar) - (xbar_t - xbar) @ theta
        resid = y - panel.x @ theta - alpha[:, None] - delta[None, :]
    else:
        theta = np.zeros(0)
        alpha = ybar_i
        delta = ybar_t - ybar
        resid = y - alpha[:, None] - delta[None, :]
    delta = delta - delta.mean()   # enforce the sum-zero normalization exactly
    return TwfeFit(theta=theta, alpha=alpha, delta=delta, residuals=resid)


class _CellView:
    """Row/column slices of one (group, block) cell."""

    __slots__ = ("rows", "cols", "size")

    def __init__(self, rows: np.ndarray, cols: np.ndarray):
        self.rows = rows
        self.cols = cols
        self.size = rows.size * cols.size


def fit_profile_mle(panel: PanelData, spec: ModelSpec, tol: float = 1e-10,
                    max_iter: int = 100, inner_tol: float = 1e-12,
                    max_halvings: int = 30) -> FitResult:
    """Profile-Newton quasi-MLE for an arbitrary likelihood family.

    For each candidate theta the scalar effect of every (group, block) cell
    solves its own first-order condition by safeguarded Newton; theta is then
    updated by Newton on the profiled score with step halving, the Jacobian
    taken by central differences of the profiled score.

    Parameters
    ----------
    tol : float
        Infinity-norm bound on the theta score and on every cell score.
    max_iter : int
        Outer Newton iteration limit.
    inner_tol : float
        Absolute bound for each cell's scalar first-order condition.
    max_halvings : int
        Step-halving budget per Newton update (also guards the family's
        parameter domain, e.g. a positive-scale boundary).

    Raises
    ------
    SingularInformation
        If a cell's average curvature falls below ``1e-12`` in magnitude.
    NoConvergence
        If the iteration budget ends with first-order conditions above
        ``tol``.
    """
    panel = validate_panel(panel)
    n, T = panel.n, panel.T
    family = spec.family
    gmap = spec.gmap
    mmap = spec.time_map(T)
    if gmap.n != n or mmap.T != T:
        raise RankDeficient(f"group maps cover ({gmap.n}, {mmap.T}), panel is ({n}, {T})")

    cells = [[_CellView(gmap.members(g), np.where(mmap.codes == m)[0])
              for m in range(mmap.M)] for g in range(gmap.G)]

    if family.init_theta is not None:
        theta = np.asarray(family.init_theta(panel), dtype=float)
    else:
        theta = np.zeros(family.d_theta)
    if theta.shape != (family.d_theta,):
        raise DomainError(f"init_theta returned shape {theta.shape}, expected ({family.d_theta},)")

    def cell_arrays(cv: _CellView):
        return panel.y[np.ix_(cv.rows, cv.cols)], panel.x[np.ix_(cv.rows, cv.cols)]

    def init_gamma(th: np.ndarray) -> np.ndarray:
        g0 = np.zeros((gmap.G, mmap.M))
        if family.working_residual is None:
            return g0
        work = family.working_residual(panel.y, panel.x, th)
        for g in range(gmap.G):
            for m in range(mmap.M):
                cv = cells[g][m]
                g0[g, m] = work[np.ix_(cv.rows, cv.cols)].mean()
        return g0

    def solve_cell(yc, xc, th, gam0, size) -> float:
        eps = np.finfo(float).eps
        gam = float(gam0)
        scores = family.psi_gamma(yc, xc, th, gam)
        s = float(scores.sum())
        for _ in range(100):
            # a summed score cannot cancel below its own rounding floor
            floor = max(inner_tol, 8.0 * eps * float(np.abs(scores).sum()))
            if abs(s) <= floor:
                return gam
            h = float(family.psi_gammagamma(yc, xc, th, gam).sum())
            if abs(h) / size < INFO_FLOOR:
                raise SingularInformation(
                    f"cell curvature {h / size:.3e} below tolerance while profiling")
            step = -s / h
            if abs(step) <= 4.0 * eps * max(1.0, abs(gam)):
                return gam   # update below the float spacing of the effect
            lam = 1.0
            for _ in range(max_halvings):
                try:
                    scores_new = family.psi_gamma(yc, xc, th, gam + lam * step)
                except DomainError:
                    lam *= 0.5
                    continue
                s_new = float(scores_new.sum())
                if abs(s_new) < abs(s) or abs(s_new) <= floor:
                    gam += lam * step
                    scores, s = scores_new, s_new
                    break
                lam *= 0.5
            else:
                raise NoConvergence(f"cell effect stalled with score {s:.3e}")
        raise NoConvergence(f"cell effect did not reach tolerance, score {s:.3e}")

    def profile(th: np.ndarray, gam_start: np.ndarray) -> np.ndarray:
        gam = np.empty_like(gam_start)
        for g in range(gmap.G):
            for m in range(mmap.M):
                cv = cells[g][m]
                yc, xc = cell_arrays(cv)
                gam[g, m] = solve_cell(yc, xc, th, gam_start[g, m], cv.size)
        return gam

    def gamma_field(gam: np.ndarray) -> np.ndarray:
        return gam[gmap.codes[:, None], mmap.codes[None, :]]

    def theta_score(th: np.ndarray, gam: np.ndarray) -> np.ndarray:
        if family.d_theta == 0:
            return np.zeros(0)
        st = family.psi_theta(panel.y, panel.x, th, gamma_field(gam))
        return st.reshape(-1, family.d_theta).sum(axis=0)

    def theta_tol(th: np.ndarray, gam: np.ndarray) -> float:
        st = family.psi_theta(panel.y, panel.x, th, gamma_field(gam))
        floor = 8.0 * np.finfo(float).eps * float(
            np.abs(st.reshape(-1, family.d_theta)).sum(axis=0).max())
        return max(tol, floor)

    gamma = profile(theta, init_gamma(theta))
    score = theta_score(theta, gamma)
    iterations = 0
    theta_scale = float(np.max(np.abs(theta))) if theta.size else 0.0

    if family.d_theta:
        for iterations in range(1, max_iter + 1):
            if np.max(np.abs(score)) <= theta_tol(theta, gamma):
                break
            jac = np.empty((family.d_theta, family.d_theta))
            for k in range(family.d_theta):
                h = 1e-6 * max(1.0, abs(theta[k]))
                dk = np.zeros_like(theta)
                dk[k] = h
                sp = theta_score(theta + dk, profile(theta + dk, gamma))
                sm = theta_score(theta - dk, profile(theta - dk, gamma))
                jac[:, k] = (sp - sm) / (2.0 * h)
            try:
                step = np.linalg.solve(jac, -score)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(jac, -score, rcond=None)

            lam = 1.0
            for _ in range(max_halvings):
                try:
                    theta_new = theta + lam * step
                    gamma_new = profile(theta_new, gamma)
                    score_new = theta_score(theta_new, gamma_new)
                except DomainError:
                    lam *= 0.5
                    continue
                if np.max(np.abs(score_new)) < np.max(np.abs(score)) \
                        or np.max(np.abs(score_new)) <= tol:
                    theta, gamma, score = theta_new, gamma_new, score_new
                    break
                lam *= 0.5
            else:
                raise NoConvergence(
                    f"no improving step after {max_halvings} halvings, "
                    f"score norm {np.max(np.abs(score)):.3e}")
            # monotone escape toward a score root at infinity means the
            # objective is flat or unbounded in some direction (e.g. the
            # scale of an exactly-fit panel)
            if np.max(np.abs(theta)) > 1e10 * max(1.0, theta_scale):
                raise SingularInformation(
                    f"parameters diverging (|theta| = {np.max(np.abs(theta)):.3e}); "
                    f"likelihood appears degenerate")
        else:
            raise NoConvergence(f"outer iteration limit {max_iter} reached")
        if np.max(np.abs(score)) > theta_tol(theta, gamma):
            raise NoConvergence(f"theta score norm {np.max(np.abs(score)):.3e} above {tol}")

    gfield = gamma_field(gamma)
    loglik_obs = family.psi(panel.y, panel.x, theta, gfield)
    score_gamma = family.psi_gamma(panel.y, panel.x, theta, gfield)
    info_obs = family.psi_gammagamma(panel.y, panel.x, theta, gfield)
    info = np.empty((gmap.G, mmap.M))
    eps = np.finfo(float).eps
    for g in range(gmap.G):
        for m in range(mmap.M):
            cv = cells[g][m]
            info[g, m] = info_obs[np.ix_(cv.rows, cv.cols)].mean()
            if info[g, m] >= -INFO_FLOOR:
                raise SingularInformation(
                    f"cell ({g + 1}, {m + 1}) curvature {info[g, m]:.3e} not negative")
            cell_scores = score_gamma[np.ix_(cv.rows, cv.cols)]
            floor = max(tol, 8.0 * eps * float(np.abs(cell_scores).sum()),
                        4.0 * eps * max(1.0, abs(gamma[g, m])) * abs(info[g, m]) * cv.size)
            if abs(cell_scores.sum()) > floor:
                raise NoConvergence(f"cell ({g + 1}, {m + 1}) score above tolerance")

    return FitResult(
        theta=theta,
        gamma=gamma,
        loglik=float(loglik_obs.sum()),
        loglik_obs=loglik_obs,
        score_gamma=score_gamma,
        info_gamma=info,
        converged=True,
        iterations=iterations,
        spec=ModelSpec(family, gmap, mmap),
    )


def fit_model(panel: PanelData, spec: ModelSpec, **opts) -> FitResult:
    """Fit a model spec, using the closed form where it is exact.

    The unit-scale Gaussian family maximizes the same objective as
    :func:`fit_linear_cells`, so it dispatches there; other families go
    through :func:`fit_profile_mle`.
    """
    if spec.family.name == "gaussian-fixed-scale" and not opts:
        return fit_linear_cells(panel, spec.gmap, spec.time_map(panel.T))
    return fit_profile_mle(panel, spec, **opts)


def foc_residuals(panel: PanelData, fit: FitResult) -> tuple[float, float]:
    """(theta score inf-norm, max absolute cell score) at the fitted optimum."""
    spec = fit.spec
    mmap = spec.time_map(panel.T)
    gfield = fit.gamma[spec.gmap.codes[:, None], mmap.codes[None, :]]
    max_theta = 0.0
    if spec.family.d_theta:
        st = spec.family.psi_theta(panel.y, panel.x, fit.theta, gfield)
        max_theta = float(np.max(np.abs(st.reshape(-1, spec.family.d_theta).sum(axis=0))))
    sg = spec.family.psi_gamma(panel.y, panel.x, fit.theta, gfield)
    max_cell = 0.0
    for g in range(spec.gmap.G):
        rows = spec.gmap.members(g)
        for m in range(mmap.M):
            cols = np.where(mmap.codes == m)[0]
            max_cell = max(max_cell, abs(float(sg[np.ix_(rows, cols)].sum())))
    return max_theta, max_cell
