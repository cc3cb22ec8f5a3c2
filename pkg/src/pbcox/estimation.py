"""Coefficient and baseline-hazard estimation.

``fit_breslow`` runs Newton iterations on the analytic Breslow
score/information; ``fit_efron`` and ``fit_pb`` run a safeguarded BFGS
quasi-Newton ascent (analytic gradient for Efron, central finite
differences for the exact tie-aware objective, whose closed-form
gradient would need one leave-one-out pmf per subject per event time).

The exact-likelihood pipeline used throughout follows the two-stage
scheme: fit Efron, take its baseline as the fixed hazard increments,
maximize the exact likelihood over the coefficients, then refresh the
increments one event time at a time (``update_baseline_pb``).
"""

import warnings
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import likelihoods as lk
from .exceptions import DegenerateFitError, DomainError, NonConvergenceError

#: convergence criterion: gradient max-norm at most this
GRAD_TOL = 1e-8

#: fallback acceptance level when finite-difference noise dominates
GRAD_TOL_NOISY = 1e-6

MAX_ITER = 200
MAX_HALVINGS = 40

#: finite-difference step scale, (machine epsilon)^(1/3)
_FD_SCALE = float(np.finfo(float).eps) ** (1.0 / 3.0)

#: central-difference rounding error per unit of |f|, eps^(2/3)
_FD_NOISE = float(np.finfo(float).eps) ** (2.0 / 3.0)

#: per-time hazard cap factor when no survivors remain (no finite maximizer)
_LAMBDA_CAP = 50.0

#: absolute tolerance on the per-time baseline first-order condition
_BASELINE_FOC_TOL = 1e-10


@dataclass
class FitResult:
    """Outcome of one estimator run."""

    method: str
    beta_hat: np.ndarray
    std_err: np.ndarray
    loglik_at_optimum: float
    baseline: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float


def _std_err_from_information(info):
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        return np.full(info.shape[0], np.inf)
    diag = np.diag(cov)
    if np.any(diag < 0.0):
        return np.full(info.shape[0], np.inf)
    return np.sqrt(diag)


def _maximize_bfgs(fun, grad, x0, fd_gradient=False):
    """Safeguarded BFGS ascent of ``fun``.

    Backtracks by step halving whenever a trial value is non-finite or
    fails the sufficient-increase test. Convergence is gradient max-norm
    at most GRAD_TOL; with ``fd_gradient`` the effective tolerance widens
    to the central-difference rounding floor of the objective (never past
    GRAD_TOL_NOISY), since finite differences cannot resolve gradients
    below it. A stalled line search at max-norm below GRAD_TOL_NOISY also
    counts as converged.

    Returns (x, f, gnorm, iterations, converged).
    """
    x = np.array(x0, dtype=np.float64)
    f = fun(x)
    if not np.isfinite(f):
        raise DegenerateFitError("objective not finite at the starting point")
    g = grad(x)
    h = np.eye(x.size)
    gnorm = float(np.max(np.abs(g)))
    _eps = float(np.finfo(float).eps)
    updated = False
    consecutive_stalls = 0

    def tol_at(fval):
        if not fd_gradient:
            return GRAD_TOL
        return min(GRAD_TOL_NOISY, max(GRAD_TOL, 8.0 * _FD_NOISE * (1.0 + abs(fval))))

    def resolution_limited(fval):
        # once the quadratic-model gain falls below the float resolution of
        # the objective, finite differences carry no further information;
        # analytic gradients stay informative, so keep the strict criterion
        if not fd_gradient:
            return False
        return updated and 0.5 * float(g @ (h @ g)) <= 4.0 * _eps * (1.0 + abs(fval))

    for it in range(1, MAX_ITER + 1):
        if gnorm <= tol_at(f) or resolution_limited(f):
            return x, f, gnorm, it - 1, True
        p = h @ g
        if p @ g <= 0.0:
            h = np.eye(x.size)
            p = g.copy()
        slope = float(p @ g)
        step = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            xn = x + step * p
            fn = fun(xn)
            if np.isfinite(fn) and fn >= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if gnorm <= GRAD_TOL_NOISY or resolution_limited(f):
                return x, f, gnorm, it - 1, True
            raise NonConvergenceError(
                f"line search stalled at gradient max-norm {gnorm:.3g}",
                last_result={"x": x.copy(), "value": f, "grad_norm": gnorm},
            )
        gn = grad(xn)
        s = xn - x
        y = gn - g
        sy = float(s @ y)
        stalled = fn - f <= 8.0 * _eps * (1.0 + abs(f))
        # BFGS update of the inverse Hessian of -fun (ascent form, so the
        # curvature condition is s'y < 0); skip when curvature is too weak
        # or the step gained nothing measurable (s and y are then noise)
        if not stalled and sy < -1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            rho = -1.0 / sy
            v = np.eye(x.size) + rho * np.outer(s, y)
            h = v @ h @ v.T + rho * np.outer(s, s)
            updated = True
        x, f, g = xn, fn, gn
        gnorm = float(np.max(np.abs(g)))
        consecutive_stalls = consecutive_stalls + 1 if stalled else 0
        if fd_gradient and (
            consecutive_stalls >= 2
            or (stalled and (gnorm <= GRAD_TOL_NOISY or resolution_limited(f)))
        ):
            return x, f, gnorm, it, True
    if gnorm <= GRAD_TOL_NOISY or resolution_limited(f):
        return x, f, gnorm, MAX_ITER, True
    raise NonConvergenceError(
        f"no convergence in {MAX_ITER} iterations (gradient max-norm {gnorm:.3g})",
        last_result={"x": x.copy(), "value": f, "grad_norm": gnorm},
    )


def _fd_gradient(fun, x):
    """Central finite-difference gradient with per-coordinate steps."""
    g = np.empty(x.size)
    f0 = None
    for l in range(x.size):
        hstep = max(1.0, abs(x[l])) * _FD_SCALE
        e = np.zeros(x.size)
        e[l] = hstep
        fp = fun(x + e)
        fm = fun(x - e)
        if np.isfinite(fp) and np.isfinite(fm):
            g[l] = (fp - fm) / (2.0 * hstep)
            continue
        if f0 is None:
            f0 = fun(x)
        if np.isfinite(fp):
            g[l] = (fp - f0) / hstep
        elif np.isfinite(fm):
            g[l] = (f0 - fm) / hstep
        else:
            raise NonConvergenceError("objective not finite near the current iterate")
    return g


def fit_breslow(data, risk):
    """Maximize the Breslow log partial likelihood by Newton iterations."""
    cov = data.covariates
    beta = np.zeros(data.n_covariates)
    f = lk.log_pl_breslow(beta, risk, cov).loglik
    iterations = 0
    for it in range(1, MAX_ITER + 1):
        iterations = it
        u = lk.breslow_score(beta, risk, cov)
        gnorm = float(np.max(np.abs(u)))
        if gnorm <= GRAD_TOL:
            iterations = it - 1
            break
        info = lk.breslow_information(beta, risk, cov)
        try:
            step = np.linalg.solve(info, u)
        except np.linalg.LinAlgError:
            raise DegenerateFitError("singular Breslow information matrix") from None
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            fn = lk.log_pl_breslow(beta + scale * step, risk, cov).loglik
            if np.isfinite(fn) and fn >= f - 1e-12 * (1.0 + abs(f)):
                break
            scale *= 0.5
        else:
            raise NonConvergenceError(
                f"Breslow line search stalled at gradient max-norm {gnorm:.3g}"
            )
        beta = beta + scale * step
        f = fn
    else:
        raise NonConvergenceError(
            f"Breslow fit: no convergence in {MAX_ITER} iterations",
            last_result=_result("breslow", beta, risk, data, f, False, MAX_ITER),
        )
    return FitResult(
        method="breslow",
        beta_hat=beta,
        std_err=_std_err_from_information(lk.breslow_information(beta, risk, cov)),
        loglik_at_optimum=f,
        baseline=baseline_breslow(beta, risk, cov),
        converged=True,
        iterations=iterations,
        grad_norm=gnorm,
    )


def _result(method, beta, risk, data, loglik, converged, iterations):
    return FitResult(
        method=method,
        beta_hat=beta,
        std_err=np.full(beta.size, np.nan),
        loglik_at_optimum=loglik,
        baseline=np.full(risk.k, np.nan),
        converged=converged,
        iterations=iterations,
        grad_norm=np.nan,
    )


def fit_efron(data, risk):
    """Maximize the Efron log partial likelihood by BFGS with the analytic
    gradient."""
    cov = data.covariates

    def fun(b):
        return lk.log_pl_efron(b, risk, cov).loglik

    def grad(b):
        return lk.efron_score(b, risk, cov)

    beta, f, gnorm, iterations, converged = _maximize_bfgs(
        fun, grad, np.zeros(data.n_covariates)
    )
    return FitResult(
        method="efron",
        beta_hat=beta,
        std_err=_std_err_from_information(lk.efron_information(beta, risk, cov)),
        loglik_at_optimum=f,
        baseline=baseline_efron(beta, risk, cov),
        converged=converged,
        iterations=iterations,
        grad_norm=gnorm,
    )


def fit_pb(data, risk, init_beta, init_lambdas):
    """Maximize the exact tie-aware partial likelihood over the coefficients.

    The hazard increments stay fixed at ``init_lambdas`` throughout the
    BFGS ascent (finite-difference gradient); afterwards the baseline is
    refreshed per event time and standard errors come from the Breslow
    information at the optimum.
    """
    cov = data.covariates
    lam = np.asarray(init_lambdas, dtype=np.float64)
    if lam.shape != (risk.k,) or np.any(lam <= 0.0):
        raise DomainError("init_lambdas must be positive at every event time")
    beta0 = np.atleast_1d(np.asarray(init_beta, dtype=np.float64))
    if not np.all(np.isfinite(beta0)):
        raise DomainError("init_beta must be finite")

    def fun(b):
        return lk.log_apl(b, lam, risk, cov).loglik

    def grad(b):
        return _fd_gradient(fun, b)

    beta, f, gnorm, iterations, converged = _maximize_bfgs(
        fun, grad, beta0, fd_gradient=True
    )
    return FitResult(
        method="pb",
        beta_hat=beta,
        std_err=_std_err_from_information(lk.breslow_information(beta, risk, cov)),
        loglik_at_optimum=f,
        baseline=update_baseline_pb(beta, risk, cov, lam),
        converged=converged,
        iterations=iterations,
        grad_norm=gnorm,
    )


def _risk_scores_desc(beta, risk, covariates):
    xb = covariates @ np.atleast_1d(np.asarray(beta, dtype=np.float64))
    return np.exp(xb[risk.order_desc])


def baseline_breslow(beta, risk, covariates):
    """Per-event-time hazard increments d_j over the risk-set score total."""
    r_desc = _risk_scores_desc(beta, risk, covariates)
    s0 = np.concatenate([[0.0], np.cumsum(r_desc)])[risk.n_at_risk]
    return risk.d / s0


def baseline_efron(beta, risk, covariates):
    """Efron hazard increments: sum of reciprocals of the tie-adjusted
    risk-set score totals; equals the Breslow increment when d_j = 1."""
    r_desc = _risk_scores_desc(beta, risk, covariates)
    s0 = np.concatenate([[0.0], np.cumsum(r_desc)])[risk.n_at_risk]
    out = np.empty(risk.k)
    for j in range(risk.k):
        ev = risk.event_pos_flat[risk.event_offsets[j] : risk.event_offsets[j + 1]]
        abar = r_desc[ev].mean()
        out[j] = float(np.sum(1.0 / (s0[j] - np.arange(risk.d[j]) * abar)))
    return out


def baseline_nelson_aalen(risk):
    """Nelson-Aalen increments d_j / n_j."""
    return risk.d / risk.n_at_risk


def _baseline_foc(lam, r_ev, r_surv_sum):
    """First-order condition of the per-time event-configuration likelihood."""
    with np.errstate(over="ignore"):
        return float(np.sum(r_ev / np.expm1(r_ev * lam))) - r_surv_sum


def _solve_baseline_root(r_ev, r_surv_sum):
    lam_cap = _LAMBDA_CAP / float(r_ev.min())
    if r_surv_sum <= 0.0:
        return lam_cap, True
    lo, hi = 1e-12, lam_cap
    if _baseline_foc(hi, r_ev, r_surv_sum) > 0.0:
        return lam_cap, True
    lam = min(max(float(r_ev.size) / r_surv_sum, lo), hi)
    for _ in range(100):
        g = _baseline_foc(lam, r_ev, r_surv_sum)
        if abs(g) <= _BASELINE_FOC_TOL:
            return lam, False
        if g > 0.0:
            lo = lam
        else:
            hi = lam
        with np.errstate(over="ignore", invalid="ignore"):
            ex = np.exp(r_ev * lam)
            gp = -float(np.nansum(np.where(np.isfinite(ex), r_ev**2 * ex, 0.0)
                                  / np.expm1(r_ev * lam) ** 2))
        lam_new = lam - g / gp if gp < 0.0 else 0.5 * (lo + hi)
        if not (lo < lam_new < hi):
            lam_new = 0.5 * (lo + hi)
        if abs(lam_new - lam) <= 1e-17 * lam:
            return lam_new, False
        lam = lam_new
    return lam, False


def update_baseline_pb(beta_pb, risk, covariates, init_lambdas=None, return_boundary=False):
    """Refit each hazard increment at fixed coefficients.

    Each increment maximizes the per-time event-configuration likelihood,
    i.e. solves sum_D r_i/(exp(r_i*lam)-1) = sum_{R minus D} r_i by
    safeguarded Newton within a bracket. When no survivors remain the
    maximizer is infinite; the increment is capped and marked as a
    boundary case.

    ``init_lambdas`` is accepted for interface symmetry with the fitting
    pipeline; the bracketed solve does not need a warm start.
    """
    del init_lambdas
    r_desc = _risk_scores_desc(beta_pb, risk, covariates)
    prefix = np.concatenate([[0.0], np.cumsum(r_desc)])
    out = np.empty(risk.k)
    boundary = np.zeros(risk.k, dtype=bool)
    for j in range(risk.k):
        ev = risk.event_pos_flat[risk.event_offsets[j] : risk.event_offsets[j + 1]]
        r_ev = r_desc[ev]
        r_surv_sum = float(prefix[risk.n_at_risk[j]] - r_ev.sum())
        out[j], boundary[j] = _solve_baseline_root(r_ev, r_surv_sum)
    if return_boundary:
        return out, boundary
    return out


@dataclass
class WaldIntervals:
    """Per-coefficient Wald confidence intervals."""

    level: float
    lower: np.ndarray
    upper: np.ndarray
    degenerate: np.ndarray  # zero standard error: point interval
    unbounded: np.ndarray  # infinite standard error


def wald_ci(fit, level=0.95):
    """Wald intervals beta_hat +/- z_{(1+level)/2} * se."""
    if not 0.0 < level < 1.0:
        raise DomainError("level must be inside (0, 1)")
    z = NormalDist().inv_cdf((1.0 + level) / 2.0)
    se = np.asarray(fit.std_err, dtype=np.float64)
    degenerate = se == 0.0
    unbounded = ~np.isfinite(se)
    if degenerate.any() or unbounded.any():
        warnings.warn(
            "degenerate or unbounded Wald interval (zero or infinite SE)",
            stacklevel=2,
        )
    return WaldIntervals(
        level=level,
        lower=fit.beta_hat - z * se,
        upper=fit.beta_hat + z * se,
        degenerate=degenerate,
        unbounded=unbounded,
    )
