"""Log partial likelihoods for tied survival data.

``log_apl`` evaluates the exact tie-aware partial likelihood: at each
distinct event time the contribution is the probability of the observed
event configuration divided by the probability that exactly that many
events occur, the denominator being a Poisson-binomial pmf value. The
classical tie corrections (Breslow, Efron, Cox, Kalbfleisch-Prentice)
are provided as comparison baselines, together with the analytic score
and information of the Breslow and Efron objectives.

All evaluators take the coefficient vector, a ``RiskStructure`` and the
n x d covariate matrix in original row order. Per-time terms are indexed
by ascending distinct event time.

Method tags: 'pb_exact', 'breslow', 'efron', 'cox_correction',
'kalbfleisch_prentice' ('no_ties_approx' is the shared single-event
degeneracy of the four corrections).
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .exceptions import CapacityError, DomainError, EvaluationError

#: subset-enumeration cap per event time for the Cox correction
COX_SUBSET_CAP = 10**6

#: maximum tie multiplicity for the Kalbfleisch-Prentice correction (d! orderings)
KP_TIE_CAP = 9


@dataclass
class LikelihoodEvaluation:
    """Total log likelihood with its per-event-time decomposition."""

    loglik: float
    per_time_terms: np.ndarray
    method: str
    flagged: bool = False


def event_prob(x_beta, lam):
    """Conditional event probability 1 - exp(-exp(x_beta) * lam).

    Computed through expm1 so that small hazards keep full precision.
    """
    if lam < 0.0:
        raise DomainError("lambda must be nonnegative")
    return -math.expm1(-math.exp(x_beta) * lam)


def _beta_vec(beta, covariates):
    b = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if b.size != covariates.shape[1]:
        raise DomainError(
            f"beta has {b.size} entries for {covariates.shape[1]} covariates"
        )
    return b


def _desc_linpred(beta, risk, covariates):
    """Linear predictor in time-descending subject order, plus the max shift."""
    xb = covariates @ _beta_vec(beta, covariates)
    if not np.all(np.isfinite(xb)):
        raise EvaluationError("non-finite linear predictor")
    xb_d = xb[risk.order_desc]
    c = float(xb_d.max())
    return xb_d, np.exp(xb_d - c), c


def _event_sums(values, risk):
    """Per-event-time sums of ``values`` (desc order) over the event sets."""
    return np.add.reduceat(values[risk.event_pos_flat], risk.event_offsets[:-1])


def _prefix(values):
    out = np.zeros(values.size + 1)
    np.cumsum(values, out=out[1:])
    return out


def _check_lambdas(lambdas, k):
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.shape != (k,):
        raise DomainError(f"lambdas must have length {k}")
    if not np.all(np.isfinite(lam)) or np.any(lam < 0.0):
        raise DomainError("lambdas must be finite and nonnegative")
    return lam


def log_apl(beta, lambdas, risk, covariates):
    """Exact tie-aware log partial likelihood at fixed hazard increments.

    Each per-time term is log(A_j) - log(B_j) where A_j multiplies the
    event probabilities of the failing subjects with the survival
    probabilities of the rest of the risk set, and B_j is the
    Poisson-binomial probability of observing that many events. Terms are
    log conditional probabilities, hence <= 0. A zero event probability
    (hazard increment 0 at an event time) or an underflowed denominator
    yields a -inf term and flags the evaluation instead of raising.
    """
    lam = _check_lambdas(lambdas, risk.k)
    xb = covariates @ _beta_vec(beta, covariates)
    with np.errstate(over="ignore"):
        # inf risk scores are legal here: they flow into flagged -inf terms
        r_desc = np.exp(xb[risk.order_desc])
    terms, flags = kernels.apl_terms(
        r_desc,
        _prefix(r_desc),
        risk.n_at_risk,
        risk.d,
        risk.event_pos_flat,
        risk.event_offsets,
        lam,
    )
    return LikelihoodEvaluation(
        loglik=float(terms.sum()),
        per_time_terms=terms,
        method="pb_exact",
        flagged=bool(flags.any()),
    )


def log_pl_breslow(beta, risk, covariates):
    """Breslow-corrected log partial likelihood.

    The tied-count factorial factor is constant in beta and omitted, so
    values are comparable across beta but not across methods.
    """
    xb_d, exb, c = _desc_linpred(beta, risk, covariates)
    s0 = _prefix(exb)[risk.n_at_risk]
    with np.errstate(divide="ignore"):
        # s0 can underflow to 0 at extreme beta; the -inf term lets
        # optimizers backtrack instead of crashing
        terms = _event_sums(xb_d, risk) - risk.d * (np.log(s0) + c)
    return LikelihoodEvaluation(
        float(terms.sum()), terms, "breslow", flagged=bool(np.isneginf(terms).any())
    )


def log_pl_efron(beta, risk, covariates):
    """Efron-corrected log partial likelihood.

    The interior denominators are positive in exact arithmetic; a
    nonpositive one can only come from underflow at extreme beta and
    yields a flagged -inf term.
    """
    xb_d, exb, c = _desc_linpred(beta, risk, covariates)
    s0 = _prefix(exb)[risk.n_at_risk]
    abar = _event_sums(exb, risk) / risk.d
    terms = np.empty(risk.k)
    flagged = False
    ev_xb = _event_sums(xb_d, risk)
    for j in range(risk.k):
        args = s0[j] - np.arange(risk.d[j]) * abar[j]
        if np.any(args <= 0.0):
            terms[j] = -np.inf
            flagged = True
            continue
        terms[j] = ev_xb[j] - float(np.log(args).sum()) - risk.d[j] * c
    return LikelihoodEvaluation(float(terms.sum()), terms, "efron", flagged=flagged)


def _elementary_symmetric(values, d):
    """Coefficients e_0..e_d of prod_i (1 + values[i] z), truncated at degree d."""
    coef = np.zeros(d + 1)
    coef[0] = 1.0
    for i, v in enumerate(values):
        hi = min(i + 1, d)
        coef[1 : hi + 1] += v * coef[0:hi].copy()
    return coef


def log_pl_cox_correction(beta, risk, covariates, subset_cap=COX_SUBSET_CAP):
    """Cox-corrected log partial likelihood.

    The per-time denominator sums exp of the linear predictor total over
    every size-d_j subset of the risk set; times where the subset count
    exceeds ``subset_cap`` raise ``CapacityError``.
    """
    xb_d, exb, c = _desc_linpred(beta, risk, covariates)
    terms = np.empty(risk.k)
    flagged = False
    ev_xb = _event_sums(xb_d, risk)
    for j in range(risk.k):
        n, d = int(risk.n_at_risk[j]), int(risk.d[j])
        if math.comb(n, d) > subset_cap:
            raise CapacityError(
                f"C({n}, {d}) subsets exceed cap {subset_cap} at event time index {j}"
            )
        e_d = _elementary_symmetric(exb[:n], d)[d]
        if e_d <= 0.0:
            terms[j] = -np.inf
            flagged = True
            continue
        terms[j] = ev_xb[j] - (math.log(e_d) + d * c)
    return LikelihoodEvaluation(float(terms.sum()), terms, "cox_correction", flagged=flagged)


def log_pl_kp_correction(beta, risk, covariates, tie_cap=KP_TIE_CAP):
    """Kalbfleisch-Prentice-corrected log partial likelihood.

    Averages the sequential no-tie contributions over every ordering of
    the tied events; times with more than ``tie_cap`` ties raise
    ``CapacityError``.
    """
    xb_d, exb, c = _desc_linpred(beta, risk, covariates)
    s0 = _prefix(exb)[risk.n_at_risk]
    terms = np.empty(risk.k)
    flagged = False
    ev_xb = _event_sums(xb_d, risk)
    for j in range(risk.k):
        d = int(risk.d[j])
        if d > tie_cap:
            raise CapacityError(
                f"{d} ties exceed the {tie_cap}-tie ordering cap at event time index {j}"
            )
        ev = risk.event_pos_flat[risk.event_offsets[j] : risk.event_offsets[j + 1]]
        ev_exb = exb[ev]
        inv_sum = 0.0
        underflow = False
        for perm in itertools.permutations(range(d)):
            denom = 1.0
            removed = 0.0
            for m in range(d):
                factor = s0[j] - removed
                if factor <= 0.0:
                    underflow = True
                    break
                denom *= factor
                removed += ev_exb[perm[m]]
            if underflow or denom <= 0.0:
                underflow = True
                break
            inv_sum += 1.0 / denom
        if underflow or not math.isfinite(inv_sum) or inv_sum <= 0.0:
            terms[j] = -np.inf
            flagged = True
            continue
        terms[j] = ev_xb[j] + math.log(inv_sum / math.factorial(d)) - d * c
    return LikelihoodEvaluation(
        float(terms.sum()), terms, "kalbfleisch_prentice", flagged=flagged
    )


def _weighted_moments(beta, risk, covariates):
    """Per-time risk-score-weighted covariate mean and covariance."""
    xb_d, exb, _ = _desc_linpred(beta, risk, covariates)
    x_d = covariates[risk.order_desc]
    s0 = _prefix(exb)[risk.n_at_risk]
    s1 = np.vstack([np.zeros(x_d.shape[1]), np.cumsum(exb[:, None] * x_d, axis=0)])
    s1 = s1[risk.n_at_risk]
    outer = exb[:, None, None] * (x_d[:, :, None] * x_d[:, None, :])
    s2 = np.concatenate(
        [np.zeros((1,) + outer.shape[1:]), np.cumsum(outer, axis=0)]
    )[risk.n_at_risk]
    eps = s1 / s0[:, None]
    v = s2 / s0[:, None, None] - eps[:, :, None] * eps[:, None, :]
    return x_d, eps, v


def breslow_score(beta, risk, covariates):
    """Gradient of the Breslow log partial likelihood."""
    x_d, eps, _ = _weighted_moments(beta, risk, covariates)
    ev_x = np.add.reduceat(x_d[risk.event_pos_flat], risk.event_offsets[:-1], axis=0)
    return (ev_x - risk.d[:, None] * eps).sum(axis=0)


def breslow_information(beta, risk, covariates):
    """Observed information (negative Hessian) of the Breslow objective.

    Symmetric positive semidefinite: a weighted sum of per-time weighted
    covariate covariance matrices.
    """
    _, _, v = _weighted_moments(beta, risk, covariates)
    info = (risk.d[:, None, None] * v).sum(axis=0)
    return (info + info.T) / 2.0


def _efron_derivative_parts(beta, risk, covariates):
    xb_d, exb, _ = _desc_linpred(beta, risk, covariates)
    x_d = covariates[risk.order_desc]
    s0 = _prefix(exb)[risk.n_at_risk]
    s1 = np.vstack([np.zeros(x_d.shape[1]), np.cumsum(exb[:, None] * x_d, axis=0)])
    s1 = s1[risk.n_at_risk]
    outer = exb[:, None, None] * (x_d[:, :, None] * x_d[:, None, :])
    s2 = np.concatenate(
        [np.zeros((1,) + outer.shape[1:]), np.cumsum(outer, axis=0)]
    )[risk.n_at_risk]
    return x_d, exb, s0, s1, s2


def efron_score(beta, risk, covariates):
    """Gradient of the Efron log partial likelihood."""
    x_d, exb, s0, s1, s2 = _efron_derivative_parts(beta, risk, covariates)
    grad = np.zeros(x_d.shape[1])
    for j in range(risk.k):
        d = int(risk.d[j])
        ev = risk.event_pos_flat[risk.event_offsets[j] : risk.event_offsets[j + 1]]
        frac = np.arange(d) / d
        d0 = exb[ev].sum()
        d1 = (exb[ev, None] * x_d[ev]).sum(axis=0)
        denom = s0[j] - frac * d0
        grad += x_d[ev].sum(axis=0)
        grad -= ((s1[j][None, :] - frac[:, None] * d1) / denom[:, None]).sum(axis=0)
    return grad


def efron_information(beta, risk, covariates):
    """Observed information (negative Hessian) of the Efron objective."""
    x_d, exb, s0, s1, s2 = _efron_derivative_parts(beta, risk, covariates)
    p = x_d.shape[1]
    info = np.zeros((p, p))
    for j in range(risk.k):
        d = int(risk.d[j])
        ev = risk.event_pos_flat[risk.event_offsets[j] : risk.event_offsets[j + 1]]
        frac = np.arange(d) / d
        d0 = exb[ev].sum()
        d1 = (exb[ev, None] * x_d[ev]).sum(axis=0)
        d2 = (exb[ev, None, None] * (x_d[ev, :, None] * x_d[ev, None, :])).sum(axis=0)
        for el in range(d):
            denom = s0[j] - frac[el] * d0
            num1 = s1[j] - frac[el] * d1
            num2 = s2[j] - frac[el] * d2
            vv = num1 / denom
            info += num2 / denom - np.outer(vv, vv)
    return (info + info.T) / 2.0
