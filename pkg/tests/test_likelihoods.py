import math

import numpy as np
import pytest

from pbcox import likelihoods as lk
from pbcox.estimation import baseline_breslow
from pbcox.exceptions import CapacityError, DomainError
from pbcox.survival import build_risk_structure

from .conftest import fd_gradient, fd_hessian, make_dataset, random_dataset


def tied_trio():
    """Three subjects x = 0,1,2; rows 0,1 tied events at t=1; row 2 censored."""
    return make_dataset([1.0, 1.0, 2.0], [1, 1, 0], [[0.0], [1.0], [2.0]])


def apl_dataset_from_probs(p):
    """Single event time, event at row 0, with event probabilities p under
    beta=1, lambda=1."""
    x = np.log(-np.log1p(-np.asarray(p)))
    status = np.zeros(len(p), dtype=int)
    status[0] = 1
    times = np.arange(1.0, len(p) + 1.0)
    return make_dataset(times, status, x[:, None])


class TestEventProb:
    def test_examples(self):
        assert lk.event_prob(0.0, 0.1) == pytest.approx(1 - math.exp(-0.1), rel=1e-12)
        assert lk.event_prob(0.0, 0.0) == 0.0
        assert lk.event_prob(math.log(2.0), 0.1) == pytest.approx(
            1 - math.exp(-0.2), rel=1e-12
        )

    def test_negative_lambda(self):
        with pytest.raises(DomainError):
            lk.event_prob(0.0, -0.1)

    def test_small_lambda_precision(self):
        assert lk.event_prob(0.0, 1e-300) == pytest.approx(1e-300, rel=1e-12)


class TestLogApl:
    def test_hand_example(self):
        data = apl_dataset_from_probs([0.1, 0.2])
        risk = build_risk_structure(data)
        ev = lk.log_apl([1.0], [1.0], risk, data.covariates)
        assert ev.loglik == pytest.approx(math.log(0.08 / 0.26), rel=1e-10)
        assert not ev.flagged

    def test_everyone_fails_gives_zero_term(self):
        data = make_dataset([1.0, 1.0, 0.5], [1, 1, 0], [[0.2], [0.9], [0.1]])
        risk = build_risk_structure(data)
        ev = lk.log_apl([0.7], [0.4], risk, data.covariates)
        assert ev.per_time_terms[0] == pytest.approx(0.0, abs=1e-14)

    def test_terms_nonpositive_and_conditional_probability(self, rng):
        for _ in range(10):
            data = random_dataset(rng, 30, tau=0.3)
            risk = build_risk_structure(data)
            lam = baseline_breslow(rng.normal(size=1), risk, data.covariates)
            ev = lk.log_apl(rng.normal(size=1), lam, risk, data.covariates)
            assert np.all(ev.per_time_terms <= 0.0)
            probs = np.exp(ev.per_time_terms)
            assert np.all(probs > 0.0) and np.all(probs <= 1.0)
            assert ev.loglik == pytest.approx(ev.per_time_terms.sum())

    def test_zero_lambda_flags(self):
        data = tied_trio()
        risk = build_risk_structure(data)
        ev = lk.log_apl([0.5], [0.0], risk, data.covariates)
        assert ev.flagged and np.isneginf(ev.loglik)

    def test_lambda_validation(self):
        data = tied_trio()
        risk = build_risk_structure(data)
        with pytest.raises(DomainError):
            lk.log_apl([0.5], [0.1, 0.2], risk, data.covariates)
        with pytest.raises(DomainError):
            lk.log_apl([0.5], [-0.1], risk, data.covariates)


class TestClassicalCorrections:
    def test_breslow_hand_example(self):
        data = make_dataset([1, 2, 3], [1, 1, 0], [[0.0], [1.0], [2.0]])
        risk = build_risk_structure(data)
        ev = lk.log_pl_breslow([0.0], risk, data.covariates)
        assert ev.loglik == pytest.approx(math.log(1 / 3) + math.log(1 / 2), rel=1e-12)

    def test_breslow_beta_zero_general(self, rng):
        data = random_dataset(rng, 25, tau=0.25)
        risk = build_risk_structure(data)
        expected = -float(np.sum(risk.d * np.log(risk.n_at_risk)))
        assert lk.log_pl_breslow([0.0], risk, data.covariates).loglik == pytest.approx(
            expected, rel=1e-12
        )

    def test_efron_tied_example(self):
        data = tied_trio()
        risk = build_risk_structure(data)
        assert lk.log_pl_efron([0.0], risk, data.covariates).loglik == pytest.approx(
            -math.log(3) - math.log(2), rel=1e-12
        )
        assert lk.log_pl_breslow([0.0], risk, data.covariates).loglik == pytest.approx(
            -2 * math.log(3), rel=1e-12
        )

    def test_cox_correction_examples(self):
        data = tied_trio()
        risk = build_risk_structure(data)
        expected = 1.0 - math.log(math.e + math.e**2 + math.e**3)
        assert lk.log_pl_cox_correction([1.0], risk, data.covariates).loglik == (
            pytest.approx(expected, rel=1e-10)
        )
        # at beta=0 each term is -log C(n_j, d_j)
        assert lk.log_pl_cox_correction([0.0], risk, data.covariates).loglik == (
            pytest.approx(-math.log(3), rel=1e-12)
        )

    def test_kp_correction_examples(self):
        data = tied_trio()
        risk = build_risk_structure(data)
        assert lk.log_pl_kp_correction([0.0], risk, data.covariates).loglik == (
            pytest.approx(math.log(1 / 6), rel=1e-12)
        )

    def test_kp_brute_force_two_ties(self, rng):
        data = tied_trio()
        risk = build_risk_structure(data)
        beta = 0.8
        r = np.exp(beta * np.array([0.0, 1.0, 2.0]))
        s0 = r.sum()
        orderings = (r[0] / s0) * (r[1] / (s0 - r[0])) + (r[1] / s0) * (
            r[0] / (s0 - r[1])
        )
        assert lk.log_pl_kp_correction([beta], risk, data.covariates).loglik == (
            pytest.approx(math.log(orderings / 2.0), rel=1e-12)
        )

    def test_capacity_errors(self):
        n = 40
        times = np.concatenate([np.ones(20), np.full(n - 20, 2.0)])
        status = np.concatenate([np.ones(20, int), np.zeros(n - 20, int)])
        data = make_dataset(times, status, np.linspace(0, 1, n)[:, None])
        risk = build_risk_structure(data)
        with pytest.raises(CapacityError):
            lk.log_pl_cox_correction([0.3], risk, data.covariates)
        with pytest.raises(CapacityError):
            lk.log_pl_kp_correction([0.3], risk, data.covariates)

    def test_cox_matches_subset_enumeration(self, rng):
        import itertools

        data = random_dataset(rng, 9, tau=0.4)
        risk = build_risk_structure(data)
        beta = np.array([0.6])
        got = lk.log_pl_cox_correction(beta, risk, data.covariates)
        xb = data.covariates @ beta
        for j in range(risk.k):
            rset = risk.risk_sets[j]
            d = int(risk.d[j])
            denom = sum(
                math.exp(sum(xb[i] for i in comb))
                for comb in itertools.combinations(rset, d)
            )
            expected = float(xb[risk.event_sets[j]].sum()) - math.log(denom)
            assert got.per_time_terms[j] == pytest.approx(expected, rel=1e-10)


class TestSingleEventDegeneracy:
    def test_all_four_agree_per_time(self, rng):
        for _ in range(10):
            data = random_dataset(rng, int(rng.integers(6, 40)))
            risk = build_risk_structure(data)
            assert risk.d.max() == 1
            beta = rng.normal(0, 0.8, 1)
            ref = lk.log_pl_breslow(beta, risk, data.covariates).per_time_terms
            for fn in (
                lk.log_pl_efron,
                lk.log_pl_cox_correction,
                lk.log_pl_kp_correction,
            ):
                np.testing.assert_allclose(
                    fn(beta, risk, data.covariates).per_time_terms, ref, atol=1e-12
                )


class TestLocationShiftInvariance:
    @pytest.mark.parametrize(
        "fn",
        [
            lk.log_pl_breslow,
            lk.log_pl_efron,
            lk.log_pl_cox_correction,
            lk.log_pl_kp_correction,
        ],
    )
    def test_shift_leaves_differences(self, fn, rng):
        data = random_dataset(rng, 20, n_cov=2, tau=0.3)
        risk = build_risk_structure(data)
        shifted = make_dataset(
            data.times, data.status, data.covariates + np.array([3.7, -1.2])
        )
        b1, b2 = rng.normal(0, 0.5, 2), rng.normal(0, 0.5, 2)
        diff = fn(b1, risk, data.covariates).loglik - fn(b2, risk, data.covariates).loglik
        diff_shifted = (
            fn(b1, risk, shifted.covariates).loglik
            - fn(b2, risk, shifted.covariates).loglik
        )
        assert diff == pytest.approx(diff_shifted, abs=1e-9)


class TestDerivatives:
    def test_breslow_score_matches_fd(self, rng):
        for _ in range(5):
            data = random_dataset(rng, 25, n_cov=2, tau=0.3)
            risk = build_risk_structure(data)
            beta = rng.normal(0, 0.7, 2)
            fun = lambda b: lk.log_pl_breslow(b, risk, data.covariates).loglik
            np.testing.assert_allclose(
                lk.breslow_score(beta, risk, data.covariates),
                fd_gradient(fun, beta),
                rtol=1e-6,
                atol=1e-8,
            )

    def test_breslow_information_matches_fd(self, rng):
        for _ in range(5):
            data = random_dataset(rng, 25, n_cov=2, tau=0.3)
            risk = build_risk_structure(data)
            beta = rng.normal(0, 0.7, 2)
            fun = lambda b: lk.log_pl_breslow(b, risk, data.covariates).loglik
            info = lk.breslow_information(beta, risk, data.covariates)
            np.testing.assert_allclose(info, -fd_hessian(fun, beta), rtol=1e-5, atol=1e-7)
            np.testing.assert_allclose(info, info.T, atol=1e-12)
            assert np.all(np.linalg.eigvalsh(info) >= -1e-10)

    def test_efron_derivatives_match_fd(self, rng):
        for _ in range(5):
            data = random_dataset(rng, 25, n_cov=2, tau=0.3)
            risk = build_risk_structure(data)
            beta = rng.normal(0, 0.7, 2)
            fun = lambda b: lk.log_pl_efron(b, risk, data.covariates).loglik
            np.testing.assert_allclose(
                lk.efron_score(beta, risk, data.covariates),
                fd_gradient(fun, beta),
                rtol=1e-6,
                atol=1e-8,
            )
            np.testing.assert_allclose(
                lk.efron_information(beta, risk, data.covariates),
                -fd_hessian(fun, beta),
                rtol=1e-4,
                atol=1e-6,
            )

    def test_score_zero_at_optimum(self, rng):
        from pbcox.estimation import fit_breslow

        data = random_dataset(rng, 40, tau=0.2)
        risk = build_risk_structure(data)
        fit = fit_breslow(data, risk)
        assert np.max(np.abs(lk.breslow_score(fit.beta_hat, risk, data.covariates))) <= 1e-6

    def test_constant_covariate_zero_information_row(self, rng):
        data = random_dataset(rng, 20, n_cov=2, tau=0.3)
        cov = np.array(data.covariates, copy=True)
        cov[:, 1] = 4.2
        data = make_dataset(data.times, data.status, cov)
        risk = build_risk_structure(data)
        info = lk.breslow_information(np.array([0.5, 0.1]), risk, data.covariates)
        np.testing.assert_allclose(info[1, :], 0.0, atol=1e-12)
        np.testing.assert_allclose(info[:, 1], 0.0, atol=1e-12)

    def test_information_hand_example(self):
        data = make_dataset([1.0, 2.0], [1, 0], [[0.0], [1.0]])
        risk = build_risk_structure(data)
        assert lk.breslow_information([0.0], risk, data.covariates)[0, 0] == (
            pytest.approx(0.25, rel=1e-12)
        )


def poisson_linearized_apl(beta, lambdas, risk, covariates):
    """Exact-likelihood ingredients with the event probability linearized to
    its leading term and the count distribution replaced by its Poisson
    approximation; algebraically this collapses to the Breslow objective up
    to a beta-free constant."""
    xb = covariates @ np.atleast_1d(beta)
    r = np.exp(xb)[risk.order_desc]
    prefix = np.concatenate([[0.0], np.cumsum(r)])
    total = 0.0
    for j in range(risk.k):
        lam = lambdas[j]
        mu = lam * prefix[risk.n_at_risk[j]]
        ev = risk.event_pos_flat[risk.event_offsets[j] : risk.event_offsets[j + 1]]
        log_a = float(np.log(r[ev] * lam).sum()) - mu
        d = int(risk.d[j])
        log_b = d * math.log(mu) - mu - math.lgamma(d + 1)
        total += log_a - log_b
    return total


class TestPoissonLinearizedDegeneracy:
    def test_gradient_matches_breslow_score(self, rng):
        for _ in range(5):
            data = random_dataset(rng, 20, n_cov=2, tau=0.3)
            risk = build_risk_structure(data)
            beta = rng.normal(0, 0.5, 2)
            lam = baseline_breslow(beta, risk, data.covariates)
            fun = lambda b: poisson_linearized_apl(b, lam, risk, data.covariates)
            np.testing.assert_allclose(
                fd_gradient(fun, beta),
                lk.breslow_score(beta, risk, data.covariates),
                rtol=1e-8,
                atol=1e-8,
            )

    def test_difference_is_beta_free(self, rng):
        data = random_dataset(rng, 15, tau=0.3)
        risk = build_risk_structure(data)
        lam = baseline_breslow(np.zeros(1), risk, data.covariates)
        consts = []
        for b in (-0.8, 0.0, 0.4, 1.3):
            consts.append(
                poisson_linearized_apl(np.array([b]), lam, risk, data.covariates)
                - lk.log_pl_breslow([b], risk, data.covariates).loglik
            )
        np.testing.assert_allclose(consts, consts[0], atol=1e-9)


class TestAplApproachesBreslow:
    def test_shrinking_hazard_sweep(self, rng):
        data = random_dataset(rng, 30)  # tie-free
        risk = build_risk_structure(data)
        assert risk.d.max() == 1
        beta = np.array([0.6])
        lam0 = baseline_breslow(beta, risk, data.covariates)
        breslow_terms = lk.log_pl_breslow(beta, risk, data.covariates).per_time_terms
        r_max = float(np.exp(data.covariates @ beta).max())
        diffs, max_ps = [], []
        for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
            ev = lk.log_apl(beta, eps * lam0, risk, data.covariates)
            diffs.append(float(np.max(np.abs(ev.per_time_terms - breslow_terms))))
            max_ps.append(-math.expm1(-r_max * float(np.max(eps * lam0))))
        assert all(a > b for a, b in zip(diffs, diffs[1:]))
        assert diffs[-1] < 1e-4
        ratio0 = diffs[0] / max_ps[0]
        for d, p in zip(diffs, max_ps):
            assert d <= 2.0 * ratio0 * p
