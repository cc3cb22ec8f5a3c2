
import numpy as np
import pytest

from pbcox import simulation as sim
from pbcox.estimation import FitResult
from pbcox.exceptions import DomainError, StructureError

BASE = dict(beta=1.0, sigma_x=1.5, tau=0.1, n=80, B=20, seed=99)


class TestConfig:
    def test_roundtrip(self):
        cfg = sim.SimulationConfig(**BASE)
        assert sim.SimulationConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize(
        "bad",
        [
            dict(eta=0.0),
            dict(gamma=-1.0),
            dict(tau=-0.1),
            dict(n=1),
            dict(B=0),
            dict(ci_level=1.0),
            dict(sigma_x=0.0),
        ],
    )
    def test_validation(self, bad):
        with pytest.raises(DomainError):
            sim.SimulationConfig(**{**BASE, **bad})


class TestGenerateReplicate:
    def test_deterministic(self):
        cfg = sim.SimulationConfig(**BASE)
        a = sim.generate_replicate(cfg, 3)
        b = sim.generate_replicate(cfg, 3)
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.status, b.status)
        np.testing.assert_array_equal(a.covariates, b.covariates)

    def test_replicates_differ(self):
        cfg = sim.SimulationConfig(**BASE)
        a = sim.generate_replicate(cfg, 0)
        b = sim.generate_replicate(cfg, 1)
        assert not np.array_equal(a.times, b.times)

    def test_grouped_times_on_grid(self):
        cfg = sim.SimulationConfig(**{**BASE, "tau": 0.1})
        data = sim.generate_replicate(cfg, 0)
        ratio = data.times / 0.1
        np.testing.assert_allclose(ratio, np.round(ratio), atol=1e-9)
        assert np.all(data.times <= cfg.zeta + 1e-12)

    def test_ungrouped_times_continuous(self):
        cfg = sim.SimulationConfig(**{**BASE, "tau": 0.0})
        data = sim.generate_replicate(cfg, 0)
        events = data.times[data.status == 1]
        assert np.unique(events).size == events.size

    def test_zero_event_replicate_raises_after_resample(self):
        # event times astronomically large: nobody ever fails
        cfg = sim.SimulationConfig(**{**BASE, "eta": 1e12})
        with pytest.raises(StructureError):
            sim.generate_replicate(cfg, 0)

    def test_event_time_marginal_is_weibull_at_beta_zero(self):
        # KS distance between the empirical cdf of the underlying event
        # times and the target Weibull cdf, at zero covariate effect
        cfg = sim.SimulationConfig(
            beta=0.0, sigma_x=1.0, tau=0.0, n=100_000, B=1, seed=7
        )
        rng = sim._replicate_rng(cfg, 0)
        _, t_event, _ = sim._draw_raw(rng, cfg)
        t_sorted = np.sort(t_event)
        cdf = -np.expm1(-((t_sorted / cfg.eta) ** cfg.gamma))
        i = np.arange(1, t_sorted.size + 1)
        ks = max(
            np.max(np.abs(i / t_sorted.size - cdf)),
            np.max(np.abs((i - 1) / t_sorted.size - cdf)),
        )
        assert ks < 0.01

    def test_censoring_capped_at_study_end(self):
        cfg = sim.SimulationConfig(**{**BASE, "tau": 0.0})
        rng = sim._replicate_rng(cfg, 0)
        _, _, c = sim._draw_raw(rng, cfg)
        assert np.all(c <= cfg.zeta)
        assert np.any(c == cfg.zeta)  # administrative censoring does occur


class TestRunSimulation:
    def test_stub_estimator_harness(self, monkeypatch):
        # an estimator that returns the truth must score RMSE 0 and full
        # coverage (the harness itself adds no error)
        cfg = sim.SimulationConfig(**{**BASE, "B": 10})

        def stub(data, risk):
            return FitResult(
                method="breslow",
                beta_hat=np.array([cfg.beta]),
                std_err=np.array([0.5]),
                loglik_at_optimum=0.0,
                baseline=np.full(risk.k, 0.1),
                converged=True,
                iterations=1,
                grad_norm=0.0,
            )

        monkeypatch.setattr(sim, "fit_breslow", stub)
        summary = sim.run_simulation(cfg, methods=("breslow",))
        rec = summary.record("breslow")
        assert rec.rmse_scaled == 0.0
        assert rec.abs_bias_scaled == 0.0
        assert rec.coverage == 1.0
        assert rec.mean_se == 0.5

    def test_seed_determinism(self):
        cfg = sim.SimulationConfig(**{**BASE, "B": 15})
        a = sim.run_simulation(cfg)
        b = sim.run_simulation(cfg)
        for ra, rb in zip(a.methods, b.methods):
            # identical except wall-clock timing
            da, db = ra.__dict__.copy(), rb.__dict__.copy()
            da.pop("mean_fit_seconds")
            db.pop("mean_fit_seconds")
            assert da == db

    def test_moment_decomposition_identity(self):
        cfg = sim.SimulationConfig(**{**BASE, "B": 40})
        summary = sim.run_simulation(cfg)
        for rec in summary.methods:
            bsz = rec.n_effective
            mse = (rec.rmse_scaled * abs(cfg.beta)) ** 2
            bias2 = (rec.abs_bias_scaled * abs(cfg.beta)) ** 2
            var_pop = rec.empirical_sd**2 * (bsz - 1) / bsz
            assert mse == pytest.approx(bias2 + var_pop, rel=1e-10)
            assert 0.0 <= rec.coverage <= 1.0

    def test_no_tie_methods_agree_replicate_by_replicate(self):
        # without grouping there are no event-time ties, and the two
        # classical corrections coincide fit by fit
        cfg = sim.SimulationConfig(**{**BASE, "tau": 0.0, "B": 8})
        for b in range(cfg.B):
            data = sim.generate_replicate(cfg, b)
            from pbcox.estimation import fit_breslow, fit_efron
            from pbcox.survival import build_risk_structure

            risk = build_risk_structure(data)
            fb, fe = fit_breslow(data, risk), fit_efron(data, risk)
            assert abs(fb.beta_hat[0] - fe.beta_hat[0]) < 1e-6

    def test_unknown_method(self):
        cfg = sim.SimulationConfig(**BASE)
        with pytest.raises(DomainError):
            sim.run_simulation(cfg, methods=("breslow", "cox"))

    def test_excess_failures_flag_invalid(self, monkeypatch):
        cfg = sim.SimulationConfig(**{**BASE, "B": 10})

        def failing(data, risk):
            raise np.linalg.LinAlgError("boom")

        monkeypatch.setattr(sim, "fit_breslow", failing)
        summary = sim.run_simulation(cfg, methods=("breslow",))
        assert not summary.valid
        assert summary.record("breslow").n_failures == 10

    def test_summary_rows_shape(self):
        cfg = sim.SimulationConfig(**{**BASE, "B": 5})
        rows = sim.summary_rows(sim.run_simulation(cfg))
        assert len(rows) == 3
        assert {"method", "coverage", "rmse_scaled", "valid"} <= set(rows[0])

    def test_parallel_matches_serial(self):
        cfg = sim.SimulationConfig(**{**BASE, "B": 6})
        serial = sim.run_simulation(cfg, threads=1)
        parallel = sim.run_simulation(cfg, threads=2)
        for rs, rp in zip(serial.methods, parallel.methods):
            assert rs.coverage == rp.coverage
            assert rs.rmse_scaled == rp.rmse_scaled
            assert rs.abs_bias_scaled == rp.abs_bias_scaled


@pytest.mark.slow
class TestStressPattern:
    def test_breslow_coverage_monotone_in_tau_and_pb_dominates(self):
        # qualitative pattern at n=200, beta=1.5, sigma_x=2: grouping
        # degrades the Poisson-approximation methods while the exact
        # likelihood holds up
        coverages = {}
        for tau in (0.01, 0.1, 0.2):
            cfg = sim.SimulationConfig(
                beta=1.5, sigma_x=2.0, tau=tau, n=200, B=1000, seed=20250809
            )
            summary = sim.run_simulation(cfg)
            coverages[tau] = {r.method: r.coverage for r in summary.methods}
        br = [coverages[t]["breslow"] for t in (0.01, 0.1, 0.2)]
        assert br[0] >= br[1] >= br[2]
        assert coverages[0.2]["pb"] > coverages[0.2]["breslow"]
        assert coverages[0.2]["pb"] > coverages[0.2]["efron"]
