"""Synthetic generator, error metrics, conjugate oracle, suite mechanics."""

import dataclasses

import numpy as np
import pytest

from mvshrink import priors
from mvshrink.errors import ConfigError, DomainError
from mvshrink.experiments import (
    EXPERIMENT_TABLE,
    ExperimentConfig,
    ar1_covariance,
    conjugate_oracle,
    covariance_metrics,
    experiment_config,
    generate_synthetic,
    getting_it_right,
    run_experiment_suite,
)
from mvshrink.sampler import HyperParams, RegressionData, SamplerConfig, run_chain

from _oracles import batch_means_se


class TestConfigs:
    def test_table(self):
        cfg = experiment_config(1)
        assert (cfg.n, cfg.p, cfg.q, cfg.s0) == (25, 125, 3, 2)
        cfg6 = experiment_config(6)
        assert (cfg6.n, cfg6.p, cfg6.q, cfg6.s0) == (150, 1837, 3, 7)
        assert sorted(EXPERIMENT_TABLE) == [1, 2, 3, 4, 5, 6]

    def test_bad_id(self):
        with pytest.raises(ConfigError):
            experiment_config(7)

    def test_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(n=10, p=5, q=2, s0=6)
        with pytest.raises(ConfigError):
            ExperimentConfig(n=10, p=5, q=2, s0=2, rho=1.0)


class TestGenerateSynthetic:
    def test_gamma_entries(self):
        g = ar1_covariance(4, 0.5)
        assert g[0, 1] == pytest.approx(0.5)
        assert g[0, 2] == pytest.approx(0.25)
        assert np.all(np.diag(g) == 1.0)

    def test_sigma0_diagonal(self):
        cfg = ExperimentConfig(n=10, p=6, q=3, s0=2)
        _, _, sigma0, _ = generate_synthetic(cfg, np.random.default_rng(0))
        np.testing.assert_allclose(np.diag(sigma0), 2.0)
        assert sigma0[0, 1] == pytest.approx(1.0)  # 2 * 0.5

    def test_deterministic_given_seed(self):
        cfg = ExperimentConfig(n=12, p=8, q=2, s0=3)
        d1, b1, s1, sup1 = generate_synthetic(cfg, np.random.default_rng(42))
        d2, b2, s2, sup2 = generate_synthetic(cfg, np.random.default_rng(42))
        np.testing.assert_array_equal(d1.x, d2.x)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(b1, b2)
        np.testing.assert_array_equal(sup1, sup2)

    def test_support_and_magnitudes(self):
        cfg = ExperimentConfig(n=5, p=30, q=3, s0=4)
        _, b0, _, support = generate_synthetic(cfg, np.random.default_rng(1))
        assert support.size == 4
        nonzero_rows = np.flatnonzero(np.abs(b0).sum(axis=1) > 0)
        np.testing.assert_array_equal(nonzero_rows, support)
        mags = np.abs(b0[support])
        assert mags.min() >= cfg.coef_lo and mags.max() <= cfg.coef_hi

    def test_design_row_covariance_matches_ar1(self):
        cfg = ExperimentConfig(n=100_000, p=6, q=2, s0=1)
        data, _, _, _ = generate_synthetic(cfg, np.random.default_rng(2))
        emp = data.x.T @ data.x / cfg.n
        gamma = ar1_covariance(6, 0.5)
        # gaussian variance of a covariance entry: (g_ii g_jj + g_ij^2)/n
        se = np.sqrt((np.outer(np.diag(gamma), np.diag(gamma)) + gamma**2) / cfg.n)
        assert np.all(np.abs(emp - gamma) < 3.5 * se)


class TestCovarianceMetrics:
    def test_zero_error(self):
        s = ar1_covariance(3, 0.5, 2.0)
        b = np.ones((4, 3))
        assert covariance_metrics(s, s, b, b) == (0.0, 0.0, 0.0)

    def test_hand_example(self):
        spectral, frob, _ = covariance_metrics(2.0 * np.eye(2), np.eye(2),
                                               np.zeros((2, 2)), np.zeros((2, 2)))
        assert spectral == pytest.approx(1.0)
        assert frob == pytest.approx(np.sqrt(2.0))

    def test_frobenius_dominates_spectral(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = rng.standard_normal((3, 3))
            sig_hat = m @ m.T + np.eye(3)
            spectral, frob, _ = covariance_metrics(
                sig_hat, np.eye(3), np.zeros((2, 3)), np.zeros((2, 3))
            )
            assert frob >= spectral - 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            covariance_metrics(np.eye(2), np.eye(3), np.zeros((2, 2)), np.zeros((2, 2)))


class TestConjugateOracle:
    def test_hand_worked_instance(self):
        data = RegressionData(np.array([[1.0], [0.0]]), np.array([[2.0], [0.0]]))
        hp = HyperParams(priors.horseshoe(), nu=3.0, phi=np.eye(1), tau=1.0)
        res = conjugate_oracle(data, hp, xi_fixed=1.0)
        assert res.b_mean[0, 0] == pytest.approx(1.0)
        assert res.sigma_scale[0, 0] == pytest.approx(3.0)  # 1 + 4 - 2
        assert res.sigma_df == pytest.approx(5.0)
        assert res.sigma_mean[0, 0] == pytest.approx(1.0)

    def test_zero_response(self):
        rng = np.random.default_rng(4)
        data = RegressionData(rng.standard_normal((6, 3)), np.zeros((6, 2)))
        hp = HyperParams(priors.horseshoe(), nu=4.0, phi=np.eye(2), tau=0.5)
        res = conjugate_oracle(data, hp, 1.0)
        np.testing.assert_allclose(res.b_mean, 0.0)
        np.testing.assert_allclose(res.sigma_scale, np.eye(2))

    def test_matches_independent_ridge_solve(self):
        rng = np.random.default_rng(5)
        data = RegressionData(rng.standard_normal((12, 7)), rng.standard_normal((12, 2)))
        hp = HyperParams(priors.horseshoe(), nu=5.0, phi=np.eye(2), tau=0.3)
        xi = 1.7
        res = conjugate_oracle(data, hp, xi)
        ridge = np.linalg.solve(
            data.x.T @ data.x + np.eye(7) / (0.3 * xi), data.x.T @ data.y
        )
        assert np.abs(res.b_mean - ridge).max() < 1e-10

    def test_undefined_mean_reports_df_only(self):
        data = RegressionData(np.zeros((1, 1)), np.zeros((1, 3)))
        hp = HyperParams(priors.horseshoe(), nu=2.5, phi=np.eye(3), tau=1.0)
        res = conjugate_oracle(data, hp, 1.0)
        assert res.sigma_mean is None
        assert res.sigma_df == pytest.approx(3.5)

    def test_domain(self):
        data = RegressionData(np.zeros((2, 1)), np.zeros((2, 1)))
        hp = HyperParams(priors.horseshoe(), nu=3.0, phi=np.eye(1), tau=1.0)
        with pytest.raises(DomainError):
            conjugate_oracle(data, hp, 0.0)

    def test_chain_agrees_on_random_instance(self):
        rng = np.random.default_rng(6)
        data = RegressionData(rng.standard_normal((9, 4)), rng.standard_normal((9, 2)))
        hp = HyperParams(priors.horseshoe(), nu=6.0, phi=np.eye(2), tau=0.4)
        xi = 0.9
        oracle = conjugate_oracle(data, hp, xi)
        s = run_chain(data, hp, SamplerConfig(iterations=6000, burn_in=500, seed=3, fix_xi=xi))
        for idx in np.ndindex(4, 2):
            chain = s.b[:, idx[0], idx[1]]
            assert abs(chain.mean() - oracle.b_mean[idx]) < 4.0 * batch_means_se(chain)
        for idx in np.ndindex(2, 2):
            chain = s.sigma[:, idx[0], idx[1]]
            assert abs(chain.mean() - oracle.sigma_mean[idx]) < 4.0 * batch_means_se(chain)


class TestSuiteMechanics:
    def test_replicate_count_and_order(self):
        records, medians = run_experiment_suite(
            [1], replicates=3, iterations=60, burn_in=20, seed=9, workers=1
        )
        assert len(records) == 3
        assert [r.replicate for r in records] == [0, 1, 2]
        assert set(medians) == {1}

    def test_worker_invariance(self):
        kwargs = dict(replicates=2, iterations=80, burn_in=20, seed=11)
        seq, _ = run_experiment_suite([1], workers=1, **kwargs)
        par, _ = run_experiment_suite([1], workers=2, **kwargs)
        for a, b in zip(seq, par):
            da, db = dataclasses.asdict(a), dataclasses.asdict(b)
            da.pop("seconds"), db.pop("seconds")
            assert da == db

    def test_unknown_id(self):
        with pytest.raises(ConfigError):
            run_experiment_suite([9], replicates=1)


class TestGettingItRightMechanics:
    def test_returns_one_z_per_function(self):
        res = getting_it_right(
            n=6, p=3, q=1, family=priors.horseshoe(), nu=5.0, phi=np.eye(1),
            tau=0.5, samples_per_side=500, seed=1,
        )
        assert res.functions == ["b11", "b11_sq", "tr_sigma", "log_xi1", "log_zeta1"]
        assert res.z.shape == (5,)
        assert np.isfinite(res.z).all()

    def test_seed_changes_z_but_stays_bounded(self):
        zs = []
        for seed in (1, 2):
            res = getting_it_right(
                n=6, p=3, q=1, family=priors.horseshoe(), nu=6.0, phi=np.eye(1),
                tau=0.5, samples_per_side=2500, seed=seed,
            )
            zs.append(res.z)
        assert not np.allclose(zs[0], zs[1])
        assert np.abs(np.array(zs)).max() < 6.0
