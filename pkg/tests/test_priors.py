"""Mixing-density families: parsing, densities, tail splits, bounds, marginals."""

import math

import numpy as np
import pytest
from scipy import integrate

from mvshrink import priors as pr
from mvshrink.errors import ConfigError, DomainError

from _oracles import table_density, make_mixing_cdf, ks_statistic

# three parameter settings per family (parameter-free families repeat theirs)
SETTINGS = {
    "student-t": [pr.student_t(a) for a in (0.5, 1.0, 3.0)],
    "tpbn": [pr.tpbn(0.5, 0.5), pr.tpbn(1.5, 1.0), pr.tpbn(0.3, 2.0)],
    "horseshoe": [pr.horseshoe()] * 3,
    "neg": [pr.neg(a) for a in (0.5, 1.0, 2.5)],
    "gdp": [pr.gdp(1.0, 1.0), pr.gdp(0.5, 2.0), pr.gdp(2.0, 0.7)],
    "hib": [
        pr.hib(0.5, 0.5, 0.0, 1.0),
        pr.hib(1.0, 2.0, 0.5, 2.0),
        pr.hib(0.3, 0.7, 1.0, 0.5),
    ],
    "horseshoe-plus": [pr.horseshoe_plus()] * 3,
}
ALL_FAMILIES = [f for fams in SETTINGS.values() for f in fams]


def grid_for(family, n=60):
    lo = 1.0 + 1e-9 if family.kind == "horseshoe-plus" else 1e-6
    return np.exp(np.linspace(np.log(lo), np.log(1e6), n))


class TestParsing:
    @pytest.mark.parametrize(
        "spec",
        [
            "horseshoe",
            "tpbn:u=0.5,a=0.5",
            "neg:a=1",
            "student-t:a=3",
            "gdp:a=1,eta=1",
            "hib:u=0.5,a=0.5,s=0,phi2=1",
            "horseshoe-plus",
        ],
    )
    def test_round_trip(self, spec):
        fam = pr.parse_family(spec)
        assert pr.parse_family(pr.family_spec(fam)) == fam

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="valid families"):
            pr.parse_family("laplace:a=1")

    def test_unknown_key_lists_valid_keys(self):
        with pytest.raises(ConfigError, match="valid keys"):
            pr.parse_family("tpbn:u=0.5,b=0.5")

    def test_missing_key(self):
        with pytest.raises(ConfigError, match="missing"):
            pr.parse_family("gdp:a=1")

    def test_non_numeric_value(self):
        with pytest.raises(ConfigError):
            pr.parse_family("neg:a=abc")

    def test_positivity_enforced(self):
        with pytest.raises(DomainError):
            pr.student_t(-1.0)
        with pytest.raises(DomainError):
            pr.tpbn(0.0, 1.0)
        with pytest.raises(DomainError):
            pr.hib(0.5, 0.5, 0.0, 0.0)
        # s may be any real
        pr.hib(0.5, 0.5, -1.0, 1.0)


class TestAliases:
    def test_horseshoe_is_tpbn_half_half(self):
        xi = grid_for(pr.horseshoe())
        a = pr.mixing_density(pr.horseshoe(), xi)
        b = pr.mixing_density(pr.tpbn(0.5, 0.5), xi)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_neg_is_tpbn_u1(self):
        xi = np.array([0.01, 0.5, 3.0, 40.0])
        a = pr.mixing_density(pr.neg(1.0), xi)
        b = pr.mixing_density(pr.tpbn(1.0, 1.0), xi)
        np.testing.assert_allclose(a, b, rtol=1e-12)
        assert abs(pr.mixing_density(pr.neg(1.0), 3.0) - pr.mixing_density(pr.tpbn(1.0, 1.0), 3.0)) < 1e-12

    def test_tail_exponent_exceeds_one(self):
        for fam in ALL_FAMILIES:
            assert pr.tail_exponent(fam) > 1.0


class TestMixingDensity:
    def test_horseshoe_at_one(self):
        # xi^(-1/2) (1+xi)^(-1) has normalizer pi, so the value at 1 is 1/(2 pi)
        assert pr.mixing_density(pr.horseshoe(), 1.0) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-10)

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=pr.family_spec)
    def test_integrates_to_one(self, family):
        f = lambda x: pr.mixing_density(family, x)
        lo, _ = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-11, limit=400)
        hi, _ = integrate.quad(f, 1.0, np.inf, epsabs=0.0, epsrel=1e-11, limit=400)
        assert lo + hi == pytest.approx(1.0, abs=1e-8)

    def test_gdp_normalizer_closed_form(self):
        # integral of the unnormalized gdp density is Gamma(2a)/eta^(2a)
        for fam in SETTINGS["gdp"]:
            z = pr._normalizer(fam)
            expect = math.gamma(2.0 * fam.a) / fam.eta ** (2.0 * fam.a)
            assert z == pytest.approx(expect, rel=1e-9)

    def test_horseshoe_plus_normalizer_is_pi_squared(self):
        assert pr._normalizer(pr.horseshoe_plus()) == pytest.approx(math.pi**2, rel=1e-9)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            pr.mixing_density(pr.horseshoe(), 0.0)
        with pytest.raises(DomainError):
            pr.mixing_density(pr.horseshoe(), np.array([1.0, -2.0]))


class TestTailDecomposition:
    @pytest.mark.parametrize(
        "family, r",
        [
            (pr.student_t(1.0), 2.0),
            (pr.student_t(2.5), 3.5),
            (pr.tpbn(0.7, 1.2), 2.2),
            (pr.horseshoe(), 1.5),
            (pr.neg(0.8), 1.8),
            (pr.gdp(1.0, 1.0), 2.0),
            (pr.hib(0.5, 0.5, 0.0, 1.0), 1.5),
            (pr.horseshoe_plus(), 1.25),
        ],
    )
    def test_exponents(self, family, r):
        got, _ = pr.tail_decomposition(family, 2.0)
        assert got == pytest.approx(r)

    def test_horseshoe_l_at_two(self):
        _, l = pr.tail_decomposition(pr.horseshoe(), 2.0)
        assert l == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_tpbn_l_formula(self):
        fam = pr.tpbn(0.7, 1.2)
        xi = np.array([0.3, 2.0, 50.0])
        _, l = pr.tail_decomposition(fam, xi)
        np.testing.assert_allclose(l, (xi / (1.0 + xi)) ** (fam.a + fam.u), rtol=1e-12)

    def test_horseshoe_plus_at_sixteen(self):
        _, l = pr.tail_decomposition(pr.horseshoe_plus(), 16.0)
        assert l == pytest.approx(16.0**0.75 * math.log(16.0) / 60.0, rel=1e-10)
        assert l == pytest.approx(0.36968, abs=5e-6)

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=pr.family_spec)
    def test_reconstructs_table_density(self, family):
        # K xi^(-r) L(xi) must reproduce the literal density everywhere
        r = pr.tail_exponent(family)
        k = pr._tail_constant(family)
        for xi in grid_for(family, n=40):
            _, l = pr.tail_decomposition(family, xi)
            assert k * xi ** (-r) * l == pytest.approx(table_density(family, xi), rel=1e-10)


class TestSlowlyVaryingBounds:
    def test_horseshoe_example(self):
        lo, hi = pr.slowly_varying_bounds(pr.horseshoe(), 2.0)
        assert (lo, hi) == (pytest.approx(0.5), pytest.approx(1.0))
        _, l = pr.tail_decomposition(pr.horseshoe(), 2.0)
        assert lo <= l <= hi

    def test_student_example(self):
        fam = pr.student_t(1.0)
        lo, hi = pr.slowly_varying_bounds(fam, 10.0)
        assert (lo, hi) == (pytest.approx(0.9), pytest.approx(1.0))
        _, l = pr.tail_decomposition(fam, 10.0)
        assert l == pytest.approx(math.exp(-0.1), rel=1e-12)
        assert lo <= l <= hi

    def test_horseshoe_plus_example(self):
        lo, hi = pr.slowly_varying_bounds(pr.horseshoe_plus(), 16.0)
        assert (lo, hi) == (pytest.approx(0.125), pytest.approx(1.0))
        _, l = pr.tail_decomposition(pr.horseshoe_plus(), 16.0)
        assert lo <= l <= hi

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=pr.family_spec)
    def test_envelope_on_log_grid(self, family):
        xi = grid_for(family, n=80)
        _, l = pr.tail_decomposition(family, xi)
        lo, hi = pr.slowly_varying_bounds(family, xi)
        assert np.all(lo <= l + 1e-12)
        assert np.all(l <= hi + 1e-12)

    def test_horseshoe_plus_limit_point(self):
        # L is continuous at xi = 1 with limit 1/4, matching its lower bound there
        xi = 1.0 + 1e-12
        _, l = pr.tail_decomposition(pr.horseshoe_plus(), xi)
        assert l == pytest.approx(0.25, rel=1e-9)
        lo, hi = pr.slowly_varying_bounds(pr.horseshoe_plus(), xi)
        assert lo - 1e-12 <= l <= hi


class TestMarginalDensity:
    def test_horseshoe_q1_diverges_at_origin(self):
        assert pr.marginal_prior_density(pr.horseshoe(), 1.0, 1, 0.0) is pr.DIVERGES

    def test_light_origin_is_finite(self):
        val = pr.marginal_prior_density(pr.tpbn(2.0, 1.0), 1.0, 1, 0.0)
        assert isinstance(val, float) and val > 0

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(20240817)
        fam = pr.horseshoe()
        draws = pr.sample_mixing(fam, 400_000, rng)
        for radius in (0.25, 0.5, 1.0, 2.0, 4.0):
            vals = np.exp(-radius**2 / (2.0 * draws)) / np.sqrt(2.0 * np.pi * draws)
            mc, se = vals.mean(), vals.std(ddof=1) / np.sqrt(vals.size)
            quad_val = pr.marginal_prior_density(fam, 1.0, 1, radius)
            assert abs(quad_val - mc) < 3.0 * se

    @pytest.mark.parametrize(
        "family, q, tau",
        [(pr.horseshoe(), 2, 0.3), (pr.student_t(1.0), 1, 1.0), (pr.gdp(1.0, 1.0), 1, 0.5)],
    )
    def test_non_increasing_in_radius(self, family, q, tau):
        radii = np.linspace(0.01, 6.0, 50)
        vals = [pr.marginal_prior_density(family, tau, q, r) for r in radii]
        assert all(a >= b - 1e-12 * abs(a) for a, b in zip(vals, vals[1:]))

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            pr.marginal_prior_density(pr.horseshoe(), 0.0, 1, 1.0)
        with pytest.raises(DomainError):
            pr.marginal_prior_density(pr.horseshoe(), 1.0, 0, 1.0)
        with pytest.raises(DomainError):
            pr.marginal_prior_density(pr.horseshoe(), 1.0, 1, -1.0)


class TestGlobalScale:
    def test_default_tau_values(self):
        assert pr.default_tau(100, 1000) == pytest.approx(4.6599e-5, rel=1e-4)
        assert pr.default_tau(25, 125) == pytest.approx(8.918e-4, rel=1e-3)

    def test_default_tau_decreasing_in_p(self):
        taus = [pr.default_tau(100, p) for p in (10, 100, 1000, 10_000)]
        assert all(a > b for a, b in zip(taus, taus[1:]))

    def test_default_tau_domain(self):
        with pytest.raises(DomainError):
            pr.default_tau(1, 10)

    def test_theoretical_tau_max_values(self):
        assert pr.theoretical_tau_max(1e-3, 100, 1.5, 1.0) == pytest.approx(1e-14, rel=1e-12)
        assert pr.theoretical_tau_max(1.0, 1, 2.0, 3.0) == pytest.approx(1.0)

    def test_theoretical_tau_max_decreasing_in_u_prime(self):
        vals = [pr.theoretical_tau_max(1e-2, 50, 1.5, u) for u in (0.5, 1.0, 2.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_theoretical_tau_max_domain(self):
        with pytest.raises(DomainError):
            pr.theoretical_tau_max(1e-2, 50, 1.0, 1.0)


class TestSampleMixing:
    @pytest.mark.parametrize("family", [s[0] for s in SETTINGS.values()], ids=pr.family_spec)
    def test_ks_against_quadrature_cdf(self, family):
        rng = np.random.default_rng(7)
        draws = pr.sample_mixing(family, 20_000, rng)
        d = ks_statistic(draws, make_mixing_cdf(family))
        assert d < 0.02, f"KS={d:.4f} for {pr.family_spec(family)}"
