"""Row-selection rule: scores, default threshold, aggregation."""

import numpy as np
import pytest
from scipy.linalg import eigh

from mvshrink.errors import DomainError, LogicError, NumericalError
from mvshrink.sampler import PosteriorSamples
from mvshrink.selection import default_threshold, row_scores, select


def make_samples(b_list, sigma_list):
    b = np.stack(b_list)
    sigma = np.stack(sigma_list)
    return PosteriorSamples(
        b=b, sigma=sigma, xi=np.ones((b.shape[0], b.shape[1])), tau=1.0
    )


class TestRowScores:
    def test_zero_rows(self):
        assert np.all(row_scores(np.zeros((4, 3)), np.eye(3)) == 0.0)

    def test_identity_sigma(self):
        scores = row_scores(np.array([[3.0, 4.0]]), np.eye(2))
        assert scores[0] == pytest.approx(5.0)

    def test_scaled_sigma(self):
        scores = row_scores(np.array([[2.0, 0.0]]), 4.0 * np.eye(2))
        assert scores[0] == pytest.approx(1.0)

    def test_invariant_to_square_root_choice(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal((6, 3))
        m = rng.standard_normal((3, 3))
        sigma = m @ m.T + 3.0 * np.eye(3)
        vals, vecs = eigh(sigma)
        inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T  # symmetric root
        expect = np.linalg.norm(b @ inv_sqrt, axis=1)
        np.testing.assert_allclose(row_scores(b, sigma), expect, atol=1e-10)

    def test_not_spd_raises(self):
        with pytest.raises(NumericalError):
            row_scores(np.ones((2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestDefaultThreshold:
    def test_reference_value(self):
        assert default_threshold(100, 1000) == pytest.approx(5.707e-5, rel=1e-3)

    def test_decreasing_in_p(self):
        vals = [default_threshold(100, p) for p in (10, 100, 1000)]
        assert vals[0] > vals[1] > vals[2]

    def test_strictly_below_theory_scale(self):
        # a_n * p * sqrt(n / log p) = 1 / log n < 1 for n >= 3
        for n, p in [(3, 10), (50, 200), (1000, 5000)]:
            a = default_threshold(n, p)
            assert a * p * np.sqrt(n / np.log(p)) == pytest.approx(1.0 / np.log(n))
            assert a * p * np.sqrt(n / np.log(p)) < 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            default_threshold(1, 10)
        with pytest.raises(DomainError):
            default_threshold(10, 1)


class TestSelect:
    def test_all_zero_draws(self):
        s = make_samples([np.zeros((3, 2))] * 4, [np.eye(2)] * 4)
        res = select(s, a_n=0.5)
        assert np.all(res.inclusion_probability == 0.0)
        assert res.selected.size == 0

    def test_singleton_draw(self):
        b = np.array([[5.0, 0.0], [0.0, 0.0]])
        s = make_samples([b], [np.eye(2)])
        res = select(s, a_n=1.0)
        np.testing.assert_array_equal(res.inclusion_probability, [1.0, 0.0])
        np.testing.assert_array_equal(res.selected, [0])

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(1)
        s = make_samples(
            [rng.standard_normal((5, 2)) for _ in range(30)],
            [np.eye(2) + 0.1 * np.ones((2, 2))] * 30,
        )
        previous = None
        for a_n in (0.1, 0.5, 1.0, 2.0, 4.0):
            chosen = set(select(s, a_n).selected.tolist())
            if previous is not None:
                assert chosen <= previous
            previous = chosen

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        blist = [rng.standard_normal((4, 2)) for _ in range(20)]
        slist = [np.eye(2)] * 20
        res1 = select(make_samples(blist, slist), 0.8)
        order = rng.permutation(20)
        res2 = select(
            make_samples([blist[i] for i in order], [slist[i] for i in order]), 0.8
        )
        np.testing.assert_allclose(
            res1.inclusion_probability, res2.inclusion_probability, atol=1e-15
        )

    def test_domain_and_logic_errors(self):
        s = make_samples([np.zeros((2, 1))], [np.eye(1)])
        with pytest.raises(DomainError):
            select(s, a_n=0.0)
        with pytest.raises(DomainError):
            select(s, a_n=1.0, probability_cutoff=1.0)
        empty = PosteriorSamples(
            b=np.empty((0, 2, 1)), sigma=np.empty((0, 1, 1)),
            xi=np.empty((0, 2)), tau=1.0,
        )
        with pytest.raises(LogicError):
            select(empty, a_n=1.0)
