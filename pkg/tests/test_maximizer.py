import itertools
import math

import numpy as np
import pytest

from smiselect.maximizer import (
    lazy_greedy,
    maximize,
    naive_greedy,
    sample_size,
    stochastic_greedy,
)
from smiselect.smi import FLQMI, FLVMI, GCMI, SMI_KINDS, eval_flqmi, make_smi

from conftest import joint_kernel


def opt_value(ev, n, budget):
    return max(ev(A) for A in itertools.combinations(range(n), budget))


def test_budget_zero():
    f = GCMI(np.ones((3, 1)))
    for fn in (naive_greedy, lazy_greedy, stochastic_greedy):
        res = fn(f, np.arange(3), 0)
        assert res.selected == [] and res.evals == 0


def test_negative_budget():
    with pytest.raises(ValueError):
        naive_greedy(GCMI(np.ones((3, 1))), np.arange(3), -1)


def test_gcmi_tie_rule():
    cross = np.array([[0.9], [0.1], [0.5], [0.5]])
    for fn in (naive_greedy, lazy_greedy):
        assert fn(GCMI(cross), np.arange(4), 2).selected == [0, 2]


def test_budget_truncates():
    res = naive_greedy(GCMI(np.ones((3, 1))), np.arange(3), 10)
    assert sorted(res.selected) == [0, 1, 2]


def test_naive_eval_count(rng):
    _, ground, cross, _ = joint_kernel(rng, 12, 2)
    res = naive_greedy(FLVMI(ground, cross), np.arange(12), 4)
    assert res.evals == 12 + 11 + 10 + 9


def test_lazy_gcmi_eval_count(rng):
    n, b = 25, 6
    res = lazy_greedy(GCMI(rng.uniform(size=(n, 3))), np.arange(n), b)
    assert res.evals == n + b - 1


def test_lazy_exhaustion_is_permutation(rng):
    _, ground, cross, _ = joint_kernel(rng, 9, 2)
    res = lazy_greedy(FLVMI(ground, cross), np.arange(9), 9)
    assert sorted(res.selected) == list(range(9))


def test_flqmi_approximation_over_seeds():
    ratios = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        cross = rng.uniform(size=(8, 3))
        res = naive_greedy(FLQMI(cross), np.arange(8), 3)
        ratios.append(res.value / opt_value(lambda A: eval_flqmi(A, cross), 8, 3))
    assert min(ratios) >= 1 - 1 / math.e


@pytest.mark.parametrize("kind", ["gcmi", "flqmi", "flvmi"])
def test_lazy_equals_naive(kind):
    for seed in range(25):
        rng = np.random.default_rng(seed)
        _, ground, cross, query = joint_kernel(rng, 20, 3, ridge=1e-3)
        a = naive_greedy(make_smi(kind, ground, cross, query), np.arange(20), 5)
        b = lazy_greedy(make_smi(kind, ground, cross, query), np.arange(20), 5)
        assert a.selected == b.selected
        np.testing.assert_allclose(a.gains, b.gains, atol=1e-12)
        assert b.evals <= a.evals
        assert np.all(np.diff(a.gains) <= 1e-9)


def test_gains_are_committed_gains(rng):
    _, ground, cross, _ = joint_kernel(rng, 15, 2)
    f = FLVMI(ground, cross)
    res = lazy_greedy(f, np.arange(15), 4)
    assert res.value == pytest.approx(f.evaluate(), abs=1e-9)
    assert f.selected == res.selected


def test_candidate_subset(rng):
    cross = rng.uniform(size=(10, 2))
    res = naive_greedy(GCMI(cross), [7, 3, 5], 2)
    assert set(res.selected) <= {3, 5, 7}


class TestStochastic:
    def test_sample_size(self):
        assert sample_size(100, 10, 0.1) == 24
        assert sample_size(100, 10, 0.1) == math.ceil(10 * math.log(10))

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.5, 2.0])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValueError):
            sample_size(10, 2, eps)
        with pytest.raises(ValueError):
            stochastic_greedy(GCMI(np.ones((10, 1))), np.arange(10), 2, epsilon=eps)

    def test_deterministic_given_seed(self, rng):
        _, ground, cross, _ = joint_kernel(rng, 200, 3)
        runs = [stochastic_greedy(FLVMI(ground, cross), np.arange(200), 10, 0.1, seed=5).selected
                for _ in range(2)]
        assert runs[0] == runs[1]
        other = stochastic_greedy(FLVMI(ground, cross), np.arange(200), 10, 0.1, seed=6).selected
        assert other != runs[0]

    def test_large_sample_is_naive(self, rng):
        _, ground, cross, _ = joint_kernel(rng, 12, 2)
        # n/B * ln(1/eps) >= n, so every step sees the whole pool
        a = stochastic_greedy(FLVMI(ground, cross), np.arange(12), 2, epsilon=0.01, seed=1)
        b = naive_greedy(FLVMI(ground, cross), np.arange(12), 2)
        assert a.selected == b.selected

    def test_evals_bounded_by_sample(self, rng):
        _, ground, cross, _ = joint_kernel(rng, 300, 3)
        res = stochastic_greedy(FLVMI(ground, cross), np.arange(300), 10, 0.1, seed=0)
        assert res.evals <= 10 * sample_size(300, 10, 0.1)


def test_maximize_dispatch(rng):
    cross = rng.uniform(size=(30, 2))
    assert maximize(GCMI(cross), np.arange(30), 3).selected == \
        naive_greedy(GCMI(cross), np.arange(30), 3).selected
    with pytest.raises(ValueError, match="unknown maximizer"):
        maximize(GCMI(cross), np.arange(30), 3, method="greedy")


@pytest.mark.parametrize("kind", SMI_KINDS)
def test_all_kinds_run(kind, rng):
    _, ground, cross, query = joint_kernel(rng, 40, 4, ridge=1e-3)
    for method in ("naive", "lazy", "stochastic"):
        res = maximize(make_smi(kind, ground, cross, query), np.arange(40), 6, method=method)
        assert len(res.selected) == 6 and len(set(res.selected)) == 6
