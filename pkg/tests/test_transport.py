"""Transport estimators: exact matchings under a concave cost, the
coupled upper bound, and replication pooling."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mckean.transport import (TransportEstimate, coupled_distance, replicate,
                              second_moment, w1_upper_from_f,
                              wasserstein_1d_exact, wasserstein_assignment)


def quad_f(r):
    # concave cost of the quadratic rate profile (rho=1) in closed form
    r = np.asarray(r, dtype=float)
    r1 = 2.0 * np.sqrt(2.0)
    inner = r - r ** 3 / 48.0
    tail = 5.0 * np.sqrt(2.0) / 3.0 + 0.5 * (r - r1)
    return np.where(r <= r1, inner, tail)


# -- the estimate type ---------------------------------------------------------


def test_estimate_validates():
    TransportEstimate(1.0, 0.0, "exact-1d", 4)
    with pytest.raises(ValueError):
        TransportEstimate(1.0, 0.0, "sorted", 4)
    with pytest.raises(ValueError):
        TransportEstimate(1.0, 0.0, "exact-1d", 0)
    with pytest.raises(ValueError):
        TransportEstimate(np.nan, 0.0, "exact-1d", 4)
    with pytest.raises(ValueError):
        TransportEstimate(1.0, -0.1, "exact-1d", 4)


# -- coupled bound ---------------------------------------------------------------


def test_coupled_distance_example():
    # separations (1, R1 + 2): f is linear with slope 1/2 past R1, so the
    # average is (f(1) + f(R1) + 1) / 2
    r1 = 2.0 * np.sqrt(2.0)
    x = np.zeros(2)
    y = np.array([1.0, r1 + 2.0])
    est = coupled_distance(quad_f, x, y)
    want = (47.0 / 48.0 + 5.0 * np.sqrt(2.0) / 3.0 + 1.0) / 2.0
    assert est.value == pytest.approx(want, abs=1e-12)
    assert est.value == pytest.approx(2.168, abs=5e-4)
    assert est.method == "coupled-bound"
    assert est.std_error == 0.0
    assert est.n_samples == 2


def test_coupled_upper_bounds_exact():
    rng = np.random.default_rng(0)
    for n in (2, 7, 33, 64):
        x = rng.standard_normal((n, 2)) * 2.0
        y = rng.standard_normal((n, 2)) * 2.0 + 1.0
        up = coupled_distance(quad_f, x, y).value
        exact = wasserstein_assignment(quad_f, x, y).value
        assert exact <= up + 1e-12


# -- exact solvers ----------------------------------------------------------------


def test_sorted_matching_is_not_optimal():
    # {0,1} vs {2,3}: monotone pairing costs f(2); nesting costs
    # (f(3) + f(1))/2 which is cheaper for strictly concave f
    x = np.array([0.0, 1.0])
    y = np.array([2.0, 3.0])
    sorted_cost = float(quad_f(np.array([2.0]))[0])
    nested_cost = float(quad_f(np.array([3.0, 1.0])).sum()) / 2.0
    assert nested_cost < sorted_cost
    got = wasserstein_1d_exact(quad_f, x, y)
    assert got.value == pytest.approx(nested_cost, abs=1e-12)
    assert wasserstein_assignment(quad_f, x, y).value == pytest.approx(
        nested_cost, abs=1e-12)


@given(n=st.integers(2, 6), seed=st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_solvers_match_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-4, 4, n)
    y = rng.uniform(-4, 4, n)
    gaps = np.abs(x[:, None] - y[None, :])
    best = min(np.mean(quad_f(gaps[range(n), list(p)]))
               for p in itertools.permutations(range(n)))
    assert wasserstein_1d_exact(quad_f, x, y).value == pytest.approx(best, abs=1e-12)
    assert wasserstein_assignment(quad_f, x, y).value == pytest.approx(best, abs=1e-12)


@given(n=st.integers(2, 48), seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_dp_equals_assignment(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) * 3.0
    y = rng.standard_normal(n) * 3.0 + rng.uniform(-2, 2)
    a = wasserstein_1d_exact(quad_f, x, y).value
    b = wasserstein_assignment(quad_f, x, y).value
    assert a == pytest.approx(b, abs=1e-12)


def test_ties_and_duplicates_are_handled():
    x = np.array([0.0, 0.0, 1.0, 1.0])
    y = np.array([0.0, 1.0, 1.0, 2.0])
    a = wasserstein_1d_exact(quad_f, x, y).value
    b = wasserstein_assignment(quad_f, x, y).value
    assert a == pytest.approx(b, abs=1e-12)


def test_identical_samples_cost_zero():
    x = np.random.default_rng(1).standard_normal(20)
    assert wasserstein_1d_exact(quad_f, x, x.copy()).value == pytest.approx(0.0, abs=1e-12)


@given(seed=st.integers(0, 3000))
@settings(max_examples=25, deadline=None)
def test_triangle_inequality(seed):
    # f concave with f(0)=0 is subadditive, so f(|x-y|) is a metric and
    # the exact transport cost obeys the triangle inequality
    rng = np.random.default_rng(seed)
    n = rng.integers(2, 12)
    x, y, z = (rng.standard_normal((n, 2)) * rng.uniform(0.5, 3) for _ in range(3))
    dxy = wasserstein_assignment(quad_f, x, y).value
    dxz = wasserstein_assignment(quad_f, x, z).value
    dzy = wasserstein_assignment(quad_f, z, y).value
    assert dxy <= dxz + dzy + 1e-10


def test_cost_dominance_monotonicity():
    # f <= identity pointwise forces W_f <= W_id on the same samples
    rng = np.random.default_rng(9)
    x = rng.standard_normal(30) * 4.0
    y = rng.standard_normal(30) * 4.0
    wf = wasserstein_1d_exact(quad_f, x, y).value
    wid = wasserstein_1d_exact(lambda r: np.asarray(r, dtype=float), x, y).value
    assert wf <= wid + 1e-12


def test_translation_invariance():
    rng = np.random.default_rng(12)
    x = rng.standard_normal(25)
    y = rng.standard_normal(25)
    base = wasserstein_1d_exact(quad_f, x, y).value
    shifted = wasserstein_1d_exact(quad_f, x + 17.0, y + 17.0).value
    assert shifted == pytest.approx(base, abs=1e-9)


def test_input_guards():
    x = np.zeros(4)
    with pytest.raises(ValueError):
        wasserstein_1d_exact(quad_f, x, np.zeros(3))
    with pytest.raises(ValueError):
        wasserstein_1d_exact(quad_f, np.zeros(0), np.zeros(0))
    with pytest.raises(ValueError):
        wasserstein_1d_exact(quad_f, np.array([np.inf, 0, 0, 0]), x)
    with pytest.raises(ValueError):
        wasserstein_1d_exact(quad_f, np.zeros((4, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        wasserstein_1d_exact(quad_f, np.zeros(600), np.zeros(600))
    with pytest.raises(ValueError):
        wasserstein_assignment(quad_f, np.zeros((3000, 1)), np.zeros((3000, 1)))


# -- replication -------------------------------------------------------------------


def test_replicate_pools():
    def estimator(r):
        rng = np.random.default_rng(1000 + r)
        x = rng.standard_normal(32)
        y = rng.standard_normal(32)
        return wasserstein_1d_exact(quad_f, x, y)

    pooled = replicate(estimator, 16)
    assert pooled.method == "exact-1d"
    assert pooled.n_samples == 16 * 32
    assert pooled.std_error > 0.0
    singles = [estimator(r).value for r in range(16)]
    assert pooled.value == pytest.approx(np.mean(singles))
    assert pooled.std_error == pytest.approx(np.std(singles, ddof=1) / 4.0)


def test_replicate_standard_error_tracks_clt():
    rng = np.random.default_rng(0)
    draws = rng.standard_normal(400)

    pooled = replicate(
        lambda r: TransportEstimate(float(draws[r]), 0.0, "coupled-bound", 1),
        400)
    assert pooled.std_error == pytest.approx(1.0 / 20.0, rel=0.2)


def test_replicate_guards():
    good = lambda r: TransportEstimate(1.0, 0.0, "exact-1d", 2)
    with pytest.raises(ValueError):
        replicate(good, 1)

    def mixed(r):
        kind = "exact-1d" if r == 0 else "exact-assignment"
        return TransportEstimate(1.0, 0.0, kind, 2)

    with pytest.raises(ValueError):
        replicate(mixed, 2)


# -- helpers -----------------------------------------------------------------------


def test_second_moment():
    x = np.array([[1.0, 2.0], [3.0, 0.0]])
    assert second_moment(x) == pytest.approx(7.0)


def test_w1_conversion():
    assert w1_upper_from_f(0.5, 2.0) == 8.0
    with pytest.raises(ValueError):
        w1_upper_from_f(0.0, 1.0)
