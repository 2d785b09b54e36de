import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftflow.evalkit import (
    GaussianTaskSpec,
    MetricError,
    check_action_bound,
    check_w2_interval_bound,
    emd_to_target,
    exact_w2,
    gaussian_flow_map_coef,
    gaussian_marginal_velocity,
    gaussian_velocity_coef,
)
from driftflow.sampler import TimeGrid
from driftflow.synthdata import PointBatch


def brute_w2(a, b):
    n = len(a)
    return min(np.mean(np.sum((a - b[list(p)]) ** 2, axis=1)) for p in itertools.permutations(range(n)))


@pytest.mark.parametrize("n", range(1, 7))
def test_exact_w2_matches_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        a, b = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        assert abs(exact_w2(a, b).w2_squared - brute_w2(a, b)) < 1e-12


def test_assignment_is_a_permutation(rng):
    res = exact_w2(rng.normal(size=(30, 2)), rng.normal(size=(30, 2)))
    assert sorted(res.assignment) == list(range(30))


def test_w2_of_shift(rng):
    a = rng.normal(size=(40, 2))
    c = np.array([0.3, -1.1])
    assert abs(exact_w2(a, a + c).w2_squared - c @ c) < 1e-12


def test_w2_identical_is_zero(rng):
    a = rng.normal(size=(17, 3))
    assert exact_w2(a, a[::-1]).w2_squared == 0.0


def test_w2_errors(rng):
    with pytest.raises(ValueError):
        exact_w2(rng.normal(size=(3, 2)), rng.normal(size=(4, 2)))
    with pytest.raises(ValueError):
        exact_w2(np.zeros((5, 2)), np.zeros((5, 2)), max_n=4)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.floats(0, 1), st.floats(0, 1))
def test_interval_bound_holds(seed, n, a, b):
    rng = np.random.default_rng(seed)
    t, r = min(a, b), max(a, b)
    rep = check_w2_interval_bound(rng.normal(size=(n, 2)), 3 * rng.normal(size=(n, 2)), t, r)
    assert rep.holds


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30), st.integers(1, 8))
def test_action_bound_holds(seed, n, nfe):
    rng = np.random.default_rng(seed)
    rep = check_action_bound(rng.normal(size=(n, 2)), rng.uniform(-2, 2, (n, 2)), TimeGrid.uniform(nfe))
    assert rep.holds and len(rep.interval_w2) == nfe


def test_action_bound_tight_for_translation(rng):
    x0 = rng.normal(size=(10, 2))
    rep = check_action_bound(x0, x0 + [1.0, 2.0], TimeGrid.uniform(4))
    assert abs(rep.action_sum - rep.bound) < 1e-12


def test_gaussian_coefficient_hand_value():
    assert abs(gaussian_velocity_coef(0.5) - 1.2) < 1e-15
    assert gaussian_velocity_coef(0.0) == -1.0
    np.testing.assert_allclose(gaussian_marginal_velocity(np.array([[1.0, -2.0]]), 0.5), [[1.2, -2.4]])


def test_gaussian_velocity_monte_carlo():
    # X_t and X1 - X0 are jointly Gaussian, so the regression slope is the conditional mean coefficient
    rng = np.random.default_rng(0)
    spec = GaussianTaskSpec()
    for t in (0.2, 0.5, 0.8):
        x0 = rng.standard_normal(10**7)
        x1 = spec.sigma1 * rng.standard_normal(10**7)
        xt = (1 - t) * x0 + t * x1
        slope = np.dot(xt, x1 - x0) / np.dot(xt, xt)
        assert abs(slope - gaussian_velocity_coef(t, spec)) < 0.01


def test_flow_map_solves_velocity_ode():
    spec = GaussianTaskSpec(sigma1=1.7)
    t, r, h = 0.3, 0.3 + 1e-6, 1e-6
    deriv = (gaussian_flow_map_coef(t, r, spec) - 1) / h
    assert abs(deriv - gaussian_velocity_coef(t, spec)) < 1e-5
    assert gaussian_flow_map_coef(0.0, 1.0, spec) == pytest.approx(1.7)


def test_gaussian_velocity_domain():
    with pytest.raises(ValueError):
        gaussian_marginal_velocity(np.zeros((1, 2)), 1.0)
    with pytest.raises(ValueError):
        GaussianTaskSpec(sigma1=0)


def test_emd_subsampling(rng):
    a, b = rng.normal(size=(50, 2)), rng.normal(size=(80, 2))
    v = emd_to_target(a, b, seed=3)
    assert v == emd_to_target(a, b, seed=3) and v > 0
    with pytest.raises(MetricError):
        emd_to_target(a, b, subsample=False)


def test_emd_per_class_mean(rng):
    a = rng.normal(size=(6, 2))
    labels = np.array([0, 0, 0, 1, 1, 1])
    shifted = a.copy()
    shifted[3:] += [2.0, 0.0]
    v = emd_to_target(PointBatch(a, labels), PointBatch(shifted, labels))
    assert abs(v - 0.5 * (0.0 + 4.0)) < 1e-12


def test_emd_label_errors(rng):
    a = rng.normal(size=(4, 2))
    with pytest.raises(MetricError):
        emd_to_target(PointBatch(a, np.zeros(4, int)), PointBatch(a))
    with pytest.raises(MetricError, match="class 1"):
        emd_to_target(PointBatch(a, np.array([0, 0, 1, 1])), PointBatch(a, np.zeros(4, int)))


def test_identical_sets_identity_assignment(rng):
    a = rng.normal(size=(12, 2))
    res = exact_w2(a, a)
    assert res.w2_squared == 0.0 and list(res.assignment) == list(range(12))


def test_w2_symmetry(rng):
    for _ in range(20):
        a, b = rng.normal(size=(25, 2)), rng.uniform(-2, 2, (25, 2))
        assert abs(exact_w2(a, b).w2_squared - exact_w2(b, a).w2_squared) < 1e-12


def test_w2_triangle_inequality():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        a, b, c = (rng.normal(size=(n, 2)) * rng.uniform(0.1, 3) for _ in range(3))
        ab, bc, ac = (np.sqrt(exact_w2(p, q).w2_squared) for p, q in ((a, b), (b, c), (a, c)))
        assert ac <= ab + bc + 1e-9


def test_interval_bound_hand_case():
    x0 = np.array([[0.0, 0.0], [1.0, 0.0]])
    x1 = np.array([[0.0, 1.0], [1.0, 1.0]])
    rep = check_w2_interval_bound(x0, x1, 0.0, 1.0)
    assert abs(rep.lhs - 1.0) < 1e-15 and abs(rep.rhs - 1.0) < 1e-15 and rep.holds
    same = check_w2_interval_bound(x0, x1, 0.4, 0.4)
    assert same.lhs == 0.0 and same.rhs == 0.0 and same.holds


def test_single_interval_action(rng):
    x0, x1 = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    rep = check_action_bound(x0, x1, TimeGrid.uniform(1))
    assert abs(rep.action_sum - exact_w2(x0, x1).w2_squared) < 1e-12 and rep.holds


@pytest.mark.parametrize("nfe", [2, 4, 8])
def test_action_bound_n64(nfe):
    rng = np.random.default_rng(nfe)
    assert check_action_bound(rng.normal(size=(64, 2)), rng.normal(size=(64, 2)) * 2, TimeGrid.uniform(nfe)).holds


def test_gaussian_symmetric_point_and_origin():
    assert gaussian_velocity_coef(0.5, GaussianTaskSpec(sigma1=1.0)) == 0.0
    for t in (0.0, 0.3, 0.9):
        assert np.all(gaussian_marginal_velocity(np.zeros((1, 2)), t) == 0)
