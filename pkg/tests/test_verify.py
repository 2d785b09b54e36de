import numpy as np
import pytest

from driftflow import verify


def test_relative_error():
    assert verify.relative_error([1.0, 0.0], [1.0, 0.0]) == 0.0
    assert verify.relative_error([0.0], [0.0]) == 0.0
    assert abs(verify.relative_error([2.0], [1.0]) - 0.5) < 1e-15


@pytest.mark.parametrize("suite, kw", [
    (verify.drift_equilibrium, {"n": 50}),
    (verify.gradient_fd, {"n": 10}),
    (verify.w2_bounds, {"n": 50, "max_points": 32}),
    (verify.action_bound, {"n": 50, "max_points": 32}),
    (verify.sinkhorn, {"n": 10}),
])
def test_small_suites_pass(suite, kw):
    res = suite(seed=11, **kw)
    assert res.passed and res.first_failing_seed is None and res.n_checked > 0


def test_gradient_check_detects_wrong_gradient(monkeypatch):
    # a sign flip in the analytic gradient must be caught
    from driftflow import netcore

    real = verify.backward_mse
    monkeypatch.setattr(verify, "backward_mse", lambda *a: -real(*a))
    res = verify.gradient_fd(seed=5, n=3)
    assert not res.passed and res.first_failing_seed == 5
    assert netcore.backward_mse is real


def test_short_run_infinitesimal_suite_reports():
    res = verify.infinitesimal_limit(seed=0, steps=5)
    assert set(res.metrics) == {"gap_h=0.2", "gap_h=0.1", "gap_h=0.05", "reduction"}
    assert all(np.isfinite(v) for v in res.metrics.values())


def test_unknown_suite():
    with pytest.raises(ValueError):
        verify.run_suite("nope")


def test_report_lines():
    res = verify.SuiteResult("x", False, 3, {"m": 0.5}, 42)
    assert res.lines() == ["x: FAIL (3 instances)", "  m = 0.5", "  first failing seed = 42"]
