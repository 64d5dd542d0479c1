"""The finite-difference checker and the operator gradient suite."""

import numpy as np
import pytest

from dfreg.errors import NumericError, ShapeError
from dfreg.gradcheck import gradient_check
from dfreg.gradsuite import OP_NAMES, THRESHOLD, resolve_ops, run_suite
from dfreg.rng import make_rng


def _quadratic(x):
    return float((x * x).sum()), 2.0 * x


def test_quadratic_is_nearly_exact():
    rng = make_rng(30, 0)
    x = rng.uniform(-2, 2, (3, 4))
    assert gradient_check(_quadratic, x) < 1e-8


def test_constant_function_reports_zero():
    err = gradient_check(lambda x: (1.5, np.zeros_like(x)), np.ones(6))
    assert err == 0.0


def test_grad_shape_mismatch_raises():
    with pytest.raises(ShapeError, match="grad shape"):
        gradient_check(lambda x: (0.0, np.zeros(3)), np.ones((2, 2)))


def test_non_finite_probe_names_coordinate():
    def f(x):
        if x[1] > 1.0:
            return float("nan"), np.zeros_like(x)
        return float(x.sum()), np.ones_like(x)

    with pytest.raises(NumericError, match="flat coordinate 1"):
        gradient_check(f, np.array([0.0, 1.0 - 1e-6, 0.0]))


def test_corrupted_analytic_gradient_is_flagged():
    def broken(x):
        value, grad = _quadratic(x)
        grad = grad.copy()
        grad[0] += 0.5
        return value, grad

    assert gradient_check(broken, np.ones(4)) > 1e-2


def test_resolve_ops():
    assert resolve_ops(None) == list(OP_NAMES)
    assert resolve_ops(["conv2d"]) == ["conv2d"]
    assert resolve_ops(["conv"]) == ["conv2d"]
    with pytest.raises(Exception) as info:
        resolve_ops(["qr_decomposition"])
    assert "qr_decomposition" in str(info.value)


def test_suite_small_run_reports_all_requested_ops():
    results = run_suite(seed=3, cases=2, ops=["dense", "relu"])
    assert [r.op for r in results] == ["dense", "relu"]
    for r in results:
        assert r.cases == 2
        assert r.max_rel_error < THRESHOLD
        assert r.passed


def test_suite_huge_h_breaks_softmax():
    results = run_suite(seed=3, cases=2, ops=["softmax"], h=1.0)
    assert results[0].max_rel_error > THRESHOLD
    assert not results[0].passed


def test_suite_is_deterministic():
    a = run_suite(seed=11, cases=3, ops=["dfreg"])
    b = run_suite(seed=11, cases=3, ops=["dfreg"])
    assert a[0].max_rel_error == b[0].max_rel_error
