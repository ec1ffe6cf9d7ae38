import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convext import DomainError, ConfigurationError, LossSpec, RegularizerSpec, loss_value, regularizer_value
from convext.losses import Interval, loss_derivative, loss_subdifferential, regularizer_subdifferential

HINGE = LossSpec("hinge")
LOGISTIC = LossSpec("logistic")
VANISHING = ["hinge", "squared_hinge", "logistic"]


def test_loss_values():
    assert loss_value(HINGE, 0.0, 1) == 1.0
    assert loss_value(HINGE, 2.0, 1) == 0.0
    assert loss_value(LOGISTIC, 0.0, 0) == pytest.approx(math.log(2.0), abs=1e-12)
    assert loss_value(LossSpec("squared_hinge"), 0.0, 0) == 0.5
    assert loss_value(LossSpec("squared_difference"), 0.25, 1) == pytest.approx(0.5625)


def test_class_weights_scale_each_label():
    loss = LossSpec("hinge", c0=2.0, c1=3.0)
    assert loss_value(loss, 0.0, 0) == 2.0
    assert loss_value(loss, 0.0, 1) == 3.0


def test_nonpositive_weights_rejected():
    with pytest.raises(ConfigurationError):
        LossSpec("hinge", c0=0.0)


def test_hinge_subdifferentials():
    assert loss_subdifferential(HINGE, 1.0, 1) == Interval(-1.0, 0.0)
    assert loss_subdifferential(HINGE, 0.0, 1) == Interval(-1.0, -1.0)
    assert loss_subdifferential(HINGE, -1.0, 0) == Interval(0.0, 1.0)
    assert loss_subdifferential(HINGE, 3.0, 1) == Interval(0.0, 0.0)


def test_logistic_derivative_at_zero():
    g = loss_subdifferential(LOGISTIC, 0.0, 1)
    assert g.is_point
    assert g.lo == pytest.approx(-0.5, abs=1e-12)


def test_subdifferential_needs_a_bit():
    with pytest.raises(DomainError):
        loss_subdifferential(HINGE, 0.0, 0.5)


@pytest.mark.parametrize("kind", VANISHING)
def test_losses_decay_and_are_monotone(kind):
    loss = LossSpec(kind)
    r = np.linspace(-5.0, 1000.0, 2001)
    one, zero = loss_value(loss, r, 1), loss_value(loss, -r, 0)
    assert np.all(np.diff(one) <= 1e-15)
    assert np.all(np.diff(zero) <= 1e-15)
    assert one[-1] < 1e-12 and zero[-1] < 1e-12


@pytest.mark.parametrize("kind", VANISHING + ["squared_difference"])
@settings(max_examples=60, deadline=None)
@given(r=st.floats(-20, 20), label=st.integers(0, 1))
def test_derivative_matches_finite_difference(kind, r, label):
    loss = LossSpec(kind, 1.3, 0.7)
    h = 1e-6
    if kind == "hinge" and abs(1.0 - (2 * label - 1) * r) < 1e-3:
        return
    fd = (loss_value(loss, r + h, label) - loss_value(loss, r - h, label)) / (2 * h)
    assert loss_derivative(loss, r, label) == pytest.approx(fd, abs=1e-5)


@pytest.mark.parametrize("kind", VANISHING)
@settings(max_examples=40, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), t=st.floats(0, 1), label=st.integers(0, 1))
def test_losses_convex_in_margin(kind, a, b, t, label):
    loss = LossSpec(kind)
    mid = loss_value(loss, t * a + (1 - t) * b, label)
    assert mid <= t * loss_value(loss, a, label) + (1 - t) * loss_value(loss, b, label) + 1e-9


def test_logistic_does_not_overflow():
    assert loss_value(LOGISTIC, -800.0, 1) == pytest.approx(800.0)
    assert loss_value(LOGISTIC, 800.0, 1) == 0.0


def test_regularizer_values():
    assert regularizer_value(RegularizerSpec("l2", half=True), [-1.2]) == pytest.approx(0.72)
    assert regularizer_value(RegularizerSpec("l1"), [1.0, -2.0]) == 3.0
    assert regularizer_value(RegularizerSpec("l2", half=False), [0.0]) == 0.0
    assert regularizer_value(RegularizerSpec("l2", half=False), [1.0, 2.0]) == 5.0


def test_regularizer_box():
    reg = RegularizerSpec.box_l1(2.0, m=2)
    assert regularizer_value(reg, [2.0, -2.0]) == 4.0
    with pytest.raises(DomainError):
        regularizer_value(reg, [2.5, 0.0])
    with pytest.raises(ConfigurationError):
        RegularizerSpec("l1", lower=(1.0,), upper=(0.0,))


def test_regularizer_subdifferential_includes_normal_cone():
    reg = RegularizerSpec.box_l1(1.0)
    lo, hi = regularizer_subdifferential(reg, [0.0])
    assert (lo[0], hi[0]) == (-1.0, 1.0)
    lo, hi = regularizer_subdifferential(reg, [1.0])
    assert lo[0] == 1.0 and hi[0] == math.inf


def test_interval_arithmetic():
    a, b = Interval(0.0, 1.0), Interval(-1.0, 0.0)
    assert a - b == Interval(0.0, 2.0)
    assert (a * -2.0) == Interval(-2.0, 0.0)
    assert a.intersect(Interval(2.0, 3.0)) is None
    assert a.intersect(Interval(1.0 + 1e-12, 3.0), tol=1e-9).is_point
    assert Interval(-math.inf, 2.0).midpoint() == 2.0
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
