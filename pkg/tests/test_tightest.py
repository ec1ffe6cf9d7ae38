import numpy as np
import pytest

from conftest import two_sample_instance
from convext import (
    ConfigurationError,
    DomainError,
    Instance,
    LabelConstraintSet,
    LabelSet,
    LossSpec,
    RegularizerSpec,
    build_extensions,
    enumerate_support_sets,
    tightest_extension_value,
)

SQUARE = LabelSet(2, ((0, 0), (0, 1), (1, 0), (1, 1)))


def test_segment_midpoint():
    sups = enumerate_support_sets(LabelSet(1, ((0,), (1,))), [0.5])
    assert len(sups) == 1
    assert sups[0].lambdas == pytest.approx((0.5, 0.5))


def test_vertex_gets_a_concentrated_support():
    sups = enumerate_support_sets(SQUARE, [1.0, 0.0])
    assert any(max(s.lambdas) == pytest.approx(1.0) for s in sups)


def test_square_center_in_every_triangle():
    sups = enumerate_support_sets(SQUARE, [0.5, 0.5])
    assert len(sups) == 4
    for s in sups:
        P = np.array(s.points, dtype=float)
        lam = np.array(s.lambdas)
        assert lam @ P == pytest.approx([0.5, 0.5])
        assert lam.sum() == pytest.approx(1.0)
        assert np.all(lam >= 0)


def test_affinely_dependent_subset():
    # three collinear labelings: least squares alone would return a negative weight
    Y = LabelSet(3, ((0, 0, 0), (1, 1, 1), (1, 0, 0), (0, 1, 1)))
    for s in enumerate_support_sets(Y, [0.5, 0.5, 0.5]):
        assert np.all(np.array(s.lambdas) >= 0)
        assert np.array(s.lambdas) @ np.array(s.points) == pytest.approx([0.5] * 3)


def test_outside_hull():
    with pytest.raises(DomainError):
        enumerate_support_sets(LabelSet(2, ((1, 0), (0, 1))), [0.2, 0.2])


def test_label_set_validation():
    with pytest.raises(ConfigurationError):
        LabelSet(2, ((0, 2),))
    with pytest.raises(ConfigurationError):
        LabelSet(2, ((0, 1), (0, 1)))
    with pytest.raises(ConfigurationError):
        enumerate_support_sets(LabelSet(9, ((0,) * 9,)), [0.0] * 9)


def test_from_constraints():
    Y = LabelSet.from_constraints(LabelConstraintSet(3, {0: 1}, cardinality=2))
    assert Y.members == ((1, 0, 1), (1, 1, 0))


def test_two_sample_cardinality_segment():
    inst = two_sample_instance()
    Y = LabelSet.from_constraints(inst.labels)
    # the minimum over theta of the tightest extension is the MIP optimum
    vals = [tightest_extension_value(inst, Y, [t], [0.5, 0.5]) for t in np.linspace(-1.5, 1.5, 13)]
    assert min(vals) == pytest.approx(0.5, abs=1e-6)
    assert tightest_extension_value(inst, Y, [1.0], [1.0, 0.0]) == pytest.approx(0.5)


def test_dominates_decomposed_with_l1_box():
    inst = Instance(np.array([[1.0], [0.6]]), 3.0, LossSpec("squared_hinge"), RegularizerSpec.box_l1(2.0),
                    LabelConstraintSet(2))
    model = build_extensions(inst)
    rng = np.random.default_rng(2)
    for _ in range(30):
        th, y = rng.uniform(-2, 2, size=1), rng.uniform(size=2)
        assert tightest_extension_value(inst, SQUARE, th, y) >= model.value(th, y) - 1e-6


def test_sampling_gives_an_upper_bound():
    inst = Instance(np.array([[1.0], [-0.5]]), 2.0, LossSpec("hinge"), RegularizerSpec("l2"), LabelConstraintSet(2))
    exact = tightest_extension_value(inst, SQUARE, [0.3], [0.5, 0.5])
    assert tightest_extension_value(inst, SQUARE, [0.3], [0.5, 0.5], sample=1, seed=4) >= exact - 1e-9


def test_mismatched_sizes():
    with pytest.raises(ConfigurationError):
        tightest_extension_value(two_sample_instance(), LabelSet(1, ((0,), (1,))), [0.0], [0.5])
