import numpy as np
import pytest

from conftest import two_sample_instance
from convext import (
    DomainError,
    GridSpec,
    InfeasibleError,
    Instance,
    LabelConstraintSet,
    LossSpec,
    RegularizerSpec,
    golden_section,
    oracle_convexity,
    oracle_mip,
    oracle_psi,
)
from convext.checks import raw_surface


def hinge_term(label):
    s = 2 * label - 1
    return lambda T: 0.5 * T[:, 0] ** 2 + 5.0 * np.maximum(0.0, 1.0 - s * T[:, 0])


def test_golden_section_quadratic_and_edge():
    t, v = golden_section(lambda s: (s - 0.3) ** 2, -1.0, 1.0)
    assert t == pytest.approx(0.3, abs=1e-8)
    t, v = golden_section(lambda s: s, 0.0, 1.0)
    assert t == 0.0 and v == 0.0


@pytest.mark.parametrize("step", [0.01, 0.05])
def test_envelope_reference_value(step):
    v = oracle_psi(hinge_term(0), hinge_term(1), [0.0], 0.5, GridSpec((-3.0,), (3.0,), step))
    assert v == pytest.approx(0.5, abs=1e-6)


def test_box_expands_when_minimum_on_edge():
    # minimizer t0 = -5.5 lies outside the initial box
    v = oracle_psi(hinge_term(0), hinge_term(1), [-3.0], 0.5, GridSpec((-4.0,), (0.0,), 0.01))
    assert v == pytest.approx(11.375, abs=1e-6)


def test_near_one_approaches_d1():
    v = oracle_psi(hinge_term(0), hinge_term(1), [0.3], 1 - 1e-6, GridSpec((-3.0,), (3.0,), 0.01))
    assert v == pytest.approx(float(hinge_term(1)(np.array([[0.3]]))[0]), abs=1e-4)


def test_same_convex_function_is_not_split():
    f = lambda T: np.sum((T - 0.2) ** 2, axis=1) + np.abs(T[:, 0])
    v = oracle_psi(f, f, [0.5, -0.4], 0.3, GridSpec((-2.0, -2.0), (2.0, 2.0), 0.05))
    assert v == pytest.approx(f(np.array([[0.5, -0.4]]))[0], abs=1e-7)


def test_infinite_everywhere():
    inf = lambda T: np.full(len(T), np.inf)
    with pytest.raises(DomainError):
        oracle_psi(inf, inf, [0.0], 0.5, GridSpec((-1.0,), (1.0,), 0.1))
    with pytest.raises(DomainError):
        oracle_psi(hinge_term(0), hinge_term(1), [0.0], 1.0, GridSpec((-1.0,), (1.0,), 0.1))


def test_convexity_probe():
    assert oracle_convexity(lambda p: float(p @ p), [-1, -1], [1, 1], 2000) <= 1e-12
    assert oracle_convexity(raw_surface(), [-3.0, 0.0], [3.0, 1.0], 2000) > 0.01


def test_two_sample_instance_has_two_optima():
    inst = two_sample_instance()
    sol = oracle_mip(inst)
    assert sol.value == pytest.approx(0.5, abs=1e-7)
    from convext import solve_supervised

    for y, theta in (([1.0, 0.0], 1.0), ([0.0, 1.0], -1.0)):
        v, t = solve_supervised(inst, np.array(y))
        assert v == pytest.approx(0.5, abs=1e-7)
        assert t == pytest.approx([theta], abs=1e-5)


def test_fully_supervised_is_one_solve():
    inst = Instance(np.array([[1.0], [2.0]]), 1.0, LossSpec("logistic"), RegularizerSpec("l2"),
                    LabelConstraintSet(2, {0: 1, 1: 0}))
    sol = oracle_mip(inst)
    assert sol.y.tolist() == [1.0, 0.0]


def test_infeasible_labels():
    inst = Instance(np.array([[1.0], [2.0]]), 1.0, LossSpec("hinge"), RegularizerSpec("l2"),
                    LabelConstraintSet(2, {0: 1, 1: 1}, cardinality=1))
    with pytest.raises(InfeasibleError):
        oracle_mip(inst)


def test_enumeration_limit():
    inst = Instance(np.ones((13, 1)), 1.0, LossSpec("hinge"), RegularizerSpec("l2"), LabelConstraintSet(13))
    with pytest.raises(ValueError):
        oracle_mip(inst)
