import numpy as np
import pytest

from conftest import random_instance, two_sample_instance
from convext import (
    ConfigurationError,
    InfeasibleError,
    Instance,
    LabelConstraintSet,
    LossSpec,
    RegularizerSpec,
    branch_and_bound,
    oracle_mip,
    project_labels,
    solve_relaxation,
)


def test_projection_onto_cardinality_slice():
    cons = LabelConstraintSet(2, cardinality=1)
    assert project_labels([0.7, 0.9], cons) == pytest.approx([0.4, 0.6])


def test_projection_is_idempotent():
    cons = LabelConstraintSet(3, cardinality=1)
    y = np.array([0.2, 0.3, 0.5])
    assert project_labels(y, cons) == pytest.approx(y)


def test_projection_keeps_fixed_labels_exact():
    cons = LabelConstraintSet(3, {0: 1}, cardinality=2)
    out = project_labels([0.3, 0.9, 0.8], cons)
    assert out[0] == 1.0
    assert out.sum() == pytest.approx(2.0)


def test_projection_with_inequalities_matches_a_qp():
    from scipy.optimize import minimize

    cons = LabelConstraintSet(3, linear=(((1.0, 1.0, 0.0), 1.0), ((0.0, -1.0, 1.0), 0.2)))
    y = np.array([0.9, 0.8, 0.9])
    ref = minimize(lambda v: np.sum((v - y) ** 2), np.full(3, 0.3), bounds=[(0, 1)] * 3, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda v, a=np.array(a), b=b: b - a @ v} for a, b in cons.linear],
                   options={"ftol": 1e-14})
    assert project_labels(y, cons) == pytest.approx(ref.x, abs=1e-6)


def test_projection_infeasible():
    with pytest.raises(InfeasibleError):
        project_labels([0.5, 0.5], LabelConstraintSet(2, {0: 1, 1: 1}, cardinality=1))


def test_two_sample_relaxation_is_sandwiched():
    inst = two_sample_instance()
    dec = solve_relaxation(inst, "decomposed")
    triv = solve_relaxation(inst, "trivial")
    assert triv.value - 1e-9 <= dec.value <= 0.5 + 1e-6
    assert dec.lower_bound <= dec.value
    assert dec.gap_estimate <= 1e-6
    assert inst.labels.contains(dec.y)
    assert solve_relaxation(inst, "theorem1").value == pytest.approx(0.5, abs=1e-6)


def test_subgradient_method_approaches_the_bundle_value():
    inst = two_sample_instance()
    ref = solve_relaxation(inst, "decomposed").value
    sg = solve_relaxation(inst, "decomposed", method="subgradient", budget=400)
    assert sg.lower_bound <= ref + 1e-7
    assert sg.value >= ref - 1e-7
    assert sg.value - ref < 1e-2


def test_fully_supervised_relaxation_is_the_convex_solve():
    inst = Instance(np.array([[1.0], [-0.4], [2.0]]), 2.0, LossSpec("logistic"), RegularizerSpec("l2"),
                    LabelConstraintSet(3, {0: 1, 1: 0, 2: 1}))
    assert solve_relaxation(inst).value == pytest.approx(oracle_mip(inst).value, abs=1e-6)


def test_squared_difference_relaxation_is_exact_at_integral_optimum():
    inst = Instance(np.array([[1.0], [1.1], [-1.0]]), 4.0, LossSpec("squared_difference"), RegularizerSpec("l2"),
                    LabelConstraintSet(3, cardinality=2))
    rel = solve_relaxation(inst)
    mip = oracle_mip(inst)
    if np.allclose(rel.y, np.round(rel.y), atol=1e-6):
        assert rel.value == pytest.approx(mip.value, abs=1e-6)
    assert branch_and_bound(inst).incumbent_value == pytest.approx(mip.value, abs=1e-6)


def test_relaxation_is_deterministic():
    inst = random_instance(np.random.default_rng(21), 5, "hinge", "l2", m=2)
    a = solve_relaxation(inst, seed=3)
    b = solve_relaxation(inst, seed=3)
    assert a.value == b.value and np.array_equal(a.y, b.y) and np.array_equal(a.theta, b.theta)


def test_two_sample_branch_and_bound():
    res = branch_and_bound(two_sample_instance())
    assert res.incumbent_value == pytest.approx(0.5, abs=1e-6)
    assert res.proven_gap <= 1e-6
    assert not res.node_cap_hit


def test_six_samples_cardinality_three():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(6, 2))
    inst = Instance(X, 3.0, LossSpec("hinge"), RegularizerSpec("l2"), LabelConstraintSet(6, cardinality=3))
    assert branch_and_bound(inst).incumbent_value == pytest.approx(oracle_mip(inst).value, abs=1e-5)


def test_all_fixed_is_one_node():
    inst = Instance(np.array([[1.0], [-1.0]]), 1.0, LossSpec("hinge"), RegularizerSpec("l2"),
                    LabelConstraintSet(2, {0: 1, 1: 0}))
    res = branch_and_bound(inst)
    assert res.nodes_explored == 1
    assert res.incumbent_value == pytest.approx(oracle_mip(inst).value, abs=1e-6)


def test_infeasible_root():
    inst = Instance(np.array([[1.0], [-1.0]]), 1.0, LossSpec("hinge"), RegularizerSpec("l2"),
                    LabelConstraintSet(2, {0: 0, 1: 0}, cardinality=2))
    with pytest.raises(InfeasibleError):
        branch_and_bound(inst)
    with pytest.raises(InfeasibleError):
        solve_relaxation(inst)


def test_node_cap_leaves_a_gap():
    inst = random_instance(np.random.default_rng(41), 6, "hinge", "l2", m=1, cardinality=False)
    res = branch_and_bound(inst, node_cap=1)
    full = branch_and_bound(inst)
    assert full.nodes_explored > 1
    assert res.node_cap_hit
    assert res.proven_gap > 0.0
    assert res.incumbent_value >= full.incumbent_value - 1e-9


def test_theorem1_not_for_branching():
    with pytest.raises(ConfigurationError):
        branch_and_bound(two_sample_instance(), "theorem1")


@pytest.mark.parametrize("loss,reg,extension", [("hinge", "l2", "decomposed"), ("squared_hinge", "l1", "decomposed"),
                                                ("logistic", "l2", "trivial")])
def test_node_bounds_never_exceed_the_subtree_optimum(loss, reg, extension):
    rng = np.random.default_rng(51)
    inst = random_instance(rng, 5, loss, reg, m=2, fixed=1)
    seen = []

    def check(node):
        if node.relaxation is None:
            return
        try:
            best = oracle_mip(inst.with_labels(node.labels)).value
        except InfeasibleError:
            return
        seen.append(node.index)
        assert node.relaxation.lower_bound <= best + 1e-7

    res = branch_and_bound(inst, extension, node_callback=check)
    assert seen
    assert res.incumbent_value == pytest.approx(oracle_mip(inst).value, abs=1e-5)


def test_branch_and_bound_is_deterministic():
    inst = random_instance(np.random.default_rng(61), 5, "logistic", "l1", m=2)
    a, b = branch_and_bound(inst, seed=2), branch_and_bound(inst, seed=2)
    assert a.incumbent_value == b.incumbent_value
    assert a.nodes_explored == b.nodes_explored
    assert np.array_equal(a.incumbent_y, b.incumbent_y)
