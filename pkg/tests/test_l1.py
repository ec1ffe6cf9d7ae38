import numpy as np
import pytest

from convext import DomainError, GridSpec, L1EnvelopeProblem, LossSpec, aux, l1_envelope_value, oracle_psi
from convext.l1 import a_multimap, reduced_bounds, solve_z_l1, theta_prime_projection, z_candidates

HINGE = LossSpec("hinge")


def problem(theta, y, loss=HINGE, x=(1.0,), C=5.0, bound=3.0):
    x = np.asarray(x, dtype=float)
    return L1EnvelopeProblem(x, C, loss, np.atleast_1d(theta), y, -bound * np.ones_like(x), bound * np.ones_like(x))


def oracle(p, step=0.005):
    b, t = reduced_bounds(p)

    def d(label):
        inside = lambda v: np.all(v >= p.lower - 1e-12) and np.all(v <= p.upper + 1e-12)
        return lambda T: np.array([p.d(v, label) if inside(v) else np.inf for v in T])

    return oracle_psi(
        d(0),
        d(1),
        p.theta, p.y, GridSpec(tuple(b), tuple(t), step),
    )


def test_a_multimap_double_kink():
    # q = -1 is the l0 kink and the partner margin 1 is the l1 kink
    p = problem(0.0, 0.5)
    A = a_multimap(p, -1.0)
    assert (A.lo, A.hi) == (0.0, 2.0)


def test_a_multimap_smooth_for_logistic():
    assert a_multimap(problem(0.2, 0.4, LossSpec("logistic")), 0.1).is_point


def test_projection_examples():
    b, t = np.array([-2.0]), np.array([2.0])
    assert theta_prime_projection(problem(0.5, 0.5), b, t) == pytest.approx([0.0])
    assert theta_prime_projection(problem(-0.5, 0.5), b, t) == pytest.approx([-1.0])
    assert theta_prime_projection(problem(3.0, 0.5, bound=4.0), np.array([1.0]), t) == pytest.approx([1.0])


def test_reduced_box_keeps_partner_inside():
    p = problem([2.5, -1.0], 0.3, x=(1.0, -0.5))
    b, t = reduced_bounds(p)
    for theta0 in (b, t):
        assert np.all(np.abs(p.partner(theta0)) <= 3.0 + 1e-12)


def test_hinge_candidate_formula():
    p = problem(0.0, 0.5)
    assert z_candidates(p, np.array([-2.0]), 0)[0] == pytest.approx(-1.0)


def test_guard_met_at_input_returns_input():
    # tiny C: the flat point already satisfies the stopping test
    p = problem(0.0, 0.5, C=0.1)
    res = aux(p, np.array([0.0]))
    assert res.k is None and not res.exhausted
    assert res.V == pytest.approx([0.0])
    s = l1_envelope_value(p)
    assert s.value == pytest.approx(0.5 * p.d([0.0], 0) + 0.5 * p.d([0.0], 1))


def test_zero_feature_coordinate_is_never_moved():
    p = problem([1.0, 0.7], 0.4, x=(1.0, 0.0), C=6.0)
    b, t = reduced_bounds(p)
    tp = theta_prime_projection(p, b, t)
    res = aux(p, tp, b_prime=b, t_prime=t)
    assert res.V[1] == tp[1]
    with pytest.raises(DomainError):
        solve_z_l1(p, tp, 1, b, t)


@pytest.mark.parametrize("theta,y", [(-2.0, 0.5), (1.5, 0.3), (0.0, 0.8), (-0.7, 0.1)])
def test_back_off_matches_oracle(theta, y):
    p = problem(theta, y, C=5.0)
    assert l1_envelope_value(p).value == pytest.approx(oracle(p), abs=1e-6)


@pytest.mark.parametrize("kind", ["hinge", "squared_hinge", "logistic"])
def test_random_two_dimensional_against_oracle(kind):
    rng = np.random.default_rng(11)
    for _ in range(8):
        p = problem(rng.uniform(-2, 2, size=2), float(rng.uniform(0.05, 0.95)),
                    LossSpec(kind, *rng.uniform(0.5, 2.0, size=2)), x=rng.normal(size=2),
                    C=float(rng.uniform(0.5, 8.0)), bound=2.5)
        assert l1_envelope_value(p).value == pytest.approx(oracle(p, 0.05), abs=1e-5)


def test_approaches_d0_near_zero_label():
    p_small = problem(0.8, 1e-6)
    assert l1_envelope_value(p_small).value == pytest.approx(p_small.d([0.8], 0), abs=1e-4)


def test_unbounded_box_rejected():
    with pytest.raises(DomainError):
        L1EnvelopeProblem(np.array([1.0]), 1.0, HINGE, np.array([0.0]), 0.5, np.array([-np.inf]), np.array([1.0]))


def test_literal_guard_is_available_for_comparison():
    p = problem([0.5, -0.3], 0.5, x=(2.0, 0.5), C=8.0)
    assert l1_envelope_value(p, literal=True).value >= l1_envelope_value(p).value - 1e-12
