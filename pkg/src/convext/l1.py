"""Binary envelopes of ``d(theta, y) = ||theta||_1 + C l(<x, theta>, y)`` on a box.

Writing ``theta1 = (theta - (1 - y) theta0) / y``, the envelope is a convex
problem in ``theta0`` alone over the reduced box ``[b', t']`` (the set of
``theta0`` whose partner ``theta1`` stays inside ``[b, t]``).  Along each
coordinate the L1 cost is flat between 0 and ``theta_i / (1 - y)`` and rises
with slope ``2 (1 - y)`` outside; the loss part only depends on the margin
``p = <x, theta0>`` with derivative ``(1 - y) C a(p)`` where

    a(p) = dl0(p) - dl1((x'theta - (1 - y) p) / y).

The minimizer is therefore found greedily: start from the cheapest point of
the flat region (``theta_prime_projection``) and, while ``C |x_i| a(p) > 2``,
push coordinates with the largest ``|x_i|`` to the end of their range, backing
the last one off to the root of ``C |x_k| a(p) = 2`` (``aux``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError
from .losses import Interval, LossKind, LossSpec, loss_subdifferential, loss_value

log = logging.getLogger(__name__)

__all__ = [
    "L1EnvelopeProblem",
    "L1Solution",
    "AuxResult",
    "a_multimap",
    "reduced_bounds",
    "theta_prime_projection",
    "aux",
    "solve_z_l1",
    "z_candidates",
    "l1_envelope_value",
]

VALIDATION_TOL = 1e-9
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class L1EnvelopeProblem:
    x: np.ndarray
    C: float
    loss: LossSpec
    theta: np.ndarray
    y: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ("x", "theta", "lower", "upper"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        m = self.x.size
        if not (self.theta.size == self.lower.size == self.upper.size == m):
            raise DomainError("x, theta and bounds differ in dimension")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise DomainError(
                "the L1 envelope at fractional y needs a bounded parameter box; "
                "on an unbounded box it is discontinuous"
            )
        if not 0.0 < self.y < 1.0:
            raise DomainError(f"y must lie in (0, 1), got {self.y}")
        tol = 1e-12 * np.maximum(1.0, np.abs(self.theta))
        if np.any(self.theta < self.lower - tol) or np.any(self.theta > self.upper + tol):
            raise DomainError("theta outside the parameter box")
        if self.loss.kind is LossKind.SQUARED_DIFFERENCE:
            raise ConfigurationError("the L1 closed form covers the logistic, hinge and squared hinge losses")

    @property
    def margin(self) -> float:
        return float(self.x @ self.theta)

    def partner_margin(self, q: float) -> float:
        return (self.margin - (1.0 - self.y) * q) / self.y

    def d(self, theta, label: int) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(np.abs(theta).sum()) + self.C * loss_value(self.loss, float(self.x @ theta), label)

    def partner(self, theta0: np.ndarray) -> np.ndarray:
        """``theta1`` for a given ``theta0``, snapped onto 0 and the box where rounding blurs them."""
        y = self.y
        theta1 = (self.theta - (1.0 - y) * theta0) / y
        slack = 8.0 * _EPS * (np.abs(self.theta) + (1.0 - y) * np.abs(theta0) + 1.0) / y
        theta1 = np.where(np.abs(theta1) <= slack, 0.0, theta1)
        theta1 = np.where(np.abs(theta1 - self.lower) <= slack, self.lower, theta1)
        theta1 = np.where(np.abs(theta1 - self.upper) <= slack, self.upper, theta1)
        return np.clip(theta1, self.lower, self.upper)

    def objective(self, theta0: np.ndarray) -> float:
        return (1.0 - self.y) * self.d(theta0, 0) + self.y * self.d(self.partner(theta0), 1)


@dataclass(frozen=True)
class L1Solution:
    value: float
    theta0: np.ndarray
    theta1: np.ndarray
    route: str
    k: Optional[int] = None
    z: Optional[float] = None


@dataclass
class AuxResult:
    V: np.ndarray
    k: Optional[int]
    z: Optional[float]
    exhausted: bool
    # lower end of a(<x, V>) after each push; non-increasing
    a_trace: List[float] = field(default_factory=list)


def a_multimap(p: L1EnvelopeProblem, q: float, tol: float = 0.0) -> Interval:
    """``a(q) = dl0(q) - dl1(partner margin of q)``."""
    ktol = tol * max(1.0, abs(q), abs(p.margin))
    # the partner margin divides by y, which magnifies rounding in q
    ktol1 = ktol + (8.0 * _EPS * (abs(p.margin) + abs(q)) / p.y if tol else 0.0)
    return loss_subdifferential(p.loss, q, 0, ktol) - loss_subdifferential(p.loss, p.partner_margin(q), 1, ktol1)


def reduced_bounds(p: L1EnvelopeProblem):
    """``b'``, ``t'``: the range of ``theta0`` keeping ``theta1`` inside ``[b, t]``."""
    y = p.y
    b_prime = np.maximum(p.lower, (p.theta - y * p.upper) / (1.0 - y))
    t_prime = np.minimum(p.upper, (p.theta - y * p.lower) / (1.0 - y))
    if np.any(b_prime > t_prime + 1e-12 * np.maximum(1.0, np.abs(p.theta) / (1.0 - y))):
        raise NumericError("reduced box is empty", {"b_prime": b_prime.tolist(), "t_prime": t_prime.tolist()})
    return b_prime, np.maximum(b_prime, t_prime)


def theta_prime_projection(p: L1EnvelopeProblem, b_prime=None, t_prime=None) -> np.ndarray:
    """Cheapest point of the flat L1 region, clamped to the reduced box.

    Where ``theta_i > 0`` and ``x_i > 0`` agree (zero counts as not positive on
    both sides) the coordinate goes to 0, otherwise to ``theta_i / (1 - y)``.
    """
    if b_prime is None or t_prime is None:
        b_prime, t_prime = reduced_bounds(p)
    agree = (p.theta > 0) == (p.x > 0)
    target = np.where(agree, 0.0, p.theta / (1.0 - p.y))
    return np.clip(target, b_prime, t_prime)


def _guard(p: L1EnvelopeProblem, V: np.ndarray, scale: float) -> bool:
    """Is there ``r in a(<x, V>)`` with ``|r C| scale <= 2``?"""
    if scale == 0.0 or p.C == 0.0:
        return True
    kappa = 2.0 / (p.C * scale)
    A = a_multimap(p, float(p.x @ V))
    return A.lo <= kappa and A.hi >= -kappa


def z_candidates(p: L1EnvelopeProblem, V: np.ndarray, k: int) -> List[float]:
    """Closed-form solutions of ``C |x_k| a(<x,V> - z x_k^2) = 2`` (hinge, squared hinge)."""
    y, xk2 = p.y, p.x[k] ** 2
    kappa = 2.0 / (p.C * abs(p.x[k]))
    v0 = float(p.x @ V)
    v1 = -p.partner_margin(v0)
    c0, c1 = p.loss.c0, p.loss.c1
    if p.loss.kind is LossKind.HINGE:
        # kink of l0 at margin -1; kink of l1 where the partner margin is +1
        return [(1.0 + v0) / xk2, (y + (1.0 - y) * v0 - p.margin) / ((1.0 - y) * xk2)]
    if p.loss.kind is LossKind.SQUARED_HINGE:
        return [
            (1.0 + v0 - kappa / c0) / xk2,
            y * (1.0 + v1 - kappa / c1) / ((1.0 - y) * xk2),
            y * (c0 * (1.0 + v0) + c1 * (1.0 + v1) - kappa) / ((y * c0 + (1.0 - y) * c1) * xk2),
        ]
    raise ValueError(f"no closed-form candidates for {p.loss.kind.value}")


def _bisect_margin(p: L1EnvelopeProblem, lo: float, hi: float, kappa: float) -> float:
    """Margin ``q`` in ``[lo, hi]`` with ``kappa in a(q)``; ``a`` is nondecreasing."""
    if a_multimap(p, hi).hi < kappa or a_multimap(p, lo).lo > kappa:
        raise NumericError(
            "root of C |x_k| a(q) = 2 is not bracketed",
            {"lo": lo, "hi": hi, "a_lo": a_multimap(p, lo).lo, "a_hi": a_multimap(p, hi).hi, "kappa": kappa},
        )
    for _ in range(300):
        if hi - lo <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        A = a_multimap(p, mid)
        if A.hi < kappa:
            lo = mid
        elif A.lo > kappa:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def solve_z_l1(p: L1EnvelopeProblem, V: np.ndarray, k: int, b_prime=None, t_prime=None, route: Optional[list] = None) -> float:
    """Back-off ``z`` for coordinate ``k``: ``V_k - z x_k`` puts ``C |x_k| a`` at 2.

    The margin after the back-off is ``<x, V> - z x_k^2``.
    """
    if p.x[k] == 0.0:
        raise DomainError("coordinate with x_k = 0 cannot move the margin")
    if b_prime is None or t_prime is None:
        b_prime, t_prime = reduced_bounds(p)
    xk = p.x[k]
    xk2 = xk * xk
    kappa = 2.0 / (p.C * abs(xk))
    v0 = float(p.x @ V)
    lo_k, hi_k = b_prime[k], t_prime[k]
    span = abs(xk) * (hi_k - lo_k)

    def feasible(z):
        new = V[k] - z * xk
        slack = VALIDATION_TOL * max(1.0, abs(new))
        return lo_k - slack <= new <= hi_k + slack

    # rounding in the partner margin grows like 1/y; allow for it on top of the fixed tolerance
    amp = 8.0 * _EPS * (abs(p.margin) + abs(v0) + 1.0) / p.y
    vtol = VALIDATION_TOL + p.C * abs(xk) * max(p.loss.c0, p.loss.c1) * amp

    def valid(z):
        A = a_multimap(p, v0 - z * xk2, VALIDATION_TOL) * (p.C * abs(xk))
        return A.contains(2.0, vtol)

    if p.loss.kind in (LossKind.HINGE, LossKind.SQUARED_HINGE):
        found = []
        for idx, z in enumerate(z_candidates(p, V, k)):
            if np.isfinite(z) and feasible(z) and valid(z):
                W = V.copy()
                W[k] = np.clip(V[k] - z * xk, lo_k, hi_k)
                found.append((p.objective(W), abs(z), z, idx))
        if found:
            best = min(found)
            if route is not None:
                route.append(f"candidate:{best[3]}")
            return best[2]
        raise NumericError(
            "no closed-form back-off candidate is valid",
            {"k": k, "V": V.tolist(), "theta": p.theta.tolist(), "x": p.x.tolist(), "y": p.y, "C": p.C,
             "candidates": z_candidates(p, V, k)},
        )
    q = _bisect_margin(p, v0, v0 + span, kappa)
    if route is not None:
        route.append("bisection")
    return (v0 - q) / xk2


def aux(p: L1EnvelopeProblem, theta_prime: np.ndarray, literal: bool = False, b_prime=None, t_prime=None, route=None) -> AuxResult:
    """Greedy coordinate push from ``theta_prime``.

    Coordinates are visited by decreasing ``|x_i|`` (ties by index).  The stopping
    test compares ``C |r|`` against ``2 / |x_i|`` for the largest ``|x_i|`` among
    coordinates not pushed yet; ``literal=True`` uses ``max |x|`` over all
    coordinates instead, which overshoots once the first coordinate is spent.
    """
    if b_prime is None or t_prime is None:
        b_prime, t_prime = reduced_bounds(p)
    V = np.array(theta_prime, dtype=float)
    absx = np.abs(p.x)
    order = sorted(range(V.size), key=lambda i: (-absx[i], i))
    top = absx.max() if V.size else 0.0
    trace = []
    for i in order:
        scale = top if literal else absx[i]
        if _guard(p, V, scale):
            return AuxResult(V, None, None, False, trace)
        V[i] = b_prime[i] if p.x[i] > 0 else t_prime[i]
        trace.append(a_multimap(p, float(p.x @ V)).lo)
        if _guard(p, V, scale):
            z = solve_z_l1(p, V, i, b_prime, t_prime, route)
            V[i] = np.clip(V[i] - z * p.x[i], b_prime[i], t_prime[i])
            return AuxResult(V, i, z, False, trace)
    log.debug("aux pushed every coordinate without meeting the stopping test")
    return AuxResult(V, None, None, True, trace)


def l1_envelope_value(p: L1EnvelopeProblem, literal: bool = False, route: Optional[list] = None) -> L1Solution:
    """Value and minimizing split of the L1 binary envelope at fractional ``y``."""
    if p.C == 0.0 or not np.any(p.x):
        value = (1.0 - p.y) * p.d(p.theta, 0) + p.y * p.d(p.theta, 1)
        return L1Solution(value, p.theta.copy(), p.theta.copy(), "degenerate")
    b_prime, t_prime = reduced_bounds(p)
    tp = theta_prime_projection(p, b_prime, t_prime)
    if _guard(p, tp, float(np.abs(p.x).max())):
        theta0, k, z, how = tp, None, None, "projection"
    else:
        res = aux(p, tp, literal, b_prime, t_prime, route)
        theta0, k, z = res.V, res.k, res.z
        how = "aux-exhausted" if res.exhausted else "aux"
    theta1 = p.partner(theta0)
    value = (1.0 - p.y) * p.d(theta0, 0) + p.y * p.d(theta1, 1)
    return L1Solution(value, theta0, theta1, how, k, z)
