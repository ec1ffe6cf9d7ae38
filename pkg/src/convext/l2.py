"""Binary envelopes of ``d(theta, y) = (rho/2) ||theta||^2 + C l(<x, theta>, y)``.

The split ``(1 - y) theta0 + y theta1 = theta`` that attains the envelope has the
form ``theta0 = theta - y C' x z`` and ``theta1 = theta + (1 - y) C' x z`` with
``C' = C / rho`` and a scalar ``z`` solving the monotone inclusion

    0 in R(z) = dl0(x'theta0) - dl1(x'theta1) - z.

For the hinge and squared hinge losses ``z`` is one of a handful of closed-form
candidates; for smooth losses it is found by bisection on ``R``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DomainError, NumericError
from .losses import Interval, LossKind, LossSpec, loss_subdifferential, loss_value

log = logging.getLogger(__name__)

__all__ = ["L2EnvelopeProblem", "L2Solution", "l2_root_residual", "solve_l2_envelope", "l2_candidates"]

VALIDATION_TOL = 1e-9


@dataclass(frozen=True)
class L2EnvelopeProblem:
    x: np.ndarray
    C: float
    loss: LossSpec
    theta: np.ndarray
    y: float
    rho: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        if self.x.shape != self.theta.shape:
            raise DomainError("x and theta differ in dimension")
        if not 0.0 < self.y < 1.0:
            raise DomainError(f"y must lie in (0, 1), got {self.y}")
        if self.C < 0 or self.rho <= 0:
            raise DomainError("C must be nonnegative and rho positive")

    @property
    def c_eff(self) -> float:
        return self.C / self.rho

    @property
    def xx(self) -> float:
        return float(self.x @ self.x)

    @property
    def margin(self) -> float:
        return float(self.x @ self.theta)

    def split(self, z: float):
        step = self.c_eff * z * self.x
        return self.theta - self.y * step, self.theta + (1.0 - self.y) * step

    def d(self, theta, label: int) -> float:
        theta = np.asarray(theta, dtype=float)
        return 0.5 * self.rho * float(theta @ theta) + self.C * loss_value(self.loss, float(self.x @ theta), label)

    def objective(self, z: float) -> float:
        t0, t1 = self.split(z)
        return (1.0 - self.y) * self.d(t0, 0) + self.y * self.d(t1, 1)


@dataclass(frozen=True)
class L2Solution:
    value: float
    theta0: np.ndarray
    theta1: np.ndarray
    z: float
    route: str


def l2_root_residual(p: L2EnvelopeProblem, z: float, tol: float = 0.0) -> Interval:
    """``R(z)``; ``z`` solves the optimality inclusion iff ``0 in R(z)``."""
    a, q, ce, y = p.margin, p.xx, p.c_eff, p.y
    m0 = a - y * ce * q * z
    m1 = a + (1.0 - y) * ce * q * z
    ktol = tol * max(1.0, abs(a))
    g0 = loss_subdifferential(p.loss, m0, 0, ktol)
    g1 = loss_subdifferential(p.loss, m1, 1, ktol)
    return g0 - g1 - z


def l2_candidates(p: L2EnvelopeProblem) -> List[float]:
    """Closed-form candidate set for ``z`` (hinge and squared hinge only)."""
    a, q, ce, y = p.margin, p.xx, p.c_eff, p.y
    c0, c1 = p.loss.c0, p.loss.c1
    k = ce * q
    if p.loss.kind is LossKind.HINGE:
        return [0.0, c0, c1, c0 + c1, (1.0 + a) / (y * k), (1.0 - a) / ((1.0 - y) * k)]
    if p.loss.kind is LossKind.SQUARED_HINGE:
        return [
            0.0,
            (c0 + c0 * a) / (1.0 + c0 * y * k),
            (c1 - c1 * a) / (1.0 + c1 * (1.0 - y) * k),
            (c0 + c1 + (c0 - c1) * a) / (1.0 + (c0 * y + c1 * (1.0 - y)) * k),
        ]
    raise ValueError(f"no closed-form candidates for {p.loss.kind.value}")


def _degenerate(p: L2EnvelopeProblem) -> L2Solution:
    value = (1.0 - p.y) * p.d(p.theta, 0) + p.y * p.d(p.theta, 1)
    return L2Solution(value, p.theta.copy(), p.theta.copy(), 0.0, "degenerate")


def _bisect(p: L2EnvelopeProblem) -> float:
    """Root of the decreasing set-valued residual by bisection."""
    a, q, ce, y = p.margin, p.xx, p.c_eff, p.y
    B = 2.0 * (p.loss.c0 + p.loss.c1) + 2.0 * abs(a) / (min(y, 1.0 - y) * ce * q + 1e-12)
    while True:
        lo_ok = l2_root_residual(p, -B).hi >= 0.0
        hi_ok = l2_root_residual(p, B).lo <= 0.0
        if lo_ok and hi_ok:
            break
        B *= 2.0
        if B > 1e8:
            raise NumericError(
                "bisection for the L2 envelope root is not bracketed",
                {"margin": a, "xx": q, "C": p.C, "y": y, "loss": p.loss.kind.value},
            )
    lo, hi = -B, B
    for _ in range(200):
        if hi - lo <= 1e-10 * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        r = l2_root_residual(p, mid)
        if r.lo > 0.0:
            lo = mid
        elif r.hi < 0.0:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def solve_l2_envelope(p: L2EnvelopeProblem, allow_fallback: bool = True) -> L2Solution:
    """Value and minimizing split of the binary envelope at fractional ``y``.

    ``route`` on the result records how ``z`` was obtained: ``"candidate"``,
    ``"bisection"``, ``"degenerate"`` (``C x = 0``) or ``"fallback"`` (no closed-form
    candidate validated; only reachable through rounding trouble).
    """
    if p.C == 0.0 or p.xx == 0.0:
        return _degenerate(p)

    if p.loss.kind in (LossKind.HINGE, LossKind.SQUARED_HINGE):
        valid = []
        for z in l2_candidates(p):
            if not math.isfinite(z):
                continue
            if l2_root_residual(p, z, VALIDATION_TOL).contains(0.0, VALIDATION_TOL):
                valid.append((p.objective(z), z))
        if valid:
            vmin = min(v for v, _ in valid)
            # ties go to the smaller |z|
            z = min((abs(z), z) for v, z in valid if v <= vmin + 1e-12)[1]
            route = "candidate"
        else:
            if not allow_fallback:
                raise NumericError(
                    "no closed-form candidate satisfies the root inclusion",
                    {"margin": p.margin, "xx": p.xx, "C": p.C, "y": p.y, "loss": p.loss.kind.value},
                )
            log.warning("L2 closed form: no candidate validated, falling back to bisection")
            z = _bisect(p)
            route = "fallback"
    else:
        z = _bisect(p)
        route = "bisection"

    t0, t1 = p.split(z)
    value = (1.0 - p.y) * p.d(t0, 0) + p.y * p.d(t1, 1)
    return L2Solution(value, t0, t1, float(z), route)
