"""Tightest convex extensions of a per-sample term ``d(theta, y)`` from ``y in {0, 1}`` to ``[0, 1]``.

For fractional ``y`` the extension is the binary envelope

    Psi(theta, y) = inf (1 - y) d0(theta0) + y d1(theta1)
                    s.t. (1 - y) theta0 + y theta1 = theta,

and at integer ``y`` it is ``d`` itself.  ``TermExtension`` bundles the term with
the method used to evaluate ``Psi``.  Subgradients come from a common
subgradient ``v`` of ``d0`` at ``theta0`` and ``d1`` at ``theta1`` together with
``w = v'theta0 - v'theta1 + d1(theta1) - d0(theta0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError, UnsupportedMethodError
from .l1 import L1EnvelopeProblem, l1_envelope_value
from .l2 import L2EnvelopeProblem, solve_l2_envelope
from .losses import (
    Interval,
    LossKind,
    LossSpec,
    RegKind,
    RegularizerSpec,
    _raw_regularizer,
    loss_subdifferential,
    loss_value,
    regularizer_subdifferential,
)

__all__ = [
    "Method",
    "TermExtension",
    "SubgradientPair",
    "Cut",
    "xi_map",
    "envelope_value",
    "envelope_solution",
    "envelope_subgradient",
    "envelope_cut",
    "trivial_extension_value",
    "logistic_partial_extension_value",
    "logistic_partial_subgradient",
    "Y_TOL",
    "W_CAP",
]

Y_TOL = 1e-12
W_CAP = 1e6
KINK_TOL = 1e-9


class Method(str, Enum):
    CLOSED_FORM_L2 = "closed_form_l2"
    BISECTION_L2 = "bisection_l2"
    CLOSED_FORM_L1 = "closed_form_l1"
    TRIVIAL = "trivial"
    LOGISTIC_PARTIAL = "logistic_partial"


@dataclass(frozen=True)
class TermExtension:
    """One term ``d(theta, y)`` together with the way its envelope is evaluated.

    * closed-form / bisection L2 and closed-form L1: ``d = omega + C l(<x, theta>, y)``;
    * trivial: ``d = C l(<x, theta>, y)`` (the regularizer lives elsewhere);
    * logistic partial: ``d = omega - C y <x, theta>`` with ``omega`` an L2 regularizer.
    """

    x: np.ndarray
    C: float
    loss: LossSpec
    reg: RegularizerSpec
    method: Method

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "method", Method(self.method))
        if not self.C >= 0:
            raise ConfigurationError("C must be nonnegative")
        m, meth, reg = self.x.size, self.method, self.reg
        lo, hi = reg.box(m)
        if meth in (Method.CLOSED_FORM_L2, Method.BISECTION_L2, Method.LOGISTIC_PARTIAL):
            if reg.kind is not RegKind.L2:
                raise ConfigurationError(f"{meth.value} needs the L2 regularizer")
            if np.any(np.isfinite(lo)) or np.any(np.isfinite(hi)):
                raise ConfigurationError("the L2 envelopes are for an unconstrained parameter")
        if meth is Method.CLOSED_FORM_L2 and self.loss.kind not in (LossKind.HINGE, LossKind.SQUARED_HINGE):
            raise ConfigurationError("closed-form L2 candidates exist for the hinge and squared hinge losses")
        if meth is Method.CLOSED_FORM_L1:
            if reg.kind is not RegKind.L1:
                raise ConfigurationError("closed_form_l1 needs the L1 regularizer")
            if self.loss.kind is LossKind.SQUARED_DIFFERENCE:
                raise ConfigurationError("closed_form_l1 covers the logistic, hinge and squared hinge losses")

    @property
    def m(self) -> int:
        return self.x.size

    @property
    def rho(self) -> float:
        return self.reg.scale

    @property
    def box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.reg.box(self.m)

    @property
    def bounded(self) -> bool:
        return self.reg.is_bounded(self.m)

    def _check(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.m,):
            raise DomainError(f"theta has shape {theta.shape}, expected ({self.m},)")
        lo, hi = self.box
        tol = Y_TOL * np.maximum(1.0, np.abs(theta))
        if np.any(theta < lo - tol) or np.any(theta > hi + tol):
            raise DomainError(f"theta={theta.tolist()} outside the parameter box")
        return theta

    def d_batch(self, T, label) -> np.ndarray:
        """``d(theta, label)`` for each row of ``T``; ``inf`` outside the box.

        ``label`` may be fractional, which evaluates the raw formula (not the extension).
        """
        T = np.atleast_2d(np.asarray(T, dtype=float))
        lo, hi = self.box
        inbox = np.all((T >= lo - Y_TOL) & (T <= hi + Y_TOL), axis=1)
        r = T @ self.x
        if self.method is Method.LOGISTIC_PARTIAL:
            val = _raw_regularizer(self.reg, T) - self.C * label * r
        else:
            val = self.C * np.asarray(loss_value(self.loss, r, label))
            if self.method is not Method.TRIVIAL:
                val = val + _raw_regularizer(self.reg, T)
        return np.where(inbox, val, np.inf)

    def d(self, theta, label) -> float:
        theta = self._check(theta)
        return float(self.d_batch(theta[None, :], label)[0])

    def d0(self, theta) -> float:
        return self.d(theta, 0)

    def d1(self, theta) -> float:
        return self.d(theta, 1)

    def subdifferential(self, theta, label: int, tol: float = 0.0):
        """``(lo, hi)`` arrays with ``prod [lo_i, hi_i]`` containing ``(delta d_label)(theta)``.

        The loss contributes ``C x g`` for ``g`` in an interval; the box is exact
        only when that interval is a point (see ``_common_subgradient``).
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        g = self._loss_interval(theta, label, tol)
        if self.method is Method.TRIVIAL:
            rlo, rhi = np.zeros(self.m), np.zeros(self.m)
            blo, bhi = self.box
            s = tol * np.maximum(1.0, np.abs(theta))
            rlo = np.where(theta <= blo + s, -np.inf, rlo)
            rhi = np.where(theta >= bhi - s, np.inf, rhi)
        else:
            rlo, rhi = regularizer_subdifferential(self.reg, theta, tol)
        return rlo, rhi, g

    def _loss_interval(self, theta: np.ndarray, label: int, tol: float) -> Interval:
        r = float(self.x @ theta)
        if self.method is Method.LOGISTIC_PARTIAL:
            return Interval.point(-float(label))
        return loss_subdifferential(self.loss, r, label, tol * max(1.0, abs(r)))


class SubgradientPair(NamedTuple):
    """``(v, w)`` in the subdifferential of the extension at ``(theta, y)``.

    At ``y = 0`` and ``y = 1`` the y-component is unbounded (``w`` is ``-inf`` and
    ``+inf`` respectively) and ``w_flag`` is -1 or +1; use ``clamped_w`` for steps.
    """

    v: np.ndarray
    w: float
    w_flag: int = 0

    def clamped_w(self, cap: float = W_CAP) -> float:
        if self.w_flag:
            return self.w_flag * cap
        return float(np.clip(self.w, -cap, cap))


class Cut(NamedTuple):
    """Affine minorant ``value + v'(theta' - theta) + w (y' - y)`` valid on the whole domain."""

    value: float
    v: np.ndarray
    w: float


def xi_map(theta, y: float, t) -> np.ndarray:
    """``(theta - (1 - y) t) / y``, the partner of ``t`` in a split of ``theta``."""
    if not y > 0:
        raise DomainError("xi_map needs y > 0")
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    return (theta - (1.0 - y) * t) / y


def _label_of(y: float) -> Optional[int]:
    if not -Y_TOL <= y <= 1.0 + Y_TOL:
        raise DomainError(f"y must lie in [0, 1], got {y}")
    if y <= Y_TOL:
        return 0
    if y >= 1.0 - Y_TOL:
        return 1
    return None


def _degenerate(ext: TermExtension) -> bool:
    return ext.C == 0.0 or not np.any(ext.x)


def trivial_extension_value(ext: TermExtension, theta, y: float) -> float:
    """``d`` at integer ``y`` and 0 in between (terms that vanish at infinity)."""
    theta = ext._check(theta)
    label = _label_of(y)
    if label is not None:
        return ext.d(theta, label)
    return 0.0


def logistic_partial_extension_value(C: float, x, theta, y: float, rho: float = 2.0) -> float:
    """Envelope of ``(rho/2) ||theta||^2 - C y <x, theta>``.

    Equals ``(rho/2) ||theta - y c||^2 - (rho/2) y ||c||^2`` with ``c = (C / rho) x``;
    the default ``rho = 2`` is the unhalved squared norm.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    _label_of(y)
    c = (C / rho) * x
    u = theta - y * c
    return float(0.5 * rho * (u @ u) - 0.5 * rho * y * (c @ c))


def logistic_partial_subgradient(C: float, x, theta, y: float, rho: float = 2.0) -> SubgradientPair:
    """Gradient of ``logistic_partial_extension_value`` in ``(theta, y)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    c = (C / rho) * x
    u = theta - y * c
    return SubgradientPair(rho * u, float(-rho * (u @ c) - 0.5 * rho * (c @ c)))


def envelope_solution(ext: TermExtension, theta, y: float):
    """``(value, theta0, theta1)`` attaining the envelope at fractional ``y``."""
    theta = ext._check(theta)
    if _label_of(y) is not None:
        raise DomainError("envelope_solution needs fractional y")
    if _degenerate(ext):
        value = (1.0 - y) * ext.d(theta, 0) + y * ext.d(theta, 1)
        return value, theta.copy(), theta.copy()
    meth = ext.method
    if meth in (Method.CLOSED_FORM_L2, Method.BISECTION_L2):
        p = L2EnvelopeProblem(ext.x, ext.C, ext.loss, theta, y, ext.rho)
        s = solve_l2_envelope(p)
        return s.value, s.theta0, s.theta1
    if meth is Method.CLOSED_FORM_L1:
        if not ext.bounded:
            raise DomainError(
                "L1 envelope at fractional y needs a bounded box: on an unbounded box "
                "the extension jumps at y = 0 and y = 1 and the infimum need not be attained"
            )
        lo, hi = ext.box
        s = l1_envelope_value(L1EnvelopeProblem(ext.x, ext.C, ext.loss, theta, y, lo, hi))
        return s.value, s.theta0, s.theta1
    raise UnsupportedMethodError(f"{meth.value} does not expose a minimizing split")


def envelope_value(ext: TermExtension, theta, y: float) -> float:
    """Value of the tightest convex extension of the term at ``(theta, y)``."""
    theta = ext._check(theta)
    label = _label_of(y)
    if label is not None:
        return ext.d(theta, label)
    if _degenerate(ext) and not (ext.method is Method.CLOSED_FORM_L1 and not ext.bounded):
        return (1.0 - y) * ext.d(theta, 0) + y * ext.d(theta, 1)
    if ext.method is Method.TRIVIAL:
        return 0.0
    if ext.method is Method.LOGISTIC_PARTIAL:
        return logistic_partial_extension_value(ext.C, ext.x, theta, y, ext.rho)
    return envelope_solution(ext, theta, y)[0]


def _midpoint_choice(lo: float, hi: float) -> float:
    return Interval(lo, hi).midpoint()


def _common_subgradient(
    ext: TermExtension, theta0: np.ndarray, theta1: np.ndarray, tol: float = KINK_TOL, tol1: Optional[float] = None
) -> np.ndarray:
    """An element of ``(delta d0)(theta0) & (delta d1)(theta1)``.

    Both subdifferentials have the form ``R_j + C x G_j`` with ``R_j`` a box and
    ``G_j`` an interval.  A common element exists iff some ``s`` in ``G0 - G1``
    satisfies ``C x_i s in R1_i - R0_i`` for every coordinate; ``s`` is chosen as
    the midpoint of the feasible interval and the rest follows coordinatewise.
    """
    tol1 = tol if tol1 is None else tol1
    r0lo, r0hi, G0 = ext.subdifferential(theta0, 0, tol)
    r1lo, r1hi, G1 = ext.subdifferential(theta1, 1, tol1)
    tol = max(tol, tol1)
    cx = ext.C * ext.x
    S = G0 - G1
    for i in range(ext.m):
        if cx[i] == 0.0:
            continue
        # C x_i s = r1_i - r0_i
        span = Interval(r1lo[i] - r0hi[i], r1hi[i] - r0lo[i]) * (1.0 / cx[i])
        slack = tol * max(1.0, abs(S.lo), abs(S.hi)) + tol / abs(cx[i])
        S = S.intersect(span, slack)
        if S is None:
            raise NumericError(
                "no common subgradient at the envelope minimizer",
                {"theta0": theta0.tolist(), "theta1": theta1.tolist(), "coordinate": i},
            )
    s = S.midpoint()
    g0_set = G0.intersect(G1 + s, tol * max(1.0, abs(s)))
    if g0_set is None:
        raise NumericError("inconsistent loss subgradients", {"s": s, "G0": G0, "G1": G1})
    g0 = g0_set.midpoint()
    v = np.empty(ext.m)
    for i in range(ext.m):
        # r0_i in R0_i and r0_i + C x_i s in R1_i
        lo = max(r0lo[i], r1lo[i] - cx[i] * s)
        hi = min(r0hi[i], r1hi[i] - cx[i] * s)
        if lo > hi:
            lo = hi = 0.5 * (lo + hi)
        v[i] = _midpoint_choice(lo, hi) + cx[i] * g0
    return v


def _single_subgradient(ext: TermExtension, theta: np.ndarray, label: int, tol: float = KINK_TOL) -> np.ndarray:
    rlo, rhi, G = ext.subdifferential(theta, label, tol)
    g = G.midpoint()
    return np.array([_midpoint_choice(lo, hi) for lo, hi in zip(rlo, rhi)]) + ext.C * ext.x * g


def envelope_subgradient(ext: TermExtension, theta, y: float) -> SubgradientPair:
    """A subgradient ``(v, w)`` of the extension at ``(theta, y)``.

    At integer ``y``, ``v`` is a subgradient of ``d(., y)`` and ``w`` is infinite,
    pointing out of the label interval.
    """
    theta = ext._check(theta)
    label = _label_of(y)
    if label is not None:
        v = _single_subgradient(ext, theta, label)
        flag = -1 if label == 0 else 1
        return SubgradientPair(v, flag * math.inf, flag)
    if ext.method is Method.CLOSED_FORM_L1 and not ext.bounded:
        raise DomainError("L1 envelope at fractional y needs a bounded box")
    if _degenerate(ext):
        v = _common_subgradient(ext, theta, theta)
        return SubgradientPair(v, ext.d(theta, 1) - ext.d(theta, 0))
    if ext.method is Method.TRIVIAL:
        return SubgradientPair(np.zeros(ext.m), 0.0)
    if ext.method is Method.LOGISTIC_PARTIAL:
        return logistic_partial_subgradient(ext.C, ext.x, theta, y, ext.rho)
    _, t0, t1 = envelope_solution(ext, theta, y)
    # theta1 (theta0) is recovered by dividing by y (1 - y); widen its kink tests accordingly
    scale = float(np.max(np.abs(theta)) + np.max(np.abs(t0)) + np.max(np.abs(t1)))
    amp = 16.0 * np.finfo(float).eps * scale
    v = _common_subgradient(ext, t0, t1, KINK_TOL + amp / (1.0 - y), KINK_TOL + amp / y)
    w = float(v @ t0 - v @ t1 + ext.d(t1, 1) - ext.d(t0, 0))
    return SubgradientPair(v, w)


def envelope_cut(ext: TermExtension, theta, y: float, nudge: float = 1e-7) -> Cut:
    """A finite affine minorant of the extension that is (nearly) tight at ``(theta, y)``.

    Away from the label boundary this is the subgradient cut.  At ``y`` within
    ``nudge`` of 0 or 1 the subgradient cut is taken at the nearby fractional
    point ``y -> nudge`` (or ``1 - nudge``), which stays valid everywhere and
    avoids the infinite ``w`` of the boundary.
    """
    theta = ext._check(theta)
    _label_of(y)
    yq = min(max(y, nudge), 1.0 - nudge)
    pair = envelope_subgradient(ext, theta, yq)
    value = envelope_value(ext, theta, yq) + pair.w * (y - yq)
    if yq != y:
        # the cut at yq can overshoot the extension at y only through rounding
        value = min(value, envelope_value(ext, theta, y))
    return Cut(value, pair.v, pair.w)
