"""Losses and regularizers as convex functions of the margin ``r = <x, theta>``.

Every loss is evaluated in its class-weighted form: the hinge and squared hinge
losses carry the weight ``c0`` on label 0 and ``c1`` on label 1, and the squared
hinge carries an extra factor 1/2.  The logistic loss accepts the same weights
(default 1).  The squared difference loss ignores the weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, DomainError

__all__ = [
    "Interval",
    "LossKind",
    "LossSpec",
    "RegKind",
    "RegularizerSpec",
    "loss_value",
    "loss_subdifferential",
    "regularizer_value",
    "regularizer_subdifferential",
]


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` of extended reals."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, v: float) -> "Interval":
        v = float(v)
        return cls(v, v)

    def __add__(self, other) -> "Interval":
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> "Interval":
        if isinstance(other, Interval):
            return Interval(self.lo - other.hi, self.hi - other.lo)
        return Interval(self.lo - other, self.hi - other)

    def __mul__(self, k: float) -> "Interval":
        a, b = self.lo * k, self.hi * k
        return Interval(min(a, b), max(a, b))

    __rmul__ = __mul__

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= v <= self.hi + tol

    def intersect(self, other: "Interval", tol: float = 0.0) -> Optional["Interval"]:
        """Intersection, or None if empty.  Gaps up to ``tol`` collapse to their midpoint."""
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo <= hi:
            return Interval(lo, hi)
        if lo - hi <= tol:
            mid = 0.5 * (lo + hi)
            return Interval(mid, mid)
        return None

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def midpoint(self) -> float:
        """Midpoint; for half-infinite intervals the finite endpoint, for the real line 0."""
        lo_fin, hi_fin = math.isfinite(self.lo), math.isfinite(self.hi)
        if lo_fin and hi_fin:
            return 0.5 * (self.lo + self.hi)
        if lo_fin:
            return self.lo
        if hi_fin:
            return self.hi
        return 0.0


class LossKind(str, Enum):
    SQUARED_DIFFERENCE = "squared_difference"
    LOGISTIC = "logistic"
    HINGE = "hinge"
    SQUARED_HINGE = "squared_hinge"


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind
    c0: float = 1.0
    c1: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if not (self.c0 > 0 and self.c1 > 0):
            raise ConfigurationError(f"class weights must be positive, got c0={self.c0}, c1={self.c1}")

    def weight(self, y):
        """Class weight ``c0 (1 - y) + c1 y``; 1 for the squared difference loss."""
        if self.kind is LossKind.SQUARED_DIFFERENCE:
            return 1.0
        return self.c0 * (1.0 - y) + self.c1 * y

    @property
    def is_convex_in_label(self) -> bool:
        return self.kind is LossKind.SQUARED_DIFFERENCE


def loss_value(loss: LossSpec, r, y):
    """Weighted loss ``l(r, y)``.

    ``y`` is normally a bit; fractional ``y`` evaluates the raw (non-convex)
    interpolation obtained by plugging ``y`` into the formulas directly.
    Vectorized over ``r``.
    """
    r = np.asarray(r, dtype=float)
    kind = loss.kind
    if kind is LossKind.SQUARED_DIFFERENCE:
        out = (r - y) ** 2
    else:
        s = 2.0 * y - 1.0
        w = loss.weight(y)
        if kind is LossKind.LOGISTIC:
            # log(1 + exp(-s r)) without overflow
            out = w * np.logaddexp(0.0, -s * r)
        elif kind is LossKind.HINGE:
            out = w * np.maximum(0.0, 1.0 - s * r)
        else:
            out = 0.5 * w * np.maximum(0.0, 1.0 - s * r) ** 2
    return float(out) if out.ndim == 0 else out


def loss_derivative(loss: LossSpec, r, y: int):
    """Derivative of ``l(., y)``, vectorized; at the hinge kink it returns the flat side (0)."""
    r = np.asarray(r, dtype=float)
    kind = loss.kind
    if kind is LossKind.SQUARED_DIFFERENCE:
        out = 2.0 * (r - y)
    else:
        s = 2.0 * y - 1.0
        w = loss.weight(y)
        if kind is LossKind.LOGISTIC:
            out = -w * s * expit(-s * r)
        elif kind is LossKind.HINGE:
            out = np.where(1.0 - s * r > 0.0, -w * s, 0.0)
        else:
            out = -w * s * np.maximum(0.0, 1.0 - s * r)
    return float(out) if out.ndim == 0 else out


def loss_subdifferential(loss: LossSpec, r: float, y: int, tol: float = 0.0) -> Interval:
    """Subdifferential of ``l(., y)`` at ``r`` as a closed interval.

    Only the hinge loss has a kink (at margin ``(2y - 1) r = 1``); ``tol`` widens
    the kink test so that margins computed with rounding error still see it.
    """
    if y not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {y}")
    r = float(r)
    if loss.kind is LossKind.HINGE:
        s = 2.0 * y - 1.0
        w = loss.weight(y)
        u = 1.0 - s * r
        if abs(u) <= tol:
            return Interval(min(0.0, -w * s), max(0.0, -w * s))
        return Interval.point(-w * s if u > 0.0 else 0.0)
    return Interval.point(loss_derivative(loss, r, y))


class RegKind(str, Enum):
    L1 = "l1"
    L2 = "l2"


@dataclass(frozen=True)
class RegularizerSpec:
    """``||theta||_1`` or ``||theta||_2^2`` (halved when ``half``) on the box ``[lower, upper]``.

    ``lower``/``upper`` are per-coordinate tuples, or None for an unbounded side.
    """

    kind: RegKind
    half: bool = True
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RegKind(self.kind))
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(t) for t in np.atleast_1d(v)))
        if self.lower is not None and self.upper is not None:
            if len(self.lower) != len(self.upper):
                raise ConfigurationError("lower and upper bounds differ in length")
            if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
                raise ConfigurationError("lower bound exceeds upper bound")

    @classmethod
    def box_l1(cls, bound: float, m: int = 1) -> "RegularizerSpec":
        return cls(RegKind.L1, lower=(-bound,) * m, upper=(bound,) * m)

    def box(self, m: int) -> Tuple[np.ndarray, np.ndarray]:
        """Bounds as length-``m`` arrays (scalar-length bounds broadcast)."""

        def expand(v, fill):
            if v is None:
                return np.full(m, fill)
            a = np.asarray(v, dtype=float)
            if a.size == 1:
                return np.full(m, a[0])
            if a.size != m:
                raise ConfigurationError(f"bounds have length {a.size}, expected {m}")
            return a.copy()

        return expand(self.lower, -np.inf), expand(self.upper, np.inf)

    def is_bounded(self, m: int) -> bool:
        lo, hi = self.box(m)
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    @property
    def scale(self) -> float:
        """Factor ``rho`` in ``omega = (rho / 2) ||.||^2`` for the L2 case."""
        return 1.0 if self.half else 2.0


def _raw_regularizer(reg: RegularizerSpec, theta):
    theta = np.asarray(theta, dtype=float)
    if reg.kind is RegKind.L1:
        return np.sum(np.abs(theta), axis=-1)
    return 0.5 * reg.scale * np.sum(theta * theta, axis=-1)


def regularizer_value(reg: RegularizerSpec, theta, tol: float = 1e-12) -> float:
    """``omega(theta)``; raises DomainError outside the box."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lo, hi = reg.box(theta.size)
    if np.any(theta < lo - tol) or np.any(theta > hi + tol):
        raise DomainError(f"theta={theta.tolist()} outside the parameter box")
    return float(_raw_regularizer(reg, theta))


def regularizer_subdifferential(reg: RegularizerSpec, theta, tol: float = 0.0):
    """Per-coordinate subdifferential of ``omega`` plus the box normal cone.

    Returns ``(lo, hi)`` arrays; the subdifferential is the box ``prod [lo_i, hi_i]``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if reg.kind is RegKind.L1:
        sgn = np.sign(theta)
        lo = np.where(np.abs(theta) <= tol, -1.0, sgn)
        hi = np.where(np.abs(theta) <= tol, 1.0, sgn)
    else:
        lo = reg.scale * theta
        hi = lo.copy()
    blo, bhi = reg.box(theta.size)
    scale = tol * np.maximum(1.0, np.abs(theta))
    lo = np.where(theta <= blo + scale, -np.inf, lo)
    hi = np.where(theta >= bhi - scale, np.inf, hi)
    return lo, hi
