"""Slow, simple reference implementations used to check everything else.

Nothing here is clever on purpose: grids, golden-section search and brute
force enumeration.  Functions passed in as ``d0``/``d1`` take a batch of points
of shape ``(n, m)`` and return ``n`` values, with ``inf`` outside their domain.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, InfeasibleError

__all__ = ["GridSpec", "golden_section", "oracle_psi", "oracle_convexity", "oracle_mip", "MipSolution"]

GOLDEN_TOL = 1e-9
MAX_GRID_POINTS = 10**7
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    step: float
    refinement_rounds: int = 4

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise ValueError("lower and upper differ in dimension")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not all(math.isfinite(v) for v in lo + hi) or any(a > b for a, b in zip(lo, hi)):
            raise ValueError("grid bounds must be finite with lower <= upper")
        if self.n_points > MAX_GRID_POINTS:
            raise ValueError(f"grid has {self.n_points} points, more than {MAX_GRID_POINTS}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.lower[i], self.upper[i]
        n = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
        pts = lo + self.step * np.arange(n)
        if pts[-1] < hi:
            pts = np.append(pts, hi)
        return pts

    @property
    def n_points(self) -> int:
        return int(np.prod([int((b - a) / self.step) + 2 for a, b in zip(self.lower, self.upper)]))


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL) -> Tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(argmin, min)``.

    The endpoints are compared at the end so a minimizer sitting on the
    boundary is returned exactly.
    """
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    best = min(((fc, c), (fd, d), (f(lo), lo), (f(hi), hi)), key=lambda t: t[0])
    return best[1], best[0]


def _split_objective(d0: Field, d1: Field, theta: np.ndarray, y: float) -> Field:
    def obj(t0: np.ndarray) -> np.ndarray:
        t0 = np.atleast_2d(t0)
        t1 = (theta - (1.0 - y) * t0) / y
        return (1.0 - y) * d0(t0) + y * d1(t1)

    return obj


def _min_1d(hvec: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, step: float) -> Tuple[float, float]:
    """Minimize a convex function of one variable: grid, then golden section next to the best point.

    For convex ``h`` the minimizer lies within one grid step of the best grid
    point, so the golden-section bracket is always correct.
    """
    pts = GridSpec((lo,), (hi,), step).axis(0)
    vals = np.asarray(hvec(pts), dtype=float)
    if not np.any(np.isfinite(vals)):
        return float("nan"), math.inf
    j = int(np.argmin(vals))
    a, b = pts[max(j - 1, 0)], pts[min(j + 1, pts.size - 1)]
    t, v = golden_section(lambda s: float(hvec(np.array([s]))[0]), a, b)
    if v <= vals[j]:
        return t, v
    return float(pts[j]), float(vals[j])


def _golden_batch(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, tol: float = GOLDEN_TOL):
    """Golden-section search on many brackets at once; ``f`` maps an array of points to values."""
    a, b = lo.astype(float).copy(), hi.astype(float).copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while np.max(b - a) > tol:
        left = fc <= fd
        # left: keep [a, d]; right: keep [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INVPHI * (b - a)
        new_d = a + _INVPHI * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_old, fd_old = fc, fd
        probe = np.where(left, c_next, d_next)
        fp = f(probe)
        fc = np.where(left, fp, fd_old)
        fd = np.where(left, fc_old, fp)
        c, d = c_next, d_next
    cand = np.stack([c, d, lo, hi])
    vals = np.stack([fc, fd, f(lo), f(hi)])
    k = np.argmin(vals, axis=0)
    idx = np.arange(lo.size)
    return cand[k, idx], vals[k, idx]


def _nested_min(obj: Field, lower: np.ndarray, upper: np.ndarray, step: float) -> Tuple[np.ndarray, float]:
    if lower.size == 1:
        t, v = _min_1d(lambda s: obj(s[:, None]), lower[0], upper[0], step)
        return np.array([t]), v

    def inner(s0: float) -> Tuple[float, float]:
        return _min_1d(lambda s: obj(np.column_stack([np.full(s.size, s0), s])), lower[1], upper[1], step)

    # outer grid: every inner minimum at once (grid, then one batched golden section)
    P = GridSpec((lower[0],), (upper[0],), step).axis(0)
    Q = GridSpec((lower[1],), (upper[1],), step).axis(0)
    V = obj(np.column_stack([np.repeat(P, Q.size), np.tile(Q, P.size)])).reshape(P.size, Q.size)
    if not np.any(np.isfinite(V)):
        return np.array([np.nan, np.nan]), math.inf
    j = np.argmin(V, axis=1)
    a, b = Q[np.maximum(j - 1, 0)], Q[np.minimum(j + 1, Q.size - 1)]
    _, hv = _golden_batch(lambda s: obj(np.column_stack([P, s])), a, b)
    h = np.minimum(hv, V[np.arange(P.size), j])
    i = int(np.argmin(h))
    s0, _ = golden_section(lambda t: inner(t)[1], P[max(i - 1, 0)], P[min(i + 1, P.size - 1)])
    t1, v = inner(s0)
    if h[i] < v:
        s0 = float(P[i])
        t1, v = inner(s0)
    return np.array([s0, t1]), v


def oracle_psi(d0: Field, d1: Field, theta, y: float, box: GridSpec, expand: bool = True) -> float:
    """``min (1-y) d0(t0) + y d1((theta - (1-y) t0) / y)`` over ``t0`` in ``box``.

    One coordinate is searched by grid plus golden section; for two coordinates
    the same search runs nested, the inner minimum being convex in the outer
    coordinate.  With ``expand`` the box is first widened (at most
    ``refinement_rounds`` times) while a coarse grid minimum sits on its edge
    and the objective is still finite past it.
    """
    return oracle_psi_argmin(d0, d1, theta, y, box, expand)[1]


def oracle_psi_argmin(d0: Field, d1: Field, theta, y: float, box: GridSpec, expand: bool = True):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not 0.0 < y < 1.0:
        raise DomainError("oracle_psi needs y in (0, 1)")
    if theta.size != box.dim or box.dim > 2:
        raise ValueError("grid dimension must match theta and be at most 2")
    obj = _split_objective(d0, d1, theta, y)
    lower, upper = np.array(box.lower), np.array(box.upper)
    rounds = box.refinement_rounds if expand else 0
    for _ in range(rounds):
        coarse = max(box.step, float(np.max(upper - lower)) / 50.0)
        axes = [GridSpec(lower, upper, coarse).axis(i) for i in range(box.dim)]
        mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = obj(mesh)
        if not np.any(np.isfinite(vals)):
            break
        j = int(np.argmin(vals))
        best = mesh[j]
        at_lo, at_hi = np.isclose(best, lower), np.isclose(best, upper)
        if not np.any(at_lo | at_hi):
            break
        probe = best + coarse * (at_hi.astype(float) - at_lo.astype(float))
        if not math.isfinite(float(obj(probe[None, :])[0])):
            break
        width = upper - lower
        lower = np.where(at_lo, lower - width, lower)
        upper = np.where(at_hi, upper + width, upper)
    point, value = _nested_min(obj, lower, upper, box.step)
    if not math.isfinite(value):
        raise DomainError("the split objective is infinite on the whole grid")
    return point, value


def oracle_convexity(
    f: Callable[[np.ndarray], float],
    lower: Sequence[float],
    upper: Sequence[float],
    samples: int = 10_000,
    seed: int = 0,
    vectorized: bool = False,
) -> float:
    """Largest ``f(l p + (1-l) q) - l f(p) - (1-l) f(q)`` over random ``p, q, l``.

    A result at or below zero (up to rounding) means no convexity violation was
    found on the sample.
    """
    rng = np.random.default_rng(seed)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    P = rng.uniform(lower, upper, size=(samples, lower.size))
    Q = rng.uniform(lower, upper, size=(samples, lower.size))
    L = rng.uniform(0.0, 1.0, size=(samples, 1))
    M = L * P + (1.0 - L) * Q
    if vectorized:
        fp, fq, fm = f(P), f(Q), f(M)
    else:
        fp = np.array([f(p) for p in P])
        fq = np.array([f(q) for q in Q])
        fm = np.array([f(r) for r in M])
    lam = L[:, 0]
    return float(np.max(fm - lam * fp - (1.0 - lam) * fq))


@dataclass(frozen=True)
class MipSolution:
    value: float
    y: np.ndarray
    theta: np.ndarray


def oracle_mip(instance, max_samples: int = 12) -> MipSolution:
    """Exhaustive enumeration of feasible labelings, each solved as a convex problem."""
    from .instance import solve_supervised

    n = instance.n_samples
    if n > max_samples:
        raise ValueError(f"enumeration is limited to {max_samples} samples, got {n}")
    best: Optional[MipSolution] = None
    for bits in itertools.product((0, 1), repeat=n):
        y = np.array(bits, dtype=float)
        if not instance.labels.contains(y):
            continue
        value, theta = solve_supervised(instance, y)
        if best is None or value < best.value - 1e-12:
            best = MipSolution(value, y, theta)
    if best is None:
        raise InfeasibleError("no labeling satisfies the label constraints")
    return best
