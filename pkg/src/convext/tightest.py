"""Exact tightest convex extension at desk scale, by enumeration of support sets.

For a fractional label vector ``y`` in the hull of the feasible labelings ``Y``,
the tightest extension is

    min over Y' in supports(y) of
        min { sum_j lam_j phi(theta_j, y'_j) : sum_j lam_j theta_j = theta, theta_j in box }

where ``supports(y)`` are the subsets of ``Y`` of size ``|S|+1`` whose hull
contains ``y`` and ``lam`` are the barycentric weights of ``y``.  Both the
number of subsets and the inner problems grow fast, so everything here is
gated to small sizes.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import ConfigurationError, DomainError, NumericError
from .instance import Instance, LabelConstraintSet
from .losses import LossKind, RegKind

__all__ = ["LabelSet", "SupportSet", "enumerate_support_sets", "tightest_extension_value"]

MAX_MEMBERS = 20
MAX_SAMPLES = 8
RESIDUAL_TOL = 1e-10
LAMBDA_TOL = 1e-12


@dataclass(frozen=True)
class LabelSet:
    """An explicit list of feasible labelings."""

    S_size: int
    members: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if self.S_size < 1:
            raise ConfigurationError("S_size must be positive")
        rows = tuple(tuple(int(b) for b in m) for m in self.members)
        if not rows:
            raise ConfigurationError("a label set needs at least one member")
        for r in rows:
            if len(r) != self.S_size or any(b not in (0, 1) for b in r):
                raise ConfigurationError(f"member {r} is not a bit vector of length {self.S_size}")
        if len(set(rows)) != len(rows):
            raise ConfigurationError("label set members must be distinct")
        object.__setattr__(self, "members", rows)

    @classmethod
    def from_constraints(cls, cons: LabelConstraintSet) -> "LabelSet":
        return cls(cons.n, tuple(tuple(int(b) for b in y) for y in cons.labelings(limit=MAX_MEMBERS)))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.members, dtype=float)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SupportSet:
    points: Tuple[Tuple[int, ...], ...]
    lambdas: Tuple[float, ...]


def _check_gates(Y: LabelSet):
    if len(Y) > MAX_MEMBERS or Y.S_size > MAX_SAMPLES:
        raise ConfigurationError(
            f"enumeration is limited to {MAX_MEMBERS} labelings and {MAX_SAMPLES} samples "
            f"(got {len(Y)} and {Y.S_size})"
        )


def in_hull(Y: LabelSet, y) -> bool:
    P = Y.matrix
    A_eq = np.vstack([P.T, np.ones((1, len(Y)))])
    b_eq = np.concatenate([np.asarray(y, dtype=float), [1.0]])
    res = linprog(np.zeros(len(Y)), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * len(Y), method="highs")
    return res.status == 0


def _barycentric(P: np.ndarray, y: np.ndarray) -> Optional[np.ndarray]:
    """Weights ``lam >= 0`` with ``P' lam = y`` and ``sum lam = 1``, or ``None``."""
    A = np.vstack([P.T, np.ones((1, P.shape[0]))])
    b = np.concatenate([y, [1.0]])
    lam, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.all(lam >= -LAMBDA_TOL) and np.linalg.norm(A @ lam - b) < RESIDUAL_TOL:
        lam = np.where(lam < LAMBDA_TOL, 0.0, lam)
        return lam / lam.sum()
    if np.linalg.matrix_rank(A) < P.shape[0]:
        # affinely dependent points: least squares picks the min-norm weights, which
        # can be negative while a nonnegative solution exists
        lam, res = nnls(A, b)
        if res < RESIDUAL_TOL:
            return lam
    return None


def enumerate_support_sets(Y: LabelSet, y) -> List[SupportSet]:
    """All subsets of ``Y`` of size ``min(|S|+1, |Y|)`` whose hull contains ``y``."""
    _check_gates(Y)
    y = np.asarray(y, dtype=float)
    if y.shape != (Y.S_size,):
        raise ValueError(f"y has shape {y.shape}, expected ({Y.S_size},)")
    if not in_hull(Y, y):
        raise DomainError("y is outside the convex hull of the label set")
    P = Y.matrix
    size = min(Y.S_size + 1, len(Y))
    out = []
    for idx in itertools.combinations(range(len(Y)), size):
        lam = _barycentric(P[list(idx)], y)
        if lam is not None:
            out.append(SupportSet(tuple(Y.members[i] for i in idx), tuple(float(v) for v in lam)))
    return out


# ---------------------------------------------------------------------------
# inner problem


def _inner_problem(instance: Instance, k: int):
    """Cached parametrized problem with ``k`` blocks ``theta_j``."""
    cache = instance.__dict__.setdefault("_tightest", {})
    if k in cache:
        return cache[k]
    import cvxpy as cp

    X, n, m = instance.features, instance.n_samples, instance.m
    T = cp.Variable((k, m))
    lam = cp.Parameter(k, nonneg=True)
    w1 = cp.Parameter((k, n), nonneg=True)  # lam_j * y'_js
    w0 = cp.Parameter((k, n), nonneg=True)  # lam_j * (1 - y'_js)
    target = cp.Parameter(m)
    R = T @ X.T
    loss, reg = instance.loss, instance.reg
    if loss.kind is LossKind.HINGE:
        l1, l0 = loss.c1 * cp.pos(1 - R), loss.c0 * cp.pos(1 + R)
    elif loss.kind is LossKind.SQUARED_HINGE:
        l1, l0 = 0.5 * loss.c1 * cp.square(cp.pos(1 - R)), 0.5 * loss.c0 * cp.square(cp.pos(1 + R))
    elif loss.kind is LossKind.LOGISTIC:
        l1, l0 = loss.c1 * cp.logistic(-R), loss.c0 * cp.logistic(R)
    else:
        l1, l0 = cp.square(R - 1), cp.square(R)
    if reg.kind is RegKind.L1:
        omega = cp.sum(cp.abs(T), axis=1)
    else:
        omega = 0.5 * reg.scale * cp.sum(cp.square(T), axis=1)
    obj = lam @ omega + (instance.C / n) * (cp.sum(cp.multiply(w1, l1)) + cp.sum(cp.multiply(w0, l0)))
    cons = [lam @ T == target]
    lo, hi = instance.box()
    for i in range(m):
        if math.isfinite(lo[i]):
            cons.append(T[:, i] >= lo[i])
        if math.isfinite(hi[i]):
            cons.append(T[:, i] <= hi[i])
    prob = cp.Problem(cp.Minimize(obj), cons)
    cache[k] = (prob, T, lam, w1, w0, target)
    return cache[k]


def _phi(instance: Instance, theta: np.ndarray, bits: Sequence[int]) -> float:
    return instance.objective_value(theta, np.asarray(bits, dtype=float))


def _support_value(instance: Instance, theta: np.ndarray, support: SupportSet) -> float:
    keep = [j for j, l in enumerate(support.lambdas) if l > 0.0]
    lam = np.array([support.lambdas[j] for j in keep])
    lam = lam / lam.sum()
    pts = [support.points[j] for j in keep]
    lo, hi = instance.box()
    if len(keep) == 1:
        if np.any(theta < lo - 1e-12) or np.any(theta > hi + 1e-12):
            return math.inf
        return _phi(instance, theta, pts[0])
    import cvxpy as cp

    prob, T, lpar, w1, w0, target = _inner_problem(instance, len(keep))
    B = np.array(pts, dtype=float)
    lpar.value = lam
    w1.value = lam[:, None] * B
    w0.value = lam[:, None] * (1.0 - B)
    target.value = theta
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
        except cp.error.SolverError:
            prob.solve(solver=cp.SCS, eps=1e-9)
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        return math.inf
    if T.value is None:
        raise NumericError(f"inner problem failed: {prob.status}", {"theta": theta.tolist(), "support": pts})
    Th = np.clip(np.asarray(T.value, dtype=float), lo, hi)
    # restore the coupling exactly by solving for the heaviest block
    j = int(np.argmax(lam))
    rest = theta - sum(lam[i] * Th[i] for i in range(len(keep)) if i != j)
    Th[j] = rest / lam[j]
    if np.any(Th[j] < lo) or np.any(Th[j] > hi):
        Th[j] = np.clip(Th[j], lo, hi)
        if np.max(np.abs(lam @ Th - theta)) > 1e-8:
            raise NumericError("inner solution violates the coupling", {"theta": theta.tolist(), "support": pts})
    return float(sum(lam[i] * _phi(instance, Th[i], pts[i]) for i in range(len(keep))))


def tightest_extension_value(
    instance: Instance,
    Y: LabelSet,
    theta,
    y,
    sample: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Tightest convex extension of ``phi`` at ``(theta, y)``.

    With ``sample`` set, only that many randomly chosen support sets are
    evaluated, which gives an upper bound instead of the exact value.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if Y.S_size != instance.n_samples:
        raise ConfigurationError("label set and instance disagree on the number of samples")
    if theta.shape != (instance.m,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({instance.m},)")
    supports = enumerate_support_sets(Y, y)
    if sample is not None and sample < len(supports):
        rng = np.random.default_rng(seed)
        pick = sorted(rng.choice(len(supports), size=sample, replace=False))
        supports = [supports[i] for i in pick]
    best = math.inf
    for sup in supports:
        best = min(best, _support_value(instance, theta, sup))
    if not math.isfinite(best):
        raise DomainError("theta is not a combination of box points for any support set")
    return best
