"""Problem data: features, loss, regularizer, label constraints and the decomposition.

The objective for labels ``y in {0,1}^S`` is

    phi(theta, y) = omega(theta) + (C / |S|) sum_s l(<x_s, theta>, y_s).

An ``ExtensionModel`` splits it as ``c(theta) + (1/|S|) sum_s d_s(theta, y_s)`` with
``c`` convex, so that replacing every ``d_s`` by its convex extension gives a
convex function of ``(theta, y)``.  Samples whose label is fixed never become
fractional, so their terms are folded into ``c``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .envelope import Cut, Method, TermExtension, envelope_cut, envelope_value
from .errors import ConfigurationError, DomainError, InfeasibleError
from .losses import (
    LossKind,
    LossSpec,
    RegKind,
    RegularizerSpec,
    _raw_regularizer,
    loss_derivative,
    loss_value,
    regularizer_value,
)

__all__ = [
    "LabelConstraintSet",
    "Decomposition",
    "Instance",
    "ExtensionModel",
    "build_extensions",
    "solve_supervised",
    "solve_weighted",
]

LABEL_TOL = 1e-8


@dataclass(frozen=True)
class LabelConstraintSet:
    """Feasible labelings: fixed labels, an optional cardinality ``sum y = k`` and rows ``a'y <= b``."""

    n: int
    fixed: Mapping[int, int] = field(default_factory=dict)
    cardinality: Optional[int] = None
    linear: Tuple[Tuple[Tuple[float, ...], float], ...] = ()

    def __post_init__(self):
        fixed = {int(k): int(v) for k, v in dict(self.fixed).items()}
        for k, v in fixed.items():
            if not 0 <= k < self.n:
                raise ConfigurationError(f"fixed label index {k} out of range for {self.n} samples")
            if v not in (0, 1):
                raise ConfigurationError(f"fixed label must be 0 or 1, got {v}")
        object.__setattr__(self, "fixed", dict(sorted(fixed.items())))
        rows = []
        for coeffs, rhs in self.linear:
            coeffs = tuple(float(c) for c in coeffs)
            if len(coeffs) != self.n:
                raise ConfigurationError(f"linear constraint has {len(coeffs)} coefficients, expected {self.n}")
            rows.append((coeffs, float(rhs)))
        object.__setattr__(self, "linear", tuple(rows))
        if self.cardinality is not None:
            object.__setattr__(self, "cardinality", int(self.cardinality))

    @property
    def free(self) -> List[int]:
        return [s for s in range(self.n) if s not in self.fixed]

    def contains(self, y, tol: float = LABEL_TOL) -> bool:
        """Membership of a labeling (bits) or, with tolerance, of a fractional point of the relaxation."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            return False
        if np.any(y < -tol) or np.any(y > 1 + tol):
            return False
        if any(abs(y[s] - v) > tol for s, v in self.fixed.items()):
            return False
        if self.cardinality is not None and abs(y.sum() - self.cardinality) > tol * max(1, self.n):
            return False
        return all(np.dot(a, y) <= b + tol for a, b in self.linear)

    def restrict(self, index: int, bit: int) -> "LabelConstraintSet":
        fixed = dict(self.fixed)
        if fixed.get(index, bit) != bit:
            raise InfeasibleError(f"label {index} already fixed to {fixed[index]}")
        fixed[index] = bit
        return LabelConstraintSet(self.n, fixed, self.cardinality, self.linear)

    def polytope(self):
        """``(A_ub, b_ub, A_eq, b_eq, bounds)`` describing the relaxation over ``[0,1]^S``."""
        A_ub = np.array([a for a, _ in self.linear], dtype=float).reshape(-1, self.n)
        b_ub = np.array([b for _, b in self.linear], dtype=float)
        if self.cardinality is not None:
            A_eq, b_eq = np.ones((1, self.n)), np.array([float(self.cardinality)])
        else:
            A_eq, b_eq = np.zeros((0, self.n)), np.zeros(0)
        bounds = [(float(self.fixed[s]),) * 2 if s in self.fixed else (0.0, 1.0) for s in range(self.n)]
        return A_ub, b_ub, A_eq, b_eq, bounds

    def labelings(self, limit: int = 20):
        """All feasible bit vectors (enumeration; at most ``limit`` samples)."""
        if self.n > limit:
            raise ValueError(f"enumeration is limited to {limit} samples")
        for bits in itertools.product((0, 1), repeat=self.n):
            y = np.array(bits, dtype=float)
            if self.contains(y):
                yield y


class Decomposition(str, Enum):
    LOSS_ONLY = "loss_only"
    FULL_TERM = "full_term"
    LOGISTIC_PARTIAL = "logistic_partial"


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    C: float
    loss: LossSpec
    reg: RegularizerSpec
    labels: LabelConstraintSet
    decomposition: Decomposition = Decomposition.FULL_TERM

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise ConfigurationError("features must be a nonempty list of equal-length vectors")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "decomposition", Decomposition(self.decomposition))
        if not self.C >= 0:
            raise ConfigurationError("C must be nonnegative")
        if self.labels.n != X.shape[0]:
            raise ConfigurationError(f"label constraints are over {self.labels.n} samples, features over {X.shape[0]}")
        self.reg.box(X.shape[1])

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def box(self):
        return self.reg.box(self.m)

    def with_labels(self, labels: LabelConstraintSet) -> "Instance":
        return Instance(self.features, self.C, self.loss, self.reg, labels, self.decomposition)

    def raw_objective_value(self, theta, y) -> float:
        """``phi`` with the label plugged into the loss formulas as is (fractional allowed)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        y = np.asarray(y, dtype=float)
        r = self.features @ theta
        losses = np.array([loss_value(self.loss, r[s], y[s]) for s in range(self.n_samples)])
        return regularizer_value(self.reg, theta) + self.C / self.n_samples * float(losses.sum())

    def objective_value(self, theta, y) -> float:
        """``phi(theta, y)`` for a labeling ``y``."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_samples,) or np.any((y != 0) & (y != 1)):
            raise DomainError("objective_value needs a 0/1 labeling of every sample")
        return self.raw_objective_value(theta, y)


def _method_for(inst: Instance) -> Method:
    kind, reg = inst.loss.kind, inst.reg
    dec = inst.decomposition
    if dec is Decomposition.LOSS_ONLY:
        if kind is LossKind.SQUARED_DIFFERENCE:
            raise ConfigurationError("the trivial extension needs a loss that vanishes at infinity")
        return Method.TRIVIAL
    if dec is Decomposition.LOGISTIC_PARTIAL:
        if kind is not LossKind.LOGISTIC or inst.loss.c0 != inst.loss.c1:
            raise ConfigurationError("the logistic partial decomposition needs the logistic loss with equal class weights")
        if reg.kind is not RegKind.L2 or reg.is_bounded(inst.m) or np.any(np.isfinite(np.concatenate(reg.box(inst.m)))):
            raise ConfigurationError("the logistic partial decomposition needs an unconstrained L2 regularizer")
        return Method.LOGISTIC_PARTIAL
    if reg.kind is RegKind.L2:
        if np.any(np.isfinite(np.concatenate(reg.box(inst.m)))):
            raise ConfigurationError("L2 envelopes are available for an unconstrained parameter only")
        if kind in (LossKind.HINGE, LossKind.SQUARED_HINGE):
            return Method.CLOSED_FORM_L2
        return Method.BISECTION_L2
    if kind is LossKind.SQUARED_DIFFERENCE:
        raise ConfigurationError("the L1 envelope covers the logistic, hinge and squared hinge losses")
    if not reg.is_bounded(inst.m):
        raise ConfigurationError(
            "the L1 full-term extension needs finite parameter bounds: on an unbounded "
            "parameter the extension jumps at y = 0 and y = 1"
        )
    return Method.CLOSED_FORM_L1


@dataclass
class ExtensionModel:
    """``c(theta) + (1/|S|) sum_{s free} d_s**(theta, y_s)``.

    ``c`` holds the regularizer (fully or in part) and the terms of samples whose
    label is fixed.  ``terms[j]`` extends the term of sample ``free[j]``.
    """

    instance: Instance
    method: Method
    free: List[int]
    terms: List[TermExtension]
    fixed: Dict[int, int]
    reg_weight: float
    linear_weight: float = 0.0

    @property
    def weight(self) -> float:
        return 1.0 / self.instance.n_samples

    def c_value(self, theta) -> float:
        inst = self.instance
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        value = self.reg_weight * regularizer_value(inst.reg, theta) if self.reg_weight else 0.0
        if self.method is Method.LOGISTIC_PARTIAL:
            r = inst.features @ theta
            value += self.linear_weight * float(np.logaddexp(0.0, r).sum())
        for s, bit in self.fixed.items():
            value += self.weight * self._fixed_term(theta, s, bit)
        return value

    def _fixed_term(self, theta, s, bit) -> float:
        inst = self.instance
        r = float(inst.features[s] @ theta)
        if self.method is Method.LOGISTIC_PARTIAL:
            # the logistic log(1 + e^r) part already sits in c; what remains is d_s
            return _raw_regularizer(inst.reg, theta) - self.terms_C * bit * r
        base = inst.C * loss_value(inst.loss, r, bit)
        if self.method is Method.TRIVIAL:
            return base
        return base + _raw_regularizer(inst.reg, theta)

    @property
    def terms_C(self) -> float:
        inst = self.instance
        return inst.C * inst.loss.c0 if self.method is Method.LOGISTIC_PARTIAL else inst.C

    def c_subgradient(self, theta) -> np.ndarray:
        inst = self.instance
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        X = inst.features
        if inst.reg.kind is RegKind.L1:
            g = np.sign(theta)
        else:
            g = inst.reg.scale * theta
        g = self.reg_weight * g
        if self.method is Method.LOGISTIC_PARTIAL:
            from scipy.special import expit

            g = g + self.linear_weight * X.T @ expit(X @ theta)
        for s, bit in self.fixed.items():
            r = float(X[s] @ theta)
            if self.method is Method.LOGISTIC_PARTIAL:
                gs = (inst.reg.scale * theta) - self.terms_C * bit * X[s]
            else:
                gs = inst.C * loss_derivative(inst.loss, r, bit) * X[s]
                if self.method is not Method.TRIVIAL:
                    gs = gs + (np.sign(theta) if inst.reg.kind is RegKind.L1 else inst.reg.scale * theta)
            g = g + self.weight * gs
        return g

    def value(self, theta, y) -> float:
        """Extended objective at ``(theta, y)``; ``y`` covers all samples (fixed entries ignored)."""
        y = np.asarray(y, dtype=float)
        total = self.c_value(theta)
        for s, term in zip(self.free, self.terms):
            total += self.weight * envelope_value(term, theta, float(np.clip(y[s], 0.0, 1.0)))
        return total

    def cut(self, theta, y, nudge: float = 1e-7):
        """``(value, g_theta, g_y)``: an affine minorant of the extended objective at ``(theta, y)``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        y = np.asarray(y, dtype=float)
        value = self.c_value(theta)
        g_theta = self.c_subgradient(theta)
        g_y = np.zeros(self.instance.n_samples)
        for s, term in zip(self.free, self.terms):
            c: Cut = envelope_cut(term, theta, float(np.clip(y[s], 0.0, 1.0)), nudge)
            value += self.weight * c.value
            g_theta = g_theta + self.weight * c.v
            g_y[s] = self.weight * c.w
        return value, g_theta, g_y

    def theta_radius(self, upper: float) -> float:
        """``R`` with ``||theta*||_inf <= R`` for every minimizer, given an objective value ``upper``.

        Every extension here is bounded below by ``omega(theta)`` (a convex
        combination of split regularizer values is at least ``omega`` at the
        combined point), except the logistic partial split, which is bounded by
        ``(rho/2)||theta||^2 - rho |c| ||theta||``.
        """
        inst = self.instance
        upper = max(float(upper), 0.0)
        if inst.reg.kind is RegKind.L1:
            return upper
        a = 0.5 * inst.reg.scale
        b = 0.0
        if self.method is Method.LOGISTIC_PARTIAL:
            b = self.terms_C * float(np.max(np.linalg.norm(inst.features, axis=1)))
        return (b + np.sqrt(b * b + 4.0 * a * upper)) / (2.0 * a)


def build_extensions(instance: Instance) -> ExtensionModel:
    """Assemble the convex part and the per-sample extensions for the free labels."""
    method = _method_for(instance)
    labels = instance.labels
    free = labels.free
    C = instance.C
    loss = instance.loss
    if method is Method.LOGISTIC_PARTIAL:
        C = instance.C * loss.c0
    terms = [TermExtension(instance.features[s], C, loss, instance.reg, method) for s in free]
    n = instance.n_samples
    if method is Method.TRIVIAL:
        reg_weight = 1.0
    else:
        # every term carries omega; fixed-label terms are evaluated in _fixed_term
        reg_weight = 0.0
    linear_weight = instance.C * loss.c0 / n if method is Method.LOGISTIC_PARTIAL else 0.0
    return ExtensionModel(instance, method, free, terms, dict(labels.fixed), reg_weight, linear_weight)


def _supervised_problem(instance: Instance):
    cache = instance.__dict__.get("_supervised")
    if cache is not None:
        return cache
    import cvxpy as cp

    X, n, m = instance.features, instance.n_samples, instance.m
    theta = cp.Variable(m)
    # separate weights for the two labels keep the objective DPP-convex
    ypar = cp.Parameter(n, nonneg=True)
    npar = cp.Parameter(n, nonneg=True)
    ypar.value, npar.value = np.zeros(n), np.ones(n)
    r = X @ theta
    loss, reg = instance.loss, instance.reg
    c0, c1 = loss.c0, loss.c1
    if loss.kind is LossKind.HINGE:
        l1, l0 = c1 * cp.pos(1 - r), c0 * cp.pos(1 + r)
    elif loss.kind is LossKind.SQUARED_HINGE:
        l1, l0 = 0.5 * c1 * cp.square(cp.pos(1 - r)), 0.5 * c0 * cp.square(cp.pos(1 + r))
    elif loss.kind is LossKind.LOGISTIC:
        l1, l0 = c1 * cp.logistic(-r), c0 * cp.logistic(r)
    else:
        l1, l0 = cp.square(r - 1), cp.square(r)
    omega = cp.norm1(theta) if reg.kind is RegKind.L1 else 0.5 * reg.scale * cp.sum_squares(theta)
    objective = omega + (instance.C / n) * (cp.sum(cp.multiply(ypar, l1)) + cp.sum(cp.multiply(npar, l0)))
    lo, hi = reg.box(m)
    cons = []
    if np.any(np.isfinite(lo)):
        idx = np.isfinite(lo)
        cons.append(theta[idx] >= lo[idx])
    if np.any(np.isfinite(hi)):
        idx = np.isfinite(hi)
        cons.append(theta[idx] <= hi[idx])
    prob = cp.Problem(cp.Minimize(objective), cons)
    cache = (prob, theta, ypar, npar)
    object.__setattr__(instance, "_supervised", cache)
    return cache


def solve_weighted(instance: Instance, w1, w0) -> np.ndarray:
    """Minimizer of ``omega + (C/|S|) sum_s (w1_s l_s(., 1) + w0_s l_s(., 0))``, clipped to the box."""
    import warnings

    import cvxpy as cp

    prob, theta, ypar, npar = _supervised_problem(instance)
    ypar.value, npar.value = np.asarray(w1, dtype=float), np.asarray(w0, dtype=float)
    with warnings.catch_warnings():
        # accuracy is judged by recomputing the objective, not by solver status
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11)
        except cp.error.SolverError:
            prob.solve(solver=cp.SCS, eps=1e-9)
    if theta.value is None:
        raise InfeasibleError(f"supervised problem could not be solved: {prob.status}")
    lo, hi = instance.box()
    return np.clip(np.asarray(theta.value, dtype=float), lo, hi)


def solve_supervised(instance: Instance, y) -> Tuple[float, np.ndarray]:
    """``min_theta phi(theta, y)`` for a fixed labeling; returns ``(value, theta)``.

    The value is recomputed exactly at the returned (box-clipped) ``theta``.
    """
    y = np.asarray(y, dtype=float)
    t = _polish(instance, y, solve_weighted(instance, y, 1.0 - y))
    return instance.objective_value(t, y), t


def _polish(instance: Instance, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Snap near-zero coordinates (L1) and near-bound coordinates exactly; keep the better point."""
    best, fbest = theta, instance.objective_value(theta, y)
    cand = theta.copy()
    if instance.reg.kind is RegKind.L1:
        cand = np.where(np.abs(cand) < 1e-9, 0.0, cand)
    lo, hi = instance.box()
    cand = np.where(np.abs(cand - lo) < 1e-9, lo, cand)
    cand = np.where(np.abs(cand - hi) < 1e-9, hi, cand)
    f = instance.objective_value(cand, y)
    if f < fbest:
        best, fbest = cand, f
    return best
