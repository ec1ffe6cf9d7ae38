"""Continuous relaxation and branch-and-bound over the convexified objective.

The relaxation minimizes the extended objective over ``theta`` in the box and
``y`` in the polytope of the label constraints.  Two iterative methods are
available, both of which keep every subgradient cut they evaluate:

* ``"subgradient"``: projected subgradient steps (Polyak steps towards the
  current certified lower bound, ``1/sqrt(k)`` steps before one exists);
* ``"bundle"`` (default): cutting planes stabilized by a box trust region
  around the best point.

Either way the reported ``lower_bound`` is the minimum of the cutting-plane
model over the whole feasible region, computed by LP, minus a small safety
margin for rounding in the cuts.  It is a valid bound whatever the iterate
quality, which is what branch-and-bound prunes on.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from .envelope import Method
from .errors import ConfigurationError, InfeasibleError, NumericError
from .instance import (
    Decomposition,
    ExtensionModel,
    Instance,
    LabelConstraintSet,
    build_extensions,
    solve_supervised,
    solve_weighted,
)
from .losses import loss_value, regularizer_value

log = logging.getLogger(__name__)

__all__ = [
    "project_labels",
    "RelaxationResult",
    "solve_relaxation",
    "NodeRecord",
    "BnBResult",
    "branch_and_bound",
    "label_polytope_feasible",
]

PROJECTION_TOL = 1e-9
INTEGRAL_TOL = 1e-9
CUT_SAFETY = 1e-7
STALL_ITERATIONS = 25


# ---------------------------------------------------------------------------
# label projection


def _project_box_cardinality(y: np.ndarray, cons: LabelConstraintSet) -> np.ndarray:
    out = np.clip(y, 0.0, 1.0)
    for s, bit in cons.fixed.items():
        out[s] = float(bit)
    if cons.cardinality is None:
        return out
    free = np.array(cons.free, dtype=int)
    k = cons.cardinality - sum(cons.fixed.values())
    if k < -PROJECTION_TOL or k > free.size + PROJECTION_TOL:
        raise InfeasibleError(f"cardinality {cons.cardinality} cannot be met with the fixed labels")
    if free.size == 0:
        return out
    v = y[free]
    # sum(clip(v - tau, 0, 1)) is nonincreasing in tau; bisect for the level k
    lo, hi = float(v.min()) - 1.0, float(v.max())
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        if np.clip(v - tau, 0.0, 1.0).sum() > k:
            lo = tau
        else:
            hi = tau
        if hi - lo <= 1e-15 * max(1.0, abs(tau)):
            break
    tau = 0.5 * (lo + hi)
    out[free] = np.clip(v - tau, 0.0, 1.0)
    return out


def project_labels(y, cons: LabelConstraintSet, tol: float = PROJECTION_TOL, max_iter: int = 100_000) -> np.ndarray:
    """Euclidean projection onto ``[0,1]^S`` with fixed labels, cardinality and ``a'y <= b`` rows.

    Box, fixed labels and cardinality are handled exactly; the inequality rows
    are added by Dykstra's alternating projections.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (cons.n,):
        raise ValueError(f"y has shape {y.shape}, expected ({cons.n},)")
    if not cons.linear:
        return _project_box_cardinality(y, cons)
    if not label_polytope_feasible(cons):
        raise InfeasibleError("label constraints are infeasible")
    sets = [lambda v: _project_box_cardinality(v, cons)]
    for a, b in cons.linear:
        a = np.asarray(a)
        aa = float(a @ a)
        if aa == 0.0:
            continue
        sets.append(lambda v, a=a, b=b, aa=aa: v - max(0.0, (a @ v - b) / aa) * a)
    x = y.copy()
    incr = [np.zeros_like(y) for _ in sets]
    for it in range(max_iter):
        prev = x
        for j, P in enumerate(sets):
            z = P(x + incr[j])
            incr[j] = x + incr[j] - z
            x = z
        if np.max(np.abs(x - prev)) <= tol and cons.contains(x, 10 * tol):
            break
    else:
        raise NumericError("Dykstra projection did not converge", {"y": y.tolist(), "last": x.tolist()})
    return _project_box_cardinality(x, cons) if cons.contains(_project_box_cardinality(x, cons), 10 * tol) else x


def label_polytope_feasible(cons: LabelConstraintSet) -> bool:
    A_ub, b_ub, A_eq, b_eq, bounds = cons.polytope()
    res = linprog(
        np.zeros(cons.n),
        A_ub=A_ub if A_ub.size else None,
        b_ub=b_ub if A_ub.size else None,
        A_eq=A_eq if A_eq.size else None,
        b_eq=b_eq if A_eq.size else None,
        bounds=bounds,
        method="highs",
    )
    return res.status == 0


def _coordinate_ranges(cons: LabelConstraintSet):
    """Min and max of every label over the polytope, plus a relative-interior point."""
    A_ub, b_ub, A_eq, b_eq, bounds = cons.polytope()
    kw = dict(
        A_ub=A_ub if A_ub.size else None,
        b_ub=b_ub if A_ub.size else None,
        A_eq=A_eq if A_eq.size else None,
        b_eq=b_eq if A_eq.size else None,
        bounds=bounds,
        method="highs",
    )
    lo, hi = np.zeros(cons.n), np.zeros(cons.n)
    pts = []
    for s in range(cons.n):
        c = np.zeros(cons.n)
        c[s] = 1.0
        r1 = linprog(c, **kw)
        r2 = linprog(-c, **kw)
        if r1.status != 0 or r2.status != 0:
            raise InfeasibleError("label constraints are infeasible")
        lo[s], hi[s] = r1.x[s], r2.x[s]
        pts.extend([r1.x, r2.x])
    return lo, hi, np.mean(pts, axis=0)


# ---------------------------------------------------------------------------
# relaxation


@dataclass
class RelaxationResult:
    theta: np.ndarray
    y: np.ndarray
    value: float
    iterations: int
    gap_estimate: float
    lower_bound: float
    extension: str = "decomposed"
    exact: bool = False


def _extension_instance(instance: Instance, extension: str) -> Instance:
    if extension == "trivial":
        dec = Decomposition.LOSS_ONLY
    elif extension == "decomposed":
        dec = instance.decomposition
        if dec is Decomposition.LOSS_ONLY:
            dec = Decomposition.FULL_TERM
    else:
        raise ConfigurationError(f"unknown extension {extension!r}")
    if dec is instance.decomposition:
        return instance
    return Instance(instance.features, instance.C, instance.loss, instance.reg, instance.labels, dec)


def _weighted_supervised(instance: Instance, y_bits: np.ndarray, active: np.ndarray) -> Tuple[float, np.ndarray]:
    """``min_theta omega + (C/|S|) sum_{s active} l_s(theta, y_s)``."""
    w1 = np.where(active, y_bits, 0.0)
    t = solve_weighted(instance, w1, np.where(active, 1.0 - y_bits, 0.0))
    r = instance.features @ t
    val = regularizer_value(instance.reg, t) + instance.C / instance.n_samples * sum(
        loss_value(instance.loss, r[s], y_bits[s]) for s in range(instance.n_samples) if active[s]
    )
    return float(val), t


def _trivial_relaxation(instance: Instance) -> RelaxationResult:
    """Exact minimum of the trivial extension over the label polytope.

    Free terms vanish at fractional labels, so the best ``y`` is any point of the
    polytope's relative interior; only labels that are constant and integral on
    the polytope keep their loss.
    """
    cons = instance.labels
    lo, hi, center = _coordinate_ranges(cons)
    const = np.abs(hi - lo) <= INTEGRAL_TOL
    bits = np.round(center)
    active = const & (np.abs(center - bits) <= INTEGRAL_TOL)
    value, theta = _weighted_supervised(instance, bits, active)
    y = np.where(const, np.where(active, bits, center), center)
    return RelaxationResult(theta, y, value, 0, 0.0, value, "trivial", exact=True)


def _exact_leaf(instance: Instance, extension: str) -> RelaxationResult:
    y = np.array([instance.labels.fixed[s] for s in range(instance.n_samples)], dtype=float)
    if not instance.labels.contains(y):
        raise InfeasibleError("fixed labels violate the constraints")
    value, theta = solve_supervised(instance, y)
    return RelaxationResult(theta, y, value, 0, 0.0, value, extension, exact=True)


class _CutModel:
    """Cutting-plane model ``t >= f_j + g_j'(z - z_j)`` over ``z = (theta, y)``."""

    def __init__(self, m: int, n: int):
        self.m, self.n = m, n
        self.G: List[np.ndarray] = []
        self.h: List[float] = []

    def add(self, z: np.ndarray, f: float, g: np.ndarray):
        # t >= f + g'(z' - z)  <=>  g'z' - t <= g'z - f
        self.G.append(g.copy())
        self.h.append(float(g @ z - f))

    def minimize(self, bounds, A_ub, b_ub, A_eq, b_eq):
        """``(value, z)`` minimizing the model; ``None`` if the LP fails."""
        d = self.m + self.n
        G = np.array(self.G)
        rows = [np.hstack([G, -np.ones((len(self.G), 1))])]
        rhs = [np.array(self.h)]
        if A_ub.size:
            rows.append(np.hstack([np.zeros((A_ub.shape[0], self.m)), A_ub, np.zeros((A_ub.shape[0], 1))]))
            rhs.append(b_ub)
        Aeq = beq = None
        if A_eq.size:
            Aeq = np.hstack([np.zeros((A_eq.shape[0], self.m)), A_eq, np.zeros((A_eq.shape[0], 1))])
            beq = b_eq
        c = np.zeros(d + 1)
        c[-1] = 1.0
        res = linprog(
            c,
            A_ub=np.vstack(rows),
            b_ub=np.concatenate(rhs),
            A_eq=Aeq,
            b_eq=beq,
            bounds=list(bounds) + [(None, None)],
            method="highs",
        )
        if res.status != 0:
            return None
        return float(res.fun), res.x[:d]


def solve_relaxation(
    instance: Instance,
    extension: str = "decomposed",
    budget: int = 300,
    method: str = "bundle",
    tol: float = 1e-7,
    cutoff: Optional[float] = None,
    seed: int = 0,
) -> RelaxationResult:
    """Minimize the extended objective over ``theta`` in the box and ``y`` in the label polytope.

    ``cutoff``: stop as soon as the certified lower bound reaches it (used by
    branch-and-bound to prune).  ``seed`` only breaks ties in the starting
    point and keeps runs reproducible.
    """
    if extension == "theorem1":
        return _theorem1_relaxation(instance)
    cons = instance.labels
    if not label_polytope_feasible(cons):
        raise InfeasibleError("label constraints are infeasible")
    if not cons.free:
        return _exact_leaf(instance, extension)
    inst = _extension_instance(instance, extension)
    model = build_extensions(inst)
    if model.method is Method.TRIVIAL:
        return _trivial_relaxation(inst)
    return _cutting_plane(inst, model, extension, budget, method, tol, cutoff, seed)


def _cutting_plane(inst, model: ExtensionModel, extension, budget, method, tol, cutoff, seed) -> RelaxationResult:
    cons = inst.labels
    m, n = inst.m, inst.n_samples
    A_ub, b_ub, A_eq, b_eq, ybounds = cons.polytope()
    blo, bhi = inst.box()
    lo_r, hi_r, y0 = _coordinate_ranges(cons)
    theta0 = np.clip(np.zeros(m), blo, bhi)
    f0 = model.value(theta0, y0)
    R = model.theta_radius(f0) * (1.0 + 1e-6) + 1e-9
    tlo = np.maximum(blo, -R)
    thi = np.minimum(bhi, R)
    region = [(float(a), float(b)) for a, b in zip(tlo, thi)] + list(ybounds)
    lower = np.array([a for a, _ in region])
    upper = np.array([b for _, b in region])

    cuts = _CutModel(m, n)

    def evaluate(z):
        th, yy = z[:m], z[m:]
        f, gth, gy = model.cut(th, yy)
        g = np.concatenate([gth, gy])
        cuts.add(z, f, g)
        return model.value(th, yy), g

    def project(z):
        th = np.clip(z[:m], tlo, thi)
        yy = project_labels(z[m:], cons)
        return np.concatenate([th, yy])

    z_best = np.concatenate([theta0, y0])
    f_best, g = evaluate(z_best)
    fz = f_best
    lb = -math.inf
    center, f_center = z_best.copy(), f_best
    radius = 0.25 * max(1.0, float(np.max(upper - lower)))
    z = z_best.copy()
    it = 0
    stall, last = 0, (f_best, lb)
    for it in range(1, budget + 1):
        sol = cuts.minimize(region, A_ub, b_ub, A_eq, b_eq)
        if sol is not None:
            lb = max(lb, sol[0])
        gap = f_best - lb
        if gap <= tol * max(1.0, abs(f_best)) or (cutoff is not None and lb - CUT_SAFETY * (1 + abs(lb)) >= cutoff):
            break
        # LP round-off limits how far the model can be refined
        eps = 1e-12 * max(1.0, abs(f_best))
        stall = stall + 1 if (last[0] - f_best <= eps and lb - last[1] <= eps) else 0
        last = (f_best, lb)
        if stall >= STALL_ITERATIONS:
            break
        if method == "subgradient":
            gg = float(g @ g)
            if gg == 0.0:
                break
            if math.isfinite(lb):
                step = (fz - lb) / gg
            else:
                step = 1.0 / (math.sqrt(it) * (1.0 + math.sqrt(gg)))
            z = project(z - step * g)
        elif method == "bundle":
            tr = [(max(a, c - radius), min(b, c + radius)) for (a, b), c in zip(region, center)]
            trial = cuts.minimize(tr, A_ub, b_ub, A_eq, b_eq)
            if trial is None:
                trial = sol
            predicted, z = trial
            z = np.clip(z, lower, upper)
        else:
            raise ConfigurationError(f"unknown relaxation method {method!r}")
        fz, g = evaluate(z)
        if method == "bundle":
            if fz <= f_center - 0.1 * max(f_center - predicted, 0.0):
                center, f_center = z.copy(), fz
                radius = min(2.0 * radius, float(np.max(upper - lower)))
            else:
                radius = max(0.5 * radius, 1e-9)
        if fz < f_best:
            z_best, f_best = z.copy(), fz
    lb_cert = lb - CUT_SAFETY * (1.0 + abs(lb)) if math.isfinite(lb) else -math.inf
    lb_cert = min(lb_cert, f_best)
    th, yy = z_best[:m], z_best[m:]
    return RelaxationResult(th, yy, f_best, it, max(0.0, f_best - lb_cert), lb_cert, extension)


def _theorem1_relaxation(instance: Instance) -> RelaxationResult:
    """Minimum of the tightest extension: attained at a feasible labeling, so enumerate."""
    best = None
    for y in instance.labels.labelings(limit=20):
        value, theta = solve_supervised(instance, y)
        if best is None or value < best.value - 1e-12:
            best = RelaxationResult(theta, y, value, 0, 0.0, value, "theorem1", exact=True)
    if best is None:
        raise InfeasibleError("no labeling satisfies the label constraints")
    return best


# ---------------------------------------------------------------------------
# branch and bound


@dataclass
class NodeRecord:
    index: int
    depth: int
    labels: LabelConstraintSet
    relaxation: Optional[RelaxationResult]
    status: str


@dataclass
class BnBResult:
    incumbent_value: float
    incumbent_theta: np.ndarray
    incumbent_y: np.ndarray
    nodes_explored: int
    proven_gap: float
    lower_bound: float
    node_cap_hit: bool = False


def _round_labels(y: np.ndarray, cons: LabelConstraintSet) -> Optional[np.ndarray]:
    """A feasible labeling near ``y``: nearest bits, or for a cardinality the top ``k``."""
    cand = np.round(y)
    for s, bit in cons.fixed.items():
        cand[s] = bit
    if cons.cardinality is not None:
        free = cons.free
        k = cons.cardinality - sum(cons.fixed.values())
        order = sorted(free, key=lambda s: (-y[s], s))
        cand[free] = 0.0
        cand[order[: max(k, 0)]] = 1.0
    return cand if cons.contains(cand) else None


def branch_and_bound(
    instance: Instance,
    extension: str = "decomposed",
    tol: float = 1e-6,
    node_cap: int = 10_000,
    budget: int = 300,
    node_callback: Optional[Callable[[NodeRecord], None]] = None,
    seed: int = 0,
) -> BnBResult:
    """Best-first branch-and-bound on the labels with relaxation bounds.

    Each node fixes some labels; its bound is the certified lower bound of the
    relaxation restricted to the node.  Branching picks the most fractional
    label (lowest index on ties).  Runs single-threaded, so node order is
    deterministic.
    """
    if extension not in ("trivial", "decomposed"):
        raise ConfigurationError("branch_and_bound uses the trivial or decomposed extension")
    root = instance.labels
    if not label_polytope_feasible(root):
        raise InfeasibleError("label constraints are infeasible")

    inc_val, inc_theta, inc_y = math.inf, None, None
    tried = set()

    def try_labeling(y):
        nonlocal inc_val, inc_theta, inc_y
        key = tuple(int(b) for b in y)
        if key in tried:
            return
        tried.add(key)
        val, th = solve_supervised(instance, y)
        if val < inc_val:
            inc_val, inc_theta, inc_y = val, th, np.array(key, dtype=float)

    counter = 0
    heap: List[Tuple[float, int, int, LabelConstraintSet]] = []
    heapq.heappush(heap, (-math.inf, counter, 0, root))
    explored = 0
    closed_bound = math.inf  # smallest bound among nodes discarded without being solved to the end
    cap_hit = False
    while heap:
        entry = heapq.heappop(heap)
        parent_bound, _, depth, cons = entry
        if parent_bound >= inc_val - tol:
            closed_bound = min(closed_bound, parent_bound)
            continue
        if explored >= node_cap:
            cap_hit = True
            heapq.heappush(heap, entry)
            break
        explored += 1
        node_inst = instance.with_labels(cons)
        if not label_polytope_feasible(cons):
            if node_callback:
                node_callback(NodeRecord(explored, depth, cons, None, "infeasible"))
            continue
        cutoff = inc_val - tol if math.isfinite(inc_val) else None
        rel = solve_relaxation(node_inst, extension, budget=budget, cutoff=cutoff, seed=seed)
        bound = max(rel.lower_bound, parent_bound)
        free = cons.free
        frac = {s: abs(rel.y[s] - round(rel.y[s])) for s in free}
        if rel.exact and not free:
            try_labeling(rel.y)
        else:
            cand = _round_labels(rel.y, cons)
            if cand is not None:
                try_labeling(cand)
        status = "branched"
        if bound >= inc_val - tol:
            status = "pruned"
            closed_bound = min(closed_bound, bound)
        elif not free:
            status = "leaf"
            closed_bound = min(closed_bound, bound)
        if node_callback:
            node_callback(NodeRecord(explored, depth, cons, rel, status))
        if status != "branched":
            continue
        # most fractional, ties to the lowest index
        s_branch = max(free, key=lambda s: (frac[s], -s))
        for bit in (0, 1) if rel.y[s_branch] < 0.5 else (1, 0):
            child = cons.restrict(s_branch, bit)
            counter += 1
            heapq.heappush(heap, (bound, counter, depth + 1, child))
    if inc_y is None:
        raise InfeasibleError("no feasible labeling found")
    open_bound = min((b for b, *_ in heap), default=math.inf)
    global_lb = min(inc_val, closed_bound, open_bound)
    return BnBResult(inc_val, inc_theta, inc_y, explored, max(0.0, inc_val - global_lb), global_lb, cap_hit)
