"""Randomized property suites over every extension implementation.

Each suite returns a list of ``Report`` rows (one per implementation) with the
largest violation seen and the configuration that produced it, so a failure
can be replayed exactly.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .envelope import Method, TermExtension, envelope_subgradient, envelope_value
from .l1 import L1EnvelopeProblem, a_multimap, l1_envelope_value
from .l2 import L2EnvelopeProblem, l2_root_residual, solve_l2_envelope
from .losses import LossKind, LossSpec, RegKind, RegularizerSpec, loss_value
from .oracle import GridSpec, oracle_convexity, oracle_psi

__all__ = [
    "Report",
    "IMPLEMENTATIONS",
    "random_term",
    "extension_suite",
    "oracle_suite",
    "convexity_suite",
    "raw_convexity_control",
    "subgradient_suite",
    "candidate_suite",
    "SUITES",
]

L2_SPAN = 3.0

# name -> (loss kind, regularizer kind, method)
IMPLEMENTATIONS: Dict[str, Tuple[LossKind, RegKind, Method]] = {
    "hinge/l2": (LossKind.HINGE, RegKind.L2, Method.CLOSED_FORM_L2),
    "squared_hinge/l2": (LossKind.SQUARED_HINGE, RegKind.L2, Method.CLOSED_FORM_L2),
    "logistic/l2": (LossKind.LOGISTIC, RegKind.L2, Method.BISECTION_L2),
    "hinge/l1": (LossKind.HINGE, RegKind.L1, Method.CLOSED_FORM_L1),
    "squared_hinge/l1": (LossKind.SQUARED_HINGE, RegKind.L1, Method.CLOSED_FORM_L1),
    "logistic/l1": (LossKind.LOGISTIC, RegKind.L1, Method.CLOSED_FORM_L1),
    "trivial": (LossKind.HINGE, RegKind.L2, Method.TRIVIAL),
    "logistic_partial": (LossKind.LOGISTIC, RegKind.L2, Method.LOGISTIC_PARTIAL),
}
ENVELOPES = [k for k, (_, _, m) in IMPLEMENTATIONS.items() if m not in (Method.TRIVIAL, Method.LOGISTIC_PARTIAL)]


@dataclass
class Report:
    suite: str
    name: str
    max_violation: float
    tolerance: float
    samples: int
    worst: Dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return (
            f"{self.suite:<12} {self.name:<18} max={self.max_violation:.3e} tol={self.tolerance:.0e} "
            f"n={self.samples} {status}"
        )


def random_term(rng: np.random.Generator, name: str, m: int = 1) -> TermExtension:
    """A random term for implementation ``name``: features, ``C``, class weights and box."""
    kind, regkind, method = IMPLEMENTATIONS[name]
    x = rng.normal(size=m)
    C = float(rng.uniform(0.5, 8.0))
    if method is Method.LOGISTIC_PARTIAL:
        c = float(rng.uniform(0.5, 2.0))
        loss = LossSpec(kind, c, c)
    elif method is Method.TRIVIAL:
        kinds = [LossKind.HINGE, LossKind.SQUARED_HINGE, LossKind.LOGISTIC]
        loss = LossSpec(kinds[int(rng.integers(3))], float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
    else:
        loss = LossSpec(kind, float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
    if regkind is RegKind.L1:
        B = tuple(float(b) for b in rng.uniform(1.0, 4.0, size=m))
        reg = RegularizerSpec(RegKind.L1, lower=tuple(-b for b in B), upper=B)
    elif method is Method.TRIVIAL:
        B = tuple(float(b) for b in rng.uniform(1.0, 4.0, size=m))
        reg = RegularizerSpec(RegKind.L2, lower=tuple(-b for b in B), upper=B)
    else:
        reg = RegularizerSpec(RegKind.L2, half=bool(rng.integers(2)))
    return TermExtension(x, C, loss, reg, method)


def _describe(ext: TermExtension, **extra) -> Dict:
    lo, hi = ext.box
    out = {
        "x": ext.x.tolist(),
        "C": ext.C,
        "loss": ext.loss.kind.value,
        "c0": ext.loss.c0,
        "c1": ext.loss.c1,
        "reg": ext.reg.kind.value,
        "half": ext.reg.half,
        "lower": lo.tolist(),
        "upper": hi.tolist(),
        "method": ext.method.value,
    }
    for k, v in extra.items():
        out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


def _theta_box(ext: TermExtension) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = ext.box
    return np.where(np.isfinite(lo), lo, -L2_SPAN), np.where(np.isfinite(hi), hi, L2_SPAN)


def _sample_theta(rng, ext: TermExtension) -> np.ndarray:
    lo, hi = _theta_box(ext)
    return rng.uniform(lo, hi)


# ---------------------------------------------------------------------------
# suites


def extension_suite(samples: int = 101, seed: int = 0, configs: int = 3) -> List[Report]:
    """Extension property: the value at ``y`` in {0, 1} equals ``d(theta, y)`` on a grid."""
    rng = np.random.default_rng(seed)
    out = []
    for name in IMPLEMENTATIONS:
        t = time.perf_counter()
        worst, info, n = 0.0, {}, 0
        for _ in range(configs):
            ext = random_term(rng, name, m=int(rng.integers(1, 3)))
            lo, hi = _theta_box(ext)
            # grid along the box diagonal
            for s in np.linspace(0.0, 1.0, samples):
                theta = lo + s * (hi - lo)
                for label in (0, 1):
                    err = abs(envelope_value(ext, theta, float(label)) - ext.d(theta, label))
                    n += 1
                    if err > worst:
                        worst, info = err, _describe(ext, theta=theta, y=label)
        out.append(Report("extension", name, worst, 1e-9, n, info, time.perf_counter() - t))
    return out


def oracle_suite(samples: int = 200, seed: int = 0, m: int = 1, step: Optional[float] = None) -> List[Report]:
    """Closed-form and bisection envelopes against the grid/golden-section oracle."""
    rng = np.random.default_rng(seed)
    step = step if step is not None else (0.01 if m == 1 else 0.1)
    out = []
    for name in ENVELOPES:
        t = time.perf_counter()
        tol = 1e-3 if IMPLEMENTATIONS[name][0] is LossKind.LOGISTIC else 1e-4
        worst, info = 0.0, {}
        for _ in range(samples):
            ext = random_term(rng, name, m)
            theta = _sample_theta(rng, ext)
            y = float(rng.uniform(0.01, 0.99))
            lo, hi = ext.box
            if ext.bounded:
                # theta1 stays in the box exactly when theta0 is in this (product) box;
                # handing it to the oracle keeps thin feasible slices from slipping between grid points
                blo = np.maximum(lo, (theta - y * hi) / (1.0 - y))
                bhi = np.maximum(blo, np.minimum(hi, (theta - y * lo) / (1.0 - y)))
                box = GridSpec(tuple(blo), tuple(bhi), step)
            else:
                # the oracle widens the box when its minimum sits on the edge
                box = GridSpec(tuple(theta - L2_SPAN), tuple(theta + L2_SPAN), step)
            ref = oracle_psi(lambda T: ext.d_batch(T, 0), lambda T: ext.d_batch(T, 1), theta, y, box)
            err = abs(envelope_value(ext, theta, y) - ref)
            if err > worst:
                worst, info = err, _describe(ext, theta=theta, y=y, oracle=ref)
        out.append(Report(f"oracle(m={m})", name, worst, tol, samples, info, time.perf_counter() - t))
    return out


def _surface(ext: TermExtension) -> Callable[[np.ndarray], float]:
    return lambda p: envelope_value(ext, p[:-1], float(p[-1]))


def convexity_suite(samples: int = 10_000, seed: int = 0) -> List[Report]:
    """Convexity along random chords of ``(theta, y)`` for one random term per implementation."""
    rng = np.random.default_rng(seed)
    out = []
    for name in IMPLEMENTATIONS:
        t = time.perf_counter()
        ext = random_term(rng, name, m=int(rng.integers(1, 3)))
        lo, hi = _theta_box(ext)
        viol = oracle_convexity(
            _surface(ext), np.append(lo, 0.0), np.append(hi, 1.0), samples, int(rng.integers(2**31))
        )
        out.append(Report("convexity", name, max(viol, 0.0), 1e-8, samples, _describe(ext), time.perf_counter() - t))
    return out


def raw_surface(loss: LossKind = LossKind.HINGE, C: float = 5.0, x: float = 1.0) -> Callable[[np.ndarray], float]:
    """``0.5 theta^2 + C l(x theta, y)`` with ``y`` plugged into the loss formula (not convex)."""
    spec = LossSpec(loss)
    return lambda p: 0.5 * p[0] ** 2 + C * loss_value(spec, x * p[0], float(p[1]))


def raw_convexity_control(samples: int = 10_000, seed: int = 0) -> Report:
    """Negative control: the raw interpolated objective must show a clear violation.

    ``passed`` is true when the violation exceeds 0.01, i.e. the probe works.
    """
    t = time.perf_counter()
    viol = oracle_convexity(raw_surface(), [-3.0, 0.0], [3.0, 1.0], samples, seed)
    # stored negated so that Report.passed reads "violation detected"
    return Report("control", "raw hinge/l2", 0.01 - viol, 0.0, samples,
                  {"violation": viol, "C": 5.0, "x": 1.0}, time.perf_counter() - t)


def subgradient_suite(samples: int = 1000, seed: int = 0, fd_step: float = 1e-6) -> List[Report]:
    """Global subgradient inequality on random pairs, and finite differences where smooth.

    Two reports per implementation: ``-min slack`` (tolerance 1e-8) and the
    largest finite-difference mismatch at points where the one-sided
    differences agree (tolerance 1e-5).
    """
    rng = np.random.default_rng(seed)
    out = []
    for name in IMPLEMENTATIONS:
        t = time.perf_counter()
        worst, info = 0.0, {}
        fd_worst, fd_info, fd_n = 0.0, {}, 0
        ext = None
        for i in range(samples):
            if i % 50 == 0:
                ext = random_term(rng, name, m=int(rng.integers(1, 3)))
                lo, hi = _theta_box(ext)
            tp = rng.uniform(lo, hi)
            yp = float(rng.uniform(0.01, 0.99))
            tq = rng.uniform(lo, hi)
            u = rng.uniform()
            yq = 0.0 if u < 0.05 else 1.0 if u < 0.1 else float(rng.uniform(0.0, 1.0))
            pair = envelope_subgradient(ext, tp, yp)
            fp = envelope_value(ext, tp, yp)
            fq = envelope_value(ext, tq, yq)
            slack = fq - (fp + float(pair.v @ (tq - tp)) + pair.w * (yq - yp))
            if -slack > worst:
                worst, info = -slack, _describe(ext, p_theta=tp, p_y=yp, q_theta=tq, q_y=yq, slack=slack)
            # finite differences along a random direction, away from the box and the label boundary
            if not 0.05 <= yp <= 0.95:
                continue
            d = rng.normal(size=tp.size + 1)
            d /= np.linalg.norm(d)
            h = fd_step
            pp, pm = np.append(tp, yp) + h * d, np.append(tp, yp) - h * d
            if np.any(pp[:-1] > hi) or np.any(pm[:-1] < lo) or np.any(pm[:-1] > hi) or np.any(pp[:-1] < lo):
                continue
            fplus = envelope_value(ext, pp[:-1], float(pp[-1]))
            fminus = envelope_value(ext, pm[:-1], float(pm[-1]))
            fwd, bwd = (fplus - fp) / h, (fp - fminus) / h
            scale = 1.0 + abs(fp)
            if abs(fwd - bwd) > 1e-6 * scale:
                continue  # kink within reach of the step
            fd_n += 1
            err = abs(0.5 * (fwd + bwd) - (float(pair.v @ d[:-1]) + pair.w * d[-1])) / scale
            if err > fd_worst:
                fd_worst, fd_info = err, _describe(ext, theta=tp, y=yp, direction=d)
        out.append(Report("subgradient", name, worst, 1e-8, samples, info, time.perf_counter() - t))
        out.append(Report("finite-diff", name, fd_worst, 1e-5, fd_n, fd_info, 0.0))
    return out


def candidate_suite(samples: int = 500, seed: int = 0, max_tries: int = 50) -> List[Report]:
    """Closed-form candidates cover every hinge and squared hinge root without generic search.

    For L2, every problem must be solved by a listed candidate; for L1, every
    back-off inside the greedy push must be.  The chosen ``z`` is re-validated
    against the root inclusion at 1e-9.  The violation reported is the number
    of fallbacks plus the largest validation residual.
    """
    rng = np.random.default_rng(seed)
    out = []
    for kind in (LossKind.HINGE, LossKind.SQUARED_HINGE):
        t = time.perf_counter()
        fallbacks, resid, info = 0, 0.0, {}
        for _ in range(samples):
            ext = random_term(rng, f"{kind.value}/l2", m=int(rng.integers(1, 3)))
            theta = _sample_theta(rng, ext)
            y = float(rng.uniform(0.01, 0.99))
            p = L2EnvelopeProblem(ext.x, ext.C, ext.loss, theta, y, ext.rho)
            s = solve_l2_envelope(p, allow_fallback=True)
            if s.route != "candidate":
                fallbacks += 1
                info = _describe(ext, theta=theta, y=y, route=s.route)
                continue
            R = l2_root_residual(p, s.z, 1e-9)
            r = max(0.0, R.lo, -R.hi)
            if r > resid:
                resid, info = r, _describe(ext, theta=theta, y=y, z=s.z)
        out.append(Report("candidates", f"{kind.value}/l2", fallbacks + resid, 1e-9, samples, info,
                          time.perf_counter() - t))

        t = time.perf_counter()
        fallbacks, resid, info, got, tries = 0, 0.0, {}, 0, 0
        while got < samples and tries < samples * max_tries:
            tries += 1
            ext = random_term(rng, f"{kind.value}/l1", m=int(rng.integers(1, 3)))
            theta = _sample_theta(rng, ext)
            y = float(rng.uniform(0.01, 0.99))
            lo, hi = ext.box
            p = L1EnvelopeProblem(ext.x, ext.C, ext.loss, theta, y, lo, hi)
            route: List[str] = []
            s = l1_envelope_value(p, route=route)
            if s.k is None:
                continue  # no back-off needed; nothing to test
            got += 1
            if any(not r.startswith("candidate") for r in route):
                fallbacks += 1
                info = _describe(ext, theta=theta, y=y, route=route)
                continue
            xk = abs(p.x[s.k])
            A = a_multimap(p, float(p.x @ s.theta0), 1e-9) * (p.C * xk)
            r = max(0.0, A.lo - 2.0, 2.0 - A.hi)
            if r > resid:
                resid, info = r, _describe(ext, theta=theta, y=y, k=s.k, z=s.z)
        out.append(Report("candidates", f"{kind.value}/l1", fallbacks + resid + (samples - got), 1e-9, got, info,
                          time.perf_counter() - t))
    return out


SUITES = {
    "extension": extension_suite,
    "oracle": oracle_suite,
    "convexity": convexity_suite,
    "subgradient": subgradient_suite,
    "candidates": candidate_suite,
}
