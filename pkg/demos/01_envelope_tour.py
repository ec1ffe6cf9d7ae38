"""A one-sample hinge term, with and without its convex extension.

Plugging a fractional label straight into the hinge formula gives a surface
that is not convex in (theta, y).  The binary envelope replaces the fractional
part by the best split of theta into a y = 0 piece and a y = 1 piece.
"""
import numpy as np

from convext import LossSpec, Method, RegularizerSpec, TermExtension, envelope_subgradient, envelope_value, oracle_convexity
from convext.envelope import envelope_solution
from convext.checks import raw_surface

ext = TermExtension([1.0], 5.0, LossSpec("hinge"), RegularizerSpec("l2"), Method.CLOSED_FORM_L2)

print("term: d(theta, y) = theta^2 / 2 + 5 * hinge(theta, y)\n")
print(f"{'theta':>6} {'y':>5} {'raw':>9} {'envelope':>9}")
raw = raw_surface()
for theta in (-3.0, -1.0, 0.0, 1.5):
    for y in (0.0, 0.25, 0.5, 1.0):
        print(f"{theta:6.2f} {y:5.2f} {raw(np.array([theta, y])):9.4f} {envelope_value(ext, [theta], y):9.4f}")

value, t0, t1 = envelope_solution(ext, [0.0], 0.5)
print(f"\nat theta = 0, y = 0.5 the best split is theta0 = {t0[0]:.3f}, theta1 = {t1[0]:.3f}"
      f", value {value:.3f}")
pair = envelope_subgradient(ext, [0.0], 0.5)
print(f"a subgradient there: v = {pair.v[0]:.3f}, w = {pair.w:.3f}")

box = ([-3.0, 0.0], [3.0, 1.0])
print("\nlargest convexity violation over 5000 random chords:")
print(f"  raw surface      {oracle_convexity(raw, *box, samples=5000):.4f}")
env_viol = oracle_convexity(lambda p: envelope_value(ext, p[:1], p[1]), *box, samples=5000)
print(f"  envelope surface {max(env_viol, 0.0):.2e}")
