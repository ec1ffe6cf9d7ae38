"""Why the L1 extension needs a bounded parameter.

With ||theta||_1 and no bounds, a tiny weight on the "other" label can absorb
any amount of loss by sending its share of theta far away.  The extension then
sits well below d(theta, 1) right up to y = 1 and jumps there.  With a box the
split cannot run away and the surface is continuous.
"""
from convext.cli import surface_function

theta = -3.0
bounded = surface_function("hinge", "l1", 5.0, 1.0, bound=3.1)
unbounded = surface_function("hinge", "l1", 5.0, 1.0, diagnostic_unbounded=True)
raw = surface_function("hinge", "l1", 5.0, 1.0, "raw", bound=3.1)

print(f"hinge + ||theta||_1, C = 5, x = 1, theta = {theta}")
print(f"d(theta, 1) = {raw(theta, 1.0):.4f}\n")
print(f"{'y':>9} {'box [-3.1, 3.1]':>16} {'unbounded':>10}")
for y in (0.5, 0.9, 0.99, 0.999, 0.9999, 1.0):
    print(f"{y:9.6f} {bounded(theta, y):16.4f} {unbounded(theta, y):10.4f}")
print("\nthe bounded column approaches d(theta, 1); the unbounded one stays far below and jumps at y = 1")
print("(the unbounded column is computed on the box [-1e6, 1e6], so it follows the limit until 1 - y ~ 3e-6)")
