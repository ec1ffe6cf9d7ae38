"""Choosing unknown labels together with the classifier.

Six points on a line, two of them labeled, and the rule that exactly three are
positive.  The mixed-integer problem picks labels and theta jointly.  Its
relaxation over fractional labels gives a lower bound whose quality depends
on the extension, and branch-and-bound closes the gap.
"""
import numpy as np

from convext import (
    Decomposition,
    Instance,
    LabelConstraintSet,
    LossSpec,
    RegularizerSpec,
    branch_and_bound,
    oracle_mip,
    solve_relaxation,
)

X = np.array([[-2.0], [-1.5], [-0.2], [0.3], [1.4], [2.1]])
labels = LabelConstraintSet(6, fixed={0: 0, 5: 1}, cardinality=3)
inst = Instance(X, 4.0, LossSpec("hinge"), RegularizerSpec("l2"), labels)

print("points:", X.ravel().tolist())
print("known: sample 0 negative, sample 5 positive; three positives in total\n")

for ext in ("trivial", "decomposed", "theorem1"):
    rel = solve_relaxation(inst, ext)
    print(f"relaxation with the {ext:<10} extension: {rel.value:.5f}   labels {np.round(rel.y, 3).tolist()}")

nodes = []
res = branch_and_bound(inst, node_callback=nodes.append)
print(f"\nbranch-and-bound: value {res.incumbent_value:.5f}, labels {res.incumbent_y.astype(int).tolist()}, "
      f"theta {res.incumbent_theta[0]:.4f}")
print(f"  {res.nodes_explored} nodes, proven gap {res.proven_gap:.1e}")
for n in nodes:
    bound = n.relaxation.lower_bound if n.relaxation else float("nan")
    print(f"  node {n.index}: depth {n.depth}, fixed {n.labels.fixed}, bound {bound:.5f}, {n.status}")

ref = oracle_mip(inst)
print(f"\nexhaustive check over all labelings: {ref.value:.5f}, labels {ref.y.astype(int).tolist()}")

loss_only = Instance(X, 4.0, LossSpec("hinge"), RegularizerSpec("l2"), labels, Decomposition.LOSS_ONLY)
print(f"same problem, trivial extension throughout: {branch_and_bound(loss_only, 'trivial').incumbent_value:.5f}")
