"""Export (theta, y, value) grids with the command line tool.

Writes a few surfaces into a scratch directory and reports simple facts about
each: the range of values, whether the y = 0 and y = 1 edges agree with the
raw objective, and the most negative second difference along y (convexity).
"""
import contextlib
import csv
import io
import os
import sys
import tempfile

import numpy as np

from convext.cli import main

out = tempfile.mkdtemp(prefix="convext-surfaces-")
runs = {
    "logistic_l2": ["--loss", "logistic", "--reg", "l2", "--C", "16"],
    "hinge_l1_box": ["--loss", "hinge", "--reg", "l1", "--C", "5", "--bound", "3.1"],
    "squared_hinge_l1_box": ["--loss", "squared_hinge", "--reg", "l1", "--C", "4", "--bound", "3.1"],
}
grid = ["--theta=-3:3:0.1", "--y", "0:1:0.05"]
for name, args in runs.items():
    path = os.path.join(out, name + ".csv")
    for ext, target in (("decomposed", path), ("raw", path + ".raw")):
        with contextlib.redirect_stdout(io.StringIO()):
            rc = main(["surface", *args, *grid, "--extension", ext, "--out", target])
        if rc:
            sys.exit(rc)
    with open(path) as fh:
        rows = np.array([[float(v) for v in r] for r in list(csv.reader(fh))[1:]])
    with open(path + ".raw") as fh:
        raw = np.array([[float(v) for v in r] for r in list(csv.reader(fh))[1:]])
    edge = np.isin(rows[:, 1], [0.0, 1.0])
    gap = np.max(np.abs(rows[edge, 2] - raw[edge, 2]))
    Z = rows[:, 2].reshape(61, 21)
    curv = np.min(Z[:, :-2] - 2 * Z[:, 1:-1] + Z[:, 2:])
    print(f"{name:<22} {len(rows)} rows, values in [{rows[:, 2].min():.3f}, {rows[:, 2].max():.3f}], "
          f"edge mismatch {gap:.1e}, min second difference in y {curv:.1e}")
print(f"\nfiles in {out}")
