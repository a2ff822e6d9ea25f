"""Sparsification and oracle curves on a four-point toy problem.

Walks through the core metric by hand: four points relevant to one class,
two classified correctly and two not, with confidence values that rank one
error above one of the correct points.
"""
import numpy as np

from sparseval import (
    ClassCatalog,
    FractionGrid,
    LabelArray,
    ProbabilityStack,
    ause,
    brute_force_ause,
    curve_pair,
    max_softmax_confidence,
)

# Two classes; every point has ground truth "road". The model gets points
# 0 and 2 right and misses points 1 and 3. Its confidence decreases with the
# point index, so the most confident point is correct (good) but the second
# most confident one is an error (bad).
catalog = ClassCatalog(("road", "person"))
gt = LabelArray(np.array([0, 0, 0, 0]))
rows = np.array(
    [
        [0.90, 0.10],  # correct, very confident
        [0.20, 0.80],  # wrong and confident about it
        [0.70, 0.30],  # correct
        [0.40, 0.60],  # wrong, least confident
    ]
)
probs = ProbabilityStack(rows[None])

conf, pred = max_softmax_confidence(probs)
print("predictions:", pred.values, " confidence:", conf.scores)

# Remove 0%, 25%, 50%, 75% of the class-relevant points, lowest confidence
# first, and look at the remaining IoU error after each cut.
grid = FractionGrid(4)
pair = curve_pair(pred, gt, conf, catalog, class_index=0, grid=grid)

print("\nfraction removed | ranking error | oracle error")
for f, s, o in zip(grid.steps, pair.sparsification_error, pair.oracle_error):
    print(f"{f:16.2f} | {s:13.4f} | {o:12.4f}")

# The oracle removes the two errors first and reaches error 0 at 50%.
# The confidence ranking removes the correct point 2 before the confident
# error at point 1, so it lags behind at the 50% cut. The mean gap is the
# area under the sparsification error curve.
print("\nAUSE:", ause(pair))
print("brute force cross-check:", brute_force_ause(pred, gt, conf, catalog, 0))

# A perfectly ranked model (errors least confident) matches the oracle and
# scores 0, whatever its accuracy is.
perfect_rows = rows.copy()
perfect_rows[[1, 3]] = [[0.45, 0.55], [0.48, 0.52]]  # errors, barely confident
perfect = ProbabilityStack(perfect_rows[None])
conf_p, pred_p = max_softmax_confidence(perfect)
pair_p = curve_pair(pred_p, gt, conf_p, catalog, 0, grid)
print("\nperfectly ranked AUSE:", ause(pair_p))
