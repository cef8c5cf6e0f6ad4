"""Rotate an ellipse indicator and watch each method's error.

Axis-aligned boxes fit the ellipse best at 0 degrees and get worse as it
turns; the Delaunay refinement has no preferred axis.
"""

import sys

from annr.harness import ExperimentConfig, sweep

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 3
configs = [ExperimentConfig(method=m, target="ellipse", budget=300, repetitions=reps, epsilon=1e-12,
                            test_mode="grid", test_size=10_000) for m in ("annr", "defer")]
rows, table = sweep(configs, "target.angle", [0, 10, 20, 30, 40])
print(table)
