"""ANNR against the rectangular refiner and uniform sampling on a spiral band.

Same budget of 400 evaluations and the same 100 x 100 grid test set for all
three.  Pass a repetition count as the first argument (default 3).
"""

import sys

from annr.harness import ExperimentConfig, compare

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 3
configs = [
    ExperimentConfig(method=m, target="spiral", budget=400, repetitions=reps, epsilon=1e-12,
                     test_mode="grid", test_size=10_000, checkpoints=(100, 200, 400))
    for m in ("annr", "defer", "nannr")
]
rows, table = compare(configs)
print(table)
