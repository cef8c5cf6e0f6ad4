"""A unit ball indicator in six dimensions, sampled inside [-2, 2]^6.

Only about 1.6% of the box lies inside the ball, so uniform sampling wastes
almost every query.  ANNR starts from the 64 box corners and moves its
queries onto the sphere where f jumps.  The histogram compares the norms of
the queried points.  First argument: total evaluations (default 2000).
"""

import sys

import numpy as np

from annr import ANNR, EngineConfig, builtin, make_test_set, mae, norm_histogram
from annr.baselines import nannr_run

n = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
f = builtin("ball")
cfg = EngineConfig(dim=6, box=f.box, lam=f.box.volume, budget=n - 64, n_init=0, epsilon=1e-300, seed=0)
eng = ANNR(cfg, f)
trace = eng.run()
uniform = nannr_run(f.box, f, n, seed=0)

upper = 2 * np.sqrt(6)
ca, _, edges = norm_histogram(trace.query_points, 12, upper)
cu, _, _ = norm_histogram(uniform.points, 12, upper)
print(" |x| bin        annr  uniform")
for lo, hi, a, u in zip(edges, edges[1:], ca, cu):
    print(f" {lo:4.2f}-{hi:4.2f}  {a:6d}  {u:7d}")

test = make_test_set(f, 20_000, "uniform", seed=1)
print(f"MAE annr {mae(eng.dataset.predict, test):.5f}  uniform {mae(uniform.predict, test):.5f}")
