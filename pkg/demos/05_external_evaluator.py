"""Drive ANNR with a function that lives in another process.

The evaluator speaks a line protocol (HELLO/READY, then EVAL x0 x1 ... and
one number back per line).  Here the evaluator is the package's own server
for a built-in target; any program that follows the protocol works.
"""

import sys

from annr import ANNR, EngineConfig, builtin
from annr.external import ExternalFunction

f = builtin("gaussian")
cfg = EngineConfig(dim=2, box=f.box, budget=50, seed=1, epsilon=1e-12)
with ExternalFunction([sys.executable, "-m", "annr.external", "gaussian"], dim=2) as remote:
    trace = ANNR(cfg, remote).run()
    print(f"{remote.calls} evaluations over the pipe, last s_t = {trace.scores[-1]:.4g}")
local = ANNR(cfg, f).run()
print("same queries as in-process:", (trace.query_points == local.query_points).all())
