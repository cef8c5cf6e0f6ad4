"""Reference methods: a rectangular trisection refiner and uniform sampling.

The refiner is a simplified stand-in for DEFER-style partitioning.  Every
cell is an axis-aligned box holding the value at its center; the cell with
the largest ``(|value| + eta) * volume`` is cut into three equal slabs along
its longest edge, so the middle slab keeps the parent's center and value and
only the two outer centers need new evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import RunTrace, _evaluate
from .exceptions import ConfigurationError, EvaluationError, InvalidInputError, RunError
from .geometry import BoundingBox
from .spatial_index import Dataset

__all__ = ["BoxCell", "Partition", "defer_step", "defer_predict", "defer_run", "nannr_run"]

ETA_REL = 1e-6


@dataclass(frozen=True)
class BoxCell:
    id: int
    lo: np.ndarray
    hi: np.ndarray
    center: np.ndarray
    value: float
    score: float


class Partition:
    """Cells of a box partition, stored column-wise; cell ids are row numbers."""

    def __init__(self, box: BoundingBox, f):
        if getattr(f, "domain", None) is not None:
            raise ConfigurationError("the rectangular refiner does not support restricted domains")
        self.box = box
        self.f = f
        m = box.dim
        self._lo = np.empty((64, m))
        self._hi = np.empty((64, m))
        self._val = np.empty(64)
        self._n = 0
        self.evaluations = 0
        self.trace = RunTrace(m)
        c = box.center
        v = _evaluate(f, c)
        self.evaluations += 1
        self._push(box.lo, box.hi, v)
        self.trace.record(c, v, float("nan"), False, 1, 0.0, float("nan"))

    def __len__(self) -> int:
        return self._n

    def _push(self, lo, hi, value) -> int:
        if self._n == len(self._val):
            grow = 2 * len(self._val)
            for name in ("_lo", "_hi"):
                a = getattr(self, name)
                b = np.empty((grow, a.shape[1]))
                b[: self._n] = a[: self._n]
                setattr(self, name, b)
            v = np.empty(grow)
            v[: self._n] = self._val[: self._n]
            self._val = v
        i = self._n
        self._lo[i], self._hi[i], self._val[i] = lo, hi, value
        self._n += 1
        return i

    @property
    def lo(self) -> np.ndarray:
        return self._lo[: self._n]

    @property
    def hi(self) -> np.ndarray:
        return self._hi[: self._n]

    @property
    def values(self) -> np.ndarray:
        return self._val[: self._n]

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def volumes(self) -> np.ndarray:
        return np.prod(self.hi - self.lo, axis=1)

    def scores(self) -> np.ndarray:
        v = np.abs(self.values)
        eta = ETA_REL * (v.max() + 1.0)
        return (v + eta) * self.volumes

    def cell(self, i: int) -> BoxCell:
        return BoxCell(i, self.lo[i].copy(), self.hi[i].copy(), self.centers[i], float(self.values[i]),
                       float(self.scores()[i]))

    def cells(self) -> list:
        return [self.cell(i) for i in range(self._n)]

    def locate(self, xs) -> np.ndarray:
        """Lowest id of a cell containing each row of ``xs`` (closed boxes)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if not np.all(self.box.contains(xs, tol=1e-12)):
            raise InvalidInputError("query point outside the partitioned box")
        out = np.empty(len(xs), dtype=int)
        lo, hi = self.lo, self.hi
        chunk = max(1, 4_000_000 // max(1, self._n * self.box.dim))
        for s in range(0, len(xs), chunk):
            x = xs[s : s + chunk, None, :]
            inside = ((x >= lo - 1e-12) & (x <= hi + 1e-12)).all(axis=2)
            out[s : s + chunk] = np.argmax(inside, axis=1)
        return out


def defer_step(partition: Partition, f=None):
    """Split the best cell; returns the two new query points."""
    f = partition.f if f is None else f
    s = partition.scores()
    # oldest cell among the (rounding-level) ties for the maximum
    i = int(np.argmax(s >= s.max() * (1.0 - 1e-12)))
    lo, hi, v = partition.lo[i].copy(), partition.hi[i].copy(), float(partition.values[i])
    w = hi - lo
    ax = int(np.argmax(w))
    third = w[ax] / 3.0
    cuts = [lo[ax], lo[ax] + third, lo[ax] + 2 * third, hi[ax]]
    # the middle slab replaces the parent in place and keeps its value
    partition._lo[i, ax], partition._hi[i, ax] = cuts[1], cuts[2]
    queries = []
    for a, b in ((cuts[0], cuts[1]), (cuts[2], cuts[3])):
        clo, chi = lo.copy(), hi.copy()
        clo[ax], chi[ax] = a, b
        c = 0.5 * (clo + chi)
        val = _evaluate(f, c)
        partition.evaluations += 1
        partition._push(clo, chi, val)
        partition.trace.record(c, val, float(s[i]), False, len(partition), 0.0, float("nan"))
        queries.append(c)
    return queries, partition


def defer_predict(partition: Partition, x):
    """Value of the cell containing ``x``; a single point gives a float."""
    x = np.asarray(x, dtype=float)
    vals = partition.values[partition.locate(x)]
    return float(vals[0]) if x.ndim == 1 else vals


def defer_run(box: BoundingBox, f, budget: int) -> Partition:
    """Refine until at most ``budget`` evaluations have been spent (1 + 2k)."""
    if budget < 1:
        raise ConfigurationError("budget must be >= 1")
    part = Partition(box, f)
    try:
        for _ in range((budget - 1) // 2):
            defer_step(part, f)
    except EvaluationError as exc:
        raise RunError(str(exc), trace=part.trace, cause=exc) from exc
    return part


def nannr_run(box: BoundingBox, f, budget: int, seed: int = 0) -> Dataset:
    """Uniform i.i.d. queries (rejection-sampled inside a restricted domain)."""
    if budget < 1:
        raise ConfigurationError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    inside = getattr(f, "domain", None)
    trace = RunTrace(box.dim)
    pts, vals = [], []
    try:
        while len(pts) < budget:
            x = box.sample(rng, 1)[0]
            if inside is not None and not inside(x):
                continue
            v = _evaluate(f, x)
            pts.append(x)
            vals.append(v)
            trace.record(x, v, float("nan"), False, 0, 0.0, float("nan"))
    except EvaluationError as exc:
        raise RunError(str(exc), trace=trace, cause=exc) from exc
    ds = Dataset(np.array(pts), vals)
    ds.trace = trace
    return ds
