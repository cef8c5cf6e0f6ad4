"""The active query loop.

Each step runs a short batch of skeleton walks on the current dataset, scores
the newly discovered Delaunay simplices by the volume of their lifting onto
``lambda * f``, and queries the circumcenter of the best surviving candidate
(pulled back onto the box boundary when it falls outside).  Candidates live
in a max-heap across steps and are revalidated only when they reach the top.
"""

from __future__ import annotations

import csv
import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConfigurationError,
    EvaluationError,
    InitializationError,
    RunError,
    StalledEngineError,
)
from .geometry import BoundingBox, clamp_to_boundary, clipped_score, lifted_volumes, simplex_volumes
from .spatial_index import DUPLICATE_TOL, Dataset
from .walk import EMPTY_SPHERE_RTOL, SimplexCandidate, cell_walk, skeleton_walk, validate_many, visibility_walk

log = logging.getLogger(__name__)

__all__ = ["EngineConfig", "RunTrace", "ANNR", "initialize", "resolve_lambda", "run", "nnr_predict"]

# slack on the "no earlier point inside the circumsphere" check for queries
QUERY_EMPTY_RTOL = 1e-6


@dataclass
class EngineConfig:
    """Settings of one ANNR run.

    ``lam`` is a nonnegative float or ``"auto"``; ``alpha0`` is the clipping
    angle in degrees or ``None``.  ``walk_steps`` is the number of skeleton
    moves per step, shared between the seeded walks of that step;
    ``cell_steps`` caps the extra walk around the newest datapoint's cell.
    """

    dim: int
    box: BoundingBox
    lam: float | str = "auto"
    epsilon: float = 1e-3
    budget: int = 100
    walk_steps: int = 25
    cell_steps: int = 32
    alpha0: float | None = None
    n_init: int = 10
    include_corners: bool = True
    seed: int = 0
    top_k: int = 4
    retries: int = 8
    check_invariants: bool = False

    def __post_init__(self):
        if not isinstance(self.box, BoundingBox):
            self.box = BoundingBox(*self.box)
        if self.dim < 1 or self.box.dim != self.dim:
            raise ConfigurationError(f"box has dimension {self.box.dim}, config says {self.dim}")
        if isinstance(self.lam, str):
            if self.lam != "auto":
                raise ConfigurationError(f"lambda must be a number or 'auto', got {self.lam!r}")
        elif not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigurationError(f"lambda must be finite and >= 0, got {self.lam}")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if self.walk_steps < 1 or self.cell_steps < 1:
            raise ConfigurationError("walk_steps and cell_steps must be >= 1")
        if self.alpha0 is not None and not 0 < self.alpha0 < 90:
            raise ConfigurationError(f"alpha0 must lie in (0, 90) degrees, got {self.alpha0}")
        if self.n_init < 0 or self.top_k < 0 or self.retries < 1:
            raise ConfigurationError("n_init, top_k must be >= 0 and retries >= 1")
        n0 = self.n_init + (2**self.dim if self.include_corners else 0)
        if n0 < self.dim + 1:
            raise ConfigurationError(f"{n0} initial points cannot span a simplex in R^{self.dim}")


@dataclass
class RunTrace:
    """Per-step log of a run."""

    dim: int
    points: list = field(default_factory=list)
    values: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    clamped: list = field(default_factory=list)
    pool_sizes: list = field(default_factory=list)
    ms: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    lam: float = float("nan")
    n_init: int = 0
    violations: int = 0

    def __len__(self) -> int:
        return len(self.points)

    def record(self, point, value, score, clamped, pool_size, ms, radius):
        self.points.append(np.array(point, dtype=float))
        self.values.append(float(value))
        self.scores.append(float(score))
        self.clamped.append(bool(clamped))
        self.pool_sizes.append(int(pool_size))
        self.ms.append(float(ms))
        self.radii.append(float(radius))

    @property
    def query_points(self) -> np.ndarray:
        return np.array(self.points).reshape(-1, self.dim)

    def header(self, timing: bool = True) -> list:
        cols = ["t"] + [f"x_{i}" for i in range(self.dim)] + ["f", "s_t", "clamped", "pool_size"]
        return cols + ["ms"] if timing else cols

    def rows(self, timing: bool = True):
        for t in range(len(self)):
            row = [t + 1, *(repr(float(c)) for c in self.points[t]), repr(self.values[t]),
                   repr(self.scores[t]), int(self.clamped[t]), self.pool_sizes[t]]
            if timing:
                row.append(f"{self.ms[t]:.3f}")
            yield row

    def write_csv(self, fh, timing: bool = True):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.header(timing))
        w.writerows(self.rows(timing))


def _evaluate(f, x, err=EvaluationError) -> float:
    try:
        raw = f(x)
    except EvaluationError as exc:
        if err is EvaluationError:
            raise
        raise err(str(exc), raw=exc.raw, point=x) from exc
    except Exception as exc:
        raise err(f"evaluation failed at {x}: {exc}", raw=repr(exc), point=x) from exc
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise err(f"non-numeric value {raw!r} at {x}", raw=raw, point=x) from None
    if not math.isfinite(v):
        raise err(f"non-finite value {v} at {x}", raw=raw, point=x)
    return v


def _domain(f):
    return getattr(f, "domain", None)


def initialize(config: EngineConfig, f, rng=None) -> Dataset:
    """Box corners (optional) followed by ``n_init`` uniform samples, all evaluated.

    A target with a ``domain`` predicate skips corners outside it and draws
    the samples by rejection.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    inside = _domain(f)
    pts = []
    if config.include_corners:
        pts.extend(c for c in config.box.corners() if inside is None or inside(c))
    drawn = 0
    while drawn < config.n_init:
        x = config.box.sample(rng, 1)[0]
        if inside is not None and not inside(x):
            continue
        pts.append(x)
        drawn += 1
    if len(pts) < config.dim + 1:
        raise ConfigurationError(f"only {len(pts)} initial points inside the domain")
    vals = [_evaluate(f, p, InitializationError) for p in pts]
    return Dataset(np.array(pts), vals)


def resolve_lambda(dataset: Dataset, box: BoundingBox) -> float:
    """``Vol(box) / (max f - min f)`` over the dataset; 1 when the values are constant."""
    v = dataset.values
    spread = float(v.max() - v.min()) if len(v) else 0.0
    if not spread > 0:
        log.warning("initial values are constant; falling back to lambda = 1")
        return 1.0
    return box.volume / spread


def nnr_predict(dataset: Dataset, x):
    """Value at the nearest datapoint (the piecewise-constant regressor)."""
    return dataset.predict(x)


class ANNR:
    """Stateful engine; ``run()`` drives it to completion."""

    def __init__(self, config: EngineConfig, f):
        self.config = config
        self.f = f
        self.rng = np.random.default_rng(config.seed)
        self.dataset: Dataset | None = None
        self.lam = float("nan")
        self.trace = RunTrace(config.dim)
        self._heap: list = []
        self._live: set = set()
        self._dead: set = set()
        self._seq = 0
        self._last: SimplexCandidate | None = None
        self._last_index = 0
        self._compact_at = 1024

    @property
    def pool_size(self) -> int:
        return len(self._heap)

    def initialize(self):
        cfg = self.config
        self.dataset = initialize(cfg, self.f, self.rng)
        self.lam = resolve_lambda(self.dataset, cfg.box) if cfg.lam == "auto" else float(cfg.lam)
        self.trace.lam = self.lam
        self.trace.n_init = len(self.dataset)
        # the initial triangulation: every simplex is in the star of its vertices
        self._walk_batch(0, [], range(len(self.dataset)))
        return self.dataset

    # pool ---------------------------------------------------------------

    def _score(self, cands):
        if not cands:
            return
        ds = self.dataset
        verts = np.array([c.vertices for c in cands])
        simp = ds.points[verts]
        base = simplex_volumes(simp, errors="nan")
        lifted = lifted_volumes(simp, ds.values[verts], self.lam, errors="nan")
        score = clipped_score(base, lifted, self.config.alpha0)
        for c, b, s in zip(cands, base, score):
            if not (np.isfinite(s) and b > 0):
                self._dead.add(c.key)
                continue
            c.base_volume = float(b)
            c.score = float(s)
            heapq.heappush(self._heap, (-c.score, self._seq, c))
            self._seq += 1
            self._live.add(c.key)

    def _valid(self, c: SimplexCandidate) -> bool:
        if len(self.dataset) <= len(c.vertices):
            return True
        _, d = self.dataset.index.nearest(c.circumcenter, c.vertices)
        return d >= c.circumradius * (1.0 - EMPTY_SPHERE_RTOL)

    def _pop_valid(self):
        while self._heap:
            _, _, c = heapq.heappop(self._heap)
            self._live.discard(c.key)
            if self._valid(c):
                return c
            self._dead.add(c.key)
        return None

    def _peek(self, k: int) -> list:
        out = []
        for _ in range(k):
            c = self._pop_valid()
            if c is None:
                break
            out.append(c)
        for c in out:
            heapq.heappush(self._heap, (-c.score, self._seq, c))
            self._seq += 1
            self._live.add(c.key)
        return out

    def _compact(self):
        cands = [e[2] for e in self._heap]
        ok = validate_many(
            np.array([c.circumcenter for c in cands]),
            np.array([c.circumradius for c in cands]),
            np.array([c.vertices for c in cands]),
            self.dataset,
        )
        keep = []
        for e, good in zip(self._heap, ok):
            if good:
                keep.append(e)
            else:
                self._live.discard(e[2].key)
                self._dead.add(e[2].key)
        heapq.heapify(keep)
        self._heap = keep
        self._compact_at = max(1024, 4 * len(keep))

    # walks --------------------------------------------------------------

    def _walk_batch(self, step: int, targets: list, pinned=()):
        """Run this step's walks and score what they find.

        Each ``pinned`` datapoint gets a walk around its own cell: every
        simplex created by inserting a point has it as a vertex.  The move
        budget is shared by walks started near the targets and one walk from
        a random datapoint.
        """
        cfg = self.config
        ds = self.dataset
        n = len(ds)
        budget = cfg.walk_steps
        batches = []
        for p in pinned:
            batches.append(cell_walk(p, cfg.cell_steps, self.rng, ds, retries=cfg.retries, birth_step=step))
        seeds = [visibility_walk(self._last_index, t, ds) for t in targets[: cfg.top_k]]
        seeds.append(int(self.rng.integers(n)))
        per_walk = max(1, budget // len(seeds))
        for s in seeds:
            batches.append(skeleton_walk(s, per_walk, self.rng, ds, retries=cfg.retries, birth_step=step))
        fresh = {}
        for batch in batches:
            for c in batch:
                if c.key in self._live or c.key in self._dead or c.key in fresh:
                    continue
                fresh[c.key] = c
        self._score(list(fresh.values()))
        return len(fresh)

    # query --------------------------------------------------------------

    def _query_point(self, c: SimplexCandidate):
        box = self.config.box
        verts = self.dataset.points[list(c.vertices)]
        bary = verts.mean(axis=0)
        q = c.circumcenter
        clamped = False
        if not box.contains(q):
            q = clamp_to_boundary(bary, q, box)
            clamped = True
        inside = _domain(self.f)
        if inside is not None and not inside(q):
            if not inside(bary):
                return None, clamped
            # pull back along the same segment onto the domain boundary
            lo, hi = bary, q
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if inside(mid):
                    lo = mid
                else:
                    hi = mid
            q, clamped = lo, True
        return np.array(q, dtype=float), clamped

    def step(self):
        """One query; returns ``(point, value, s_t)``."""
        if self.dataset is None:
            self.initialize()
        t0 = time.perf_counter()
        cfg = self.config
        step = len(self.trace) + 1
        targets = []
        if self._last is not None:
            targets.append(self.dataset.points[list(self._last.vertices)].mean(axis=0))
        targets.extend(self.dataset.points[list(c.vertices)].mean(axis=0)
                       for c in self._peek(max(0, cfg.top_k - len(targets))))
        self._walk_batch(step, targets, [self._last_index] if self._last is not None else [])
        if len(self._heap) > self._compact_at:
            self._compact()

        attempts = 0
        while True:
            c = self._pop_valid()
            if c is None:
                attempts += 1
                if attempts > cfg.retries:
                    raise StalledEngineError(
                        "candidate pool exhausted and walks find nothing new",
                        {"step": step, "dataset_size": len(self.dataset), "dead": len(self._dead)},
                    )
                self._walk_batch(step, [])
                continue
            self._dead.add(c.key)
            q, clamped = self._query_point(c)
            if q is None:
                continue
            j, d = self.dataset.nearest(q)
            if d <= DUPLICATE_TOL:
                continue
            break

        if cfg.check_invariants and not clamped and d < (1 - QUERY_EMPTY_RTOL) * c.circumradius:
            self.trace.violations += 1
        value = _evaluate(self.f, q)
        self._last_index = self.dataset.add(q, value)
        self._last = c
        ms = 1e3 * (time.perf_counter() - t0)
        self.trace.record(q, value, c.score, clamped, len(self._heap), ms, c.circumradius)
        return q, value, c.score

    def run(self, callback=None) -> RunTrace:
        """Step until ``s_t < epsilon`` or the budget is spent.

        ``callback(engine)`` is called after every step.
        """
        try:
            if self.dataset is None:
                self.initialize()
            while len(self.trace) < self.config.budget:
                _, _, s = self.step()
                if callback is not None:
                    callback(self)
                if s < self.config.epsilon:
                    break
        except (EvaluationError, StalledEngineError) as exc:
            raise RunError(str(exc), trace=self.trace, cause=exc) from exc
        return self.trace


def run(config: EngineConfig, f) -> RunTrace:
    return ANNR(config, f).run()
