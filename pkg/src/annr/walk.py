"""Stochastic discovery of Delaunay simplices by walking on Voronoi boundaries.

A walk starts at a datapoint, casts rays inside its Voronoi cell and keeps
track of every generator whose bisector it runs into.  After ``m`` rays it
sits on a Voronoi vertex, i.e. the circumcenter of a Delaunay simplex whose
vertices are the accumulated generators.  From there it moves along Voronoi
edges (the 1-skeleton), emitting one simplex per vertex visited.

The full triangulation is never built; ray intersections only need nearest
neighbor queries, so each step costs a handful of index lookups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSimplexError, InvalidInputError
from .geometry import EQUIDISTANCE_RTOL, circumcenter, simplex_volume
from .spatial_index import Dataset, SpatialIndex

__all__ = [
    "SimplexCandidate",
    "WalkState",
    "ray_boundary_hit",
    "descend_to_vertex",
    "skeleton_walk",
    "cell_walk",
    "visibility_walk",
    "validate_candidate",
    "validate_many",
]

DIRECTION_TOL = 1e-9
EMPTY_SPHERE_RTOL = 1e-9
# a ray still inside the cell this far out (in units of the data extent)
# is settled by an exact scan instead of further doubling
ESCAPE_FACTOR = 1e3
MAX_REFINE = 200
# neighbors of the ray origin (per dimension) used to propose the crossing
PROPOSAL_NEIGHBORS = 4


@dataclass
class SimplexCandidate:
    vertices: tuple
    circumcenter: np.ndarray
    circumradius: float
    base_volume: float = float("nan")
    score: float = float("nan")
    birth_step: int = 0

    @property
    def key(self) -> tuple:
        return self.vertices


@dataclass
class WalkState:
    position: np.ndarray
    generators: list

    def tangent_basis(self, points) -> np.ndarray:
        """Orthonormal columns spanning the face the walk is confined to."""
        return _tangent_basis(np.asarray(points, dtype=float)[self.generators])


def _index(dataset) -> SpatialIndex:
    if isinstance(dataset, Dataset):
        return dataset.index
    if isinstance(dataset, SpatialIndex):
        return dataset
    raise InvalidInputError(f"expected a Dataset or SpatialIndex, got {type(dataset).__name__}")


def _tangent_basis(gen_points: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the directions keeping equal distance to all generators."""
    m = gen_points.shape[1]
    k = len(gen_points) - 1
    if k == 0:
        return np.eye(m)
    a = (gen_points[1:] - gen_points[0]).T
    q, _ = np.linalg.qr(a, mode="complete")
    return q[:, k:]


def _project(v: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Component of ``v`` orthogonal to the rows of ``a``."""
    if len(a) == 0:
        return v
    return v - a.T @ np.linalg.solve(a @ a.T, a @ v)


def _snap(x: np.ndarray, gen_points: np.ndarray) -> np.ndarray:
    """Closest point to ``x`` that is exactly equidistant from all generators."""
    if len(gen_points) < 2:
        return x
    g0 = gen_points[0]
    a = gen_points[1:] - g0
    b = 0.5 * np.einsum("ij,ij->i", a, a)
    z = x - g0
    return g0 + z - a.T @ np.linalg.solve(a @ a.T, a @ z - b)


def _scan_hit(x, theta, p0, r0, pts, excl, tol_t):
    """Exact smallest nonnegative bisector crossing by a full vectorized scan."""
    diff = pts - x
    num = np.einsum("ij,ij->i", diff, diff) - r0
    den = 2.0 * ((pts - p0) @ theta)
    ok = den > 0
    ok[list(excl)] = False
    if not ok.any():
        return None
    t = np.full(len(pts), np.inf)
    t[ok] = num[ok] / den[ok]
    t[t < -tol_t] = np.inf
    tmin = t.min()
    if not np.isfinite(tmin):
        return None
    j = int(np.nonzero(t <= tmin + tol_t)[0].min())
    return max(float(t[j]), 0.0), j


def _proposal(x, theta, p0, r0, pts, cand, excl, tol_t):
    """Smallest crossing among the candidate generators ``cand``, or None."""
    cand = cand[[i not in excl for i in cand.tolist()]]
    if len(cand) == 0:
        return None
    q = pts[cand]
    den = 2.0 * ((q - p0) @ theta)
    diff = q - x
    num = np.einsum("ij,ij->i", diff, diff) - r0
    ok = den > 0
    if not ok.any():
        return None
    t = np.where(ok, num / np.where(ok, den, 1.0), np.inf)
    t[t < -tol_t] = np.inf
    tmin = t.min()
    if not np.isfinite(tmin):
        return None
    j = int(cand[t <= tmin + tol_t].min())
    return max(float(tmin), 0.0), j


def ray_boundary_hit(position, direction, generator, dataset, exclude=()):
    """First bisector crossed by the ray ``position + t * direction``, t >= 0.

    ``position`` must lie in the closed Voronoi cell of ``generator``.  The
    crossing with the bisector of ``q`` sits at
    ``t_q = (|q - x|^2 - |p0 - x|^2) / (2 direction . (q - p0))``; the result is
    ``(t, q)`` for the smallest admissible ``t_q`` (ties to the lowest index),
    or ``None`` when the ray never leaves the cell.

    A crossing proposed from the neighbors of the start is certified with one
    nearest-neighbor probe: if nothing is strictly closer than ``p0`` at the
    proposed point, it is still in the cell, so no earlier crossing exists.
    Otherwise the closer point's crossing lies before the proposal and the
    search iterates ``t <- t_q`` from there.
    """
    index = _index(dataset)
    theta = np.asarray(direction, dtype=float)
    if abs(float(np.sqrt(theta @ theta)) - 1.0) > DIRECTION_TOL:
        raise InvalidInputError("ray direction must be a unit vector")
    x = np.asarray(position, dtype=float)
    pts = index.points
    p0 = pts[generator]
    excl = set(int(e) for e in exclude)
    excl.add(int(generator))
    n = len(index)
    if len(excl) >= n:
        return None
    r0 = float((p0 - x) @ (p0 - x))
    extent = index.extent + float(np.linalg.norm(x - 0.5 * (index.lo + index.hi)))
    tol_t = 1e-10 * extent
    tol_d2 = 1e-12 * extent**2

    def closer(y):
        j, dj = index.nearest(y, excl)
        return j, dj * dj < float((p0 - y) @ (p0 - y)) - tol_d2

    k = min(n, len(excl) + PROPOSAL_NEIGHBORS * index.dim)
    cand, _ = index.knn(x, k)
    prop = _proposal(x, theta, p0, r0, pts, cand, excl, tol_t)
    if prop is not None:
        t, j = prop
    else:
        # nothing nearby bounds the ray: push out until some point is closer
        t = max(np.sqrt(r0), 1e-6 * extent)
        limit = ESCAPE_FACTOR * extent
        while True:
            j, inside = closer(x + t * theta)
            if inside:
                break
            if t > limit:
                return _scan_hit(x, theta, p0, r0, pts, excl, tol_t)
            t *= 4.0
        q = pts[j]
        den = 2.0 * float(theta @ (q - p0))
        if den <= 0:
            return _scan_hit(x, theta, p0, r0, pts, excl, tol_t)
        t = max((float((q - x) @ (q - x)) - r0) / den, 0.0)

    for _ in range(MAX_REFINE):
        y = x + t * theta
        j2, d2 = index.nearest(y, excl)
        if d2 * d2 >= float((p0 - y) @ (p0 - y)) - tol_d2:
            if j2 != j:
                q2 = pts[j2]
                den2 = 2.0 * float(theta @ (q2 - p0))
                if den2 > 0:
                    t2 = (float((q2 - x) @ (q2 - x)) - r0) / den2
                    if abs(t2 - t) <= tol_t:
                        j = min(j, j2)
            return t, int(j)
        q = pts[j2]
        den = 2.0 * float(theta @ (q - p0))
        if den <= 0:
            break
        t = max((float((q - x) @ (q - x)) - r0) / den, 0.0)
        j = j2
    return _scan_hit(x, theta, p0, r0, pts, excl, tol_t)


def _random_direction(a: np.ndarray, rng) -> np.ndarray:
    """Uniform unit vector orthogonal to the rows of ``a``."""
    while True:
        u = _project(rng.standard_normal(a.shape[1]), a)
        n = float(np.sqrt(u @ u))
        if n > 1e-12:
            return u / n


def _descend(start: int, rng, index: SpatialIndex, retries: int) -> WalkState | None:
    pts = index.points
    m = index.dim
    x = pts[start].copy()
    gens = [int(start)]
    a = np.zeros((0, m))
    for _ in range(m):
        hit = None
        for _ in range(retries):
            u = _random_direction(a, rng)
            hit = ray_boundary_hit(x, u, gens[0], index, gens)
            if hit is None:
                u = -u
                hit = ray_boundary_hit(x, u, gens[0], index, gens)
            if hit is not None:
                break
        if hit is None:
            return None
        t, q = hit
        gens.append(q)
        g = pts[gens]
        try:
            x = _snap(x + t * u, g)
        except np.linalg.LinAlgError:  # affinely dependent generators
            return None
        a = g[1:] - g[0]
    return WalkState(x, gens)


def _make_candidate(state: WalkState, index: SpatialIndex, birth_step: int) -> SimplexCandidate | None:
    verts = tuple(sorted(state.generators))
    if len(set(verts)) != len(verts):
        return None
    try:
        c, r = circumcenter(index.points[list(verts)])
    except DegenerateSimplexError:
        return None
    if np.linalg.norm(c - state.position) > EQUIDISTANCE_RTOL * r:
        return None
    return SimplexCandidate(verts, c, r, birth_step=birth_step)


def descend_to_vertex(start: int, rng, dataset, *, retries: int = 8, birth_step: int = 0):
    """Walk from datapoint ``start`` down to a vertex of its Voronoi cell.

    Returns the dual Delaunay simplex, or ``None`` when every retry escaped
    to infinity or the simplex found is degenerate.
    """
    index = _index(dataset)
    if len(index) < index.dim + 1:
        raise InvalidInputError(f"need at least {index.dim + 1} points, have {len(index)}")
    if not 0 <= start < len(index):
        raise InvalidInputError(f"start index {start} out of range")
    state = _descend(int(start), rng, index, retries)
    if state is None:
        return None
    return _make_candidate(state, index, birth_step)


def _vertex_at(gen_points: np.ndarray, guess: np.ndarray) -> np.ndarray:
    """Circumcenter of ``m + 1`` generators, or ``guess`` if the system is singular."""
    e = gen_points[1:] - gen_points[0]
    try:
        return gen_points[0] + np.linalg.solve(e, 0.5 * np.einsum("ij,ij->i", e, e))
    except np.linalg.LinAlgError:
        return guess


def _skeleton_move(state: WalkState, rng, index: SpatialIndex, keep=None, avoid=None) -> WalkState | None:
    """Leave the current Voronoi vertex along a random incident edge.

    Generator ``keep`` is never dropped; ``avoid`` is only dropped when every
    other edge is unbounded.
    """
    pts = index.points
    gens = state.generators
    g_all = pts[gens]
    order = [j for j in rng.permutation(len(gens)) if gens[j] != keep]
    order.sort(key=lambda j: gens[j] == avoid)
    for j in order:
        rest = gens[:j] + gens[j + 1 :]
        g = np.delete(g_all, j, axis=0)
        # edge direction: orthogonal to the remaining bisectors, pointing away
        # from the dropped generator
        a = np.vstack([g[1:] - g[0], g_all[j] - g[0]])
        rhs = np.zeros(len(a))
        rhs[-1] = -1.0
        try:
            d = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError:
            continue
        d /= np.sqrt(d @ d)
        hit = ray_boundary_hit(state.position, d, rest[0], index, gens)
        if hit is None:
            continue
        t, q = hit
        new = rest + [q]
        guess = state.position + t * d
        return WalkState(_vertex_at(pts[new], guess), new)
    return None


def skeleton_walk(start, steps: int, rng, dataset, *, retries: int = 8, birth_step: int = 0):
    """Random walk on the Voronoi 1-skeleton; returns the distinct simplices met.

    ``start`` is a datapoint index (the walk first descends to a vertex of its
    cell) or a :class:`SimplexCandidate` to continue from.  ``steps`` counts
    edge moves.  When every edge out of a vertex is unbounded the walk
    restarts from a random datapoint.
    """
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    index = _index(dataset)
    n = len(index)
    found: dict[tuple, SimplexCandidate] = {}

    def emit(state):
        key = tuple(sorted(state.generators))
        if key not in found:
            cand = _make_candidate(state, index, birth_step)
            if cand is not None:
                found[key] = cand

    def restart():
        for _ in range(retries):
            s = _descend(int(rng.integers(n)), rng, index, retries)
            if s is not None:
                return s
        return None

    if isinstance(start, SimplexCandidate):
        state = WalkState(np.array(start.circumcenter, dtype=float), list(start.vertices))
    else:
        state = _descend(int(start), rng, index, retries)
        if state is None:
            state = restart()
    if state is None:
        return []
    emit(state)
    for _ in range(steps):
        nxt = _skeleton_move(state, rng, index)
        if nxt is None:
            nxt = restart()
            if nxt is None:
                break
        state = nxt
        emit(state)
    return list(found.values())


def cell_walk(start: int, steps: int, rng, dataset, *, retries: int = 8, birth_step: int = 0):
    """Walk over the vertices of one Voronoi cell; returns the distinct simplices met.

    Like :func:`skeleton_walk`, but generator ``start`` is never dropped, so
    every simplex found has ``start`` as a vertex, and the walk avoids turning
    back along the edge it arrived on.  In the plane this circles the cell
    and stops once it is back at its first vertex; an unbounded cell is
    traced to one end, then back past the start to the other end.
    """
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    index = _index(dataset)
    state = _descend(int(start), rng, index, retries)
    if state is None:
        return []
    found: dict[tuple, SimplexCandidate] = {}
    first = tuple(sorted(state.generators))
    last = None
    turned = False
    for _ in range(steps + 1):
        key = tuple(sorted(state.generators))
        if key not in found:
            cand = _make_candidate(state, index, birth_step)
            if cand is not None:
                found[key] = cand
        elif key == first and last is not None and not turned:
            break
        nxt = _skeleton_move(state, rng, index, keep=int(start), avoid=last)
        if nxt is None:
            break
        if last is not None and last not in nxt.generators:
            # hit an unbounded edge and turned back
            if turned:
                break
            turned = True
        last = nxt.generators[-1]
        state = nxt
    return list(found.values())


def visibility_walk(start: int, target, dataset) -> int:
    """Hop from ``start`` toward ``target``; ends at its nearest datapoint.

    Without the Delaunay adjacency, the hop that improves most is the exact
    nearest-neighbor query at ``target`` itself, so the walk takes at most
    one hop (lowest index on ties).
    """
    index = _index(dataset)
    pts = index.points
    target = np.asarray(target, dtype=float)
    cur = int(start)
    cur_d = float(np.sqrt(((pts[cur] - target) ** 2).sum()))
    j, dj = index.nearest(target)
    if dj < cur_d or (dj == cur_d and j < cur):
        return j
    return cur


def validate_candidate(candidate: SimplexCandidate, dataset) -> bool:
    """Empty-circumsphere test against the current dataset."""
    index = _index(dataset)
    if len(index) <= len(candidate.vertices):
        return True
    _, d = index.nearest(candidate.circumcenter, candidate.vertices)
    return d >= candidate.circumradius * (1.0 - EMPTY_SPHERE_RTOL)


def validate_many(centers, radii, vertices, dataset) -> np.ndarray:
    """Vectorized :func:`validate_candidate` for stacked candidates."""
    index = _index(dataset)
    centers = np.asarray(centers, dtype=float)
    vertices = np.asarray(vertices, dtype=int)
    if len(centers) == 0:
        return np.zeros(0, dtype=bool)
    k = vertices.shape[1] + 1
    if len(index) < k:
        return np.ones(len(centers), dtype=bool)
    dist, idx = index.tree.query(centers, k=k)
    is_vertex = (idx[:, :, None] == vertices[:, None, :]).any(axis=-1)
    dist = np.where(is_vertex, np.inf, dist)
    return dist.min(axis=1) >= np.asarray(radii) * (1.0 - EMPTY_SPHERE_RTOL)


def candidate_volume(candidate: SimplexCandidate, dataset) -> float:
    return simplex_volume(_index(dataset).points[list(candidate.vertices)])
