"""Brute-force references used to validate the stochastic walk.

These enumerate every candidate simplex, so they are only meant for small
point sets (m <= 3, a few dozen points).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .exceptions import InvalidInputError

EMPTY_RTOL = 1e-9


def exact_delaunay(points, rtol: float = EMPTY_RTOL) -> set[tuple]:
    """All full-dimensional Delaunay simplices, as sorted index tuples.

    A vertex set qualifies when its circumsphere is well defined and no other
    point lies strictly inside it.
    """
    pts = np.asarray(points, dtype=float)
    n, m = pts.shape
    if m > 3 or n > 60:
        raise InvalidInputError("brute-force Delaunay is limited to m <= 3 and n <= 60")
    combos = np.array(list(itertools.combinations(range(n), m + 1)))
    if len(combos) == 0:
        return set()
    v = pts[combos]
    edges = v[:, 1:] - v[:, :1]
    rhs = 0.5 * np.einsum("nij,nij->ni", edges, edges)
    det = np.linalg.det(edges)
    scale = np.einsum("nij,nij->n", edges, edges) ** (m / 2)
    ok = np.abs(det) > 1e-12 * scale
    result = set()
    if not ok.any():
        return result
    combos, v, edges, rhs = combos[ok], v[ok], edges[ok], rhs[ok]
    centers = v[:, 0] + np.linalg.solve(edges, rhs[..., None])[..., 0]
    radii = np.linalg.norm(v[:, 0] - centers, axis=1)
    dist = np.linalg.norm(pts[None, :, :] - centers[:, None, :], axis=2)
    mine = np.zeros_like(dist, dtype=bool)
    np.put_along_axis(mine, combos, True, axis=1)
    inside = (dist < radii[:, None] * (1 - rtol)) & ~mine
    for c in combos[~inside.any(axis=1)]:
        result.add(tuple(int(i) for i in c))
    return result


def empty_circumsphere(points, vertices, rtol: float = EMPTY_RTOL) -> bool:
    """Scan-based empty-sphere predicate for one simplex."""
    pts = np.asarray(points, dtype=float)
    v = pts[list(vertices)]
    edges = v[1:] - v[0]
    c = v[0] + np.linalg.solve(edges, 0.5 * (edges**2).sum(axis=1))
    r = np.linalg.norm(v[0] - c)
    others = np.delete(pts, list(vertices), axis=0)
    if len(others) == 0:
        return True
    return bool(np.linalg.norm(others - c, axis=1).min() >= r * (1 - rtol))


def ray_hit_bruteforce(points, position, direction, generator, exclude=()):
    """Reference bisector crossing: loop over every candidate generator."""
    pts = np.asarray(points, dtype=float)
    x = np.asarray(position, dtype=float)
    theta = np.asarray(direction, dtype=float)
    p0 = pts[generator]
    r0 = float(np.dot(p0 - x, p0 - x))
    skip = set(exclude) | {generator}
    best = None
    for q_idx, q in enumerate(pts):
        if q_idx in skip:
            continue
        den = 2.0 * float(np.dot(theta, q - p0))
        if den <= 0:
            continue
        t = (float(np.dot(q - x, q - x)) - r0) / den
        if t < 0:
            continue
        if best is None or t < best[0]:
            best = (t, q_idx)
    return best


def gram_volume(vertices) -> float:
    """Simplex volume as sqrt(det(E^T E)) / k!, evaluated through a QR of E."""
    v = np.asarray(vertices, dtype=float)
    k = len(v) - 1
    edges = (v[1:] - v[0]).T
    r = np.linalg.qr(edges, mode="r")
    return float(np.prod(np.abs(np.diag(r)))) / math.factorial(k)


def walk_recall(points, steps: int, seed: int) -> dict:
    """Soundness and recall of one skeleton walk against :func:`exact_delaunay`."""
    from .spatial_index import SpatialIndex
    from .walk import skeleton_walk, validate_candidate

    pts = np.asarray(points, dtype=float)
    truth = exact_delaunay(pts)
    index = SpatialIndex(pts)
    rng = np.random.default_rng(seed)
    found = skeleton_walk(int(rng.integers(len(pts))), steps, rng, index)
    validated = {c.key for c in found if validate_candidate(c, index)}
    sound = len(validated & truth) / len(validated) if validated else 1.0
    recall = len(validated & truth) / len(truth) if truth else 1.0
    return {"found": len(found), "validated": len(validated), "truth": len(truth),
            "soundness": sound, "recall": recall}


def oracle_check(dim: int, n: int, seeds: int, steps: int = 2000, base_seed: int = 0) -> dict:
    """Mean soundness/recall over ``seeds`` uniform point sets in the unit cube."""
    rows = []
    for s in range(seeds):
        rng = np.random.default_rng(base_seed + s)
        pts = rng.random((n, dim))
        rows.append(walk_recall(pts, steps, base_seed + 1000 + s))
    return {
        "dim": dim,
        "n": n,
        "seeds": seeds,
        "steps": steps,
        "soundness": min(r["soundness"] for r in rows),
        "recall": float(np.mean([r["recall"] for r in rows])),
        "runs": rows,
    }
