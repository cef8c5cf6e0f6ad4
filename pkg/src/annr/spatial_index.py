"""Exact Euclidean nearest-neighbor lookup with cheap insertion.

A static :class:`scipy.spatial.cKDTree` covers most points; recent insertions
sit in a small buffer that is scanned linearly and folded into the tree once
it outgrows a quarter of the tree or a fixed cap.  Ties in distance always resolve to the
lowest dataset index.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import DuplicatePointError, InvalidInputError

DUPLICATE_TOL = 1e-12
REBUILD_FRACTION = 0.25
# the buffer is scanned on every query, so it is also capped in absolute size
MAX_BUFFER = 32


class SpatialIndex:
    def __init__(self, points, *, check_duplicates: bool = True):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError("need a nonempty (n, m) array of points")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points must be finite")
        self.dim = pts.shape[1]
        self._data = np.empty((max(16, 2 * len(pts)), self.dim))
        self._data[: len(pts)] = pts
        self._n = len(pts)
        self.lo = pts.min(axis=0)
        self.hi = pts.max(axis=0)
        self._build()
        if check_duplicates and self._n > 1:
            d, _ = self._tree.query(pts, k=2)
            if np.any(d[:, 1] <= DUPLICATE_TOL):
                i = int(np.argmax(d[:, 1] <= DUPLICATE_TOL))
                raise DuplicatePointError(f"duplicate point {pts[i]} in input")

    @property
    def points(self) -> np.ndarray:
        return self._data[: self._n]

    def __len__(self) -> int:
        return self._n

    @property
    def extent(self) -> float:
        """Diagonal of the bounding box of the stored points."""
        return float(np.linalg.norm(self.hi - self.lo))

    def flush(self):
        """Fold buffered insertions into the tree."""
        if self._n > self._n_tree:
            self._build()

    @property
    def tree(self) -> cKDTree:
        self.flush()
        return self._tree

    def _build(self):
        # unbalanced trees build about twice as fast and query just as well here
        self._tree = cKDTree(self._data[: self._n], balanced_tree=False, compact_nodes=False)
        self._n_tree = self._n

    def insert(self, point) -> int:
        """Add a point and return its dataset index."""
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.size != self.dim:
            raise InvalidInputError(f"expected a point in R^{self.dim}, got {p.size} coordinates")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("point must be finite")
        _, dist = self.nearest(p)
        if dist <= DUPLICATE_TOL:
            raise DuplicatePointError(f"point {p} duplicates an existing point")
        if self._n == len(self._data):
            grown = np.empty((2 * len(self._data), self.dim))
            grown[: self._n] = self._data[: self._n]
            self._data = grown
        self._data[self._n] = p
        self._n += 1
        np.minimum(self.lo, p, out=self.lo)
        np.maximum(self.hi, p, out=self.hi)
        if self._n - self._n_tree > min(REBUILD_FRACTION * self._n_tree, MAX_BUFFER):
            self._build()
        return self._n - 1

    def nearest(self, query, exclude=None) -> tuple[int, float]:
        """Closest non-excluded point as ``(index, distance)``."""
        q = np.asarray(query, dtype=float).reshape(-1)
        excl = exclude if exclude else ()
        n_tree = self._n_tree
        k = min(n_tree, len(excl) + 2)
        while True:
            dt, it = self._tree.query(q, k=k)
            if k == 1:
                dl, il = [float(dt)], [int(it)]
            else:
                dl, il = dt.tolist(), it.tolist()
            keep = [(d, i) for d, i in zip(dl, il) if i not in excl]
            # the k-th tree distance bounds every point not returned, so a tie
            # or a closer point can only be missing if it is this close
            if keep and (k == n_tree or dl[-1] > keep[0][0] * (1 + 1e-12)):
                break
            if k == n_tree:
                break
            k = min(n_tree, 2 * k)
        if self._n > n_tree:
            bd = np.sqrt(((self._data[n_tree : self._n] - q) ** 2).sum(axis=1))
            for i in excl:
                if i >= n_tree:
                    bd[i - n_tree] = np.inf
            b = float(bd.min())
            if b < np.inf and (not keep or b <= keep[0][0] * (1 + 1e-12)):
                near = np.nonzero(bd <= b * (1 + 1e-12))[0]
                keep.extend((float(bd[o]), n_tree + int(o)) for o in near)
        if not keep:
            raise InvalidInputError("every point is excluded")
        dmin = min(keep)[0]
        close = [i for d, i in keep if d <= dmin * (1 + 1e-12)]
        if len(close) == 1:
            return close[0], dmin
        # near-ties: settle with one consistent distance formula
        close = np.array(sorted(close))
        d = np.sqrt(((self._data[close] - q) ** 2).sum(axis=1))
        j = int(np.argmin(d))
        return int(close[j]), float(d[j])

    def knn(self, query, k: int) -> tuple[np.ndarray, np.ndarray]:
        """The ``k`` closest points (tree and buffer), sorted by distance."""
        q = np.asarray(query, dtype=float).reshape(-1)
        kt = min(k, self._n_tree)
        dt, it = self._tree.query(q, k=kt)
        dt = np.atleast_1d(dt)
        it = np.atleast_1d(it)
        if self._n > self._n_tree:
            bd = np.sqrt(((self._data[self._n_tree : self._n] - q) ** 2).sum(axis=1))
            near = np.nonzero(bd <= dt[-1])[0] if kt == k else np.arange(len(bd))
            if len(near):
                dt = np.concatenate([dt, bd[near]])
                it = np.concatenate([it, near + self._n_tree])
                order = np.argsort(dt, kind="stable")[:k]
                dt, it = dt[order], it[order]
        return it, dt

    def nearest_many(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized :meth:`nearest` without exclusions."""
        Q = np.atleast_2d(np.asarray(queries, dtype=float))
        if self._n > self._n_tree:
            self._build()
        pts = self.points
        k = min(2, self._n_tree)
        dt, it = self._tree.query(Q, k=k)
        it = it.reshape(len(Q), -1)
        best = it[:, 0].copy()
        bd = np.sqrt(((pts[best] - Q) ** 2).sum(axis=1))
        if k == 2:
            alt = it[:, 1]
            ad = np.sqrt(((pts[alt] - Q) ** 2).sum(axis=1))
            swap = (ad < bd) | ((ad == bd) & (alt < best))
            best[swap] = alt[swap]
            bd[swap] = ad[swap]
        # rows whose two tree hits tie exactly may hide a third tied point
        if k == 2:
            dt = dt.reshape(len(Q), -1)
            suspect = np.nonzero(dt[:, 1] <= dt[:, 0] * (1 + 1e-12))[0]
            for r in suspect:
                best[r], bd[r] = self.nearest(Q[r])
        return best, bd

    def within(self, query, radius: float) -> np.ndarray:
        """Indices of all points at distance <= radius (unsorted)."""
        q = np.asarray(query, dtype=float).reshape(-1)
        idx = list(self._tree.query_ball_point(q, radius)) if self._n_tree else []
        if self._n > self._n_tree:
            buf = self._data[self._n_tree : self._n]
            d = np.sqrt(((buf - q) ** 2).sum(axis=1))
            idx.extend((np.nonzero(d <= radius)[0] + self._n_tree).tolist())
        return np.array(idx, dtype=int)


class Dataset:
    """Queried points, their function values and the lookup index over them."""

    def __init__(self, points, values):
        pts = np.asarray(points, dtype=float)
        vals = np.asarray(values, dtype=float).reshape(-1)
        if len(pts) != len(vals):
            raise InvalidInputError(f"{len(pts)} points but {len(vals)} values")
        self.index = SpatialIndex(pts)
        self._values = np.empty(len(self.index._data))
        self._values[: len(vals)] = vals

    @property
    def dim(self) -> int:
        return self.index.dim

    @property
    def points(self) -> np.ndarray:
        return self.index.points

    @property
    def values(self) -> np.ndarray:
        return self._values[: len(self.index)]

    def __len__(self) -> int:
        return len(self.index)

    def add(self, point, value: float) -> int:
        i = self.index.insert(point)
        if i >= len(self._values):
            grown = np.empty(2 * len(self._values))
            grown[:i] = self._values[:i]
            self._values = grown
        self._values[i] = value
        return i

    def nearest(self, query, exclude=None) -> tuple[int, float]:
        return self.index.nearest(query, exclude)

    def predict(self, x) -> float | np.ndarray:
        """Nearest-neighbor regression; a single point gives a float."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.values[self.nearest(x)[0]])
        idx, _ = self.index.nearest_many(x)
        return self.values[idx]


def build(points) -> SpatialIndex:
    return SpatialIndex(points)


def linear_scan_nearest(points, query, exclude=()) -> tuple[int, float]:
    """Reference nearest neighbor by exhaustive scan (lowest index on ties)."""
    pts = np.asarray(points, dtype=float)
    d = np.sqrt(((pts - np.asarray(query, dtype=float)) ** 2).sum(axis=1))
    if exclude:
        d = d.copy()
        d[list(exclude)] = np.inf
    j = int(np.argmin(d))
    return j, float(d[j])
