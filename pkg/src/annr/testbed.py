"""Ground-truth targets, test sets and error metrics.

Targets are vectorized: ``TargetFunction.batch`` maps an ``(n, m)`` array to
``n`` values and ``__call__`` evaluates a single point.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ConfigurationError, InvalidInputError
from .geometry import BoundingBox

__all__ = [
    "TargetFunction",
    "TestSet",
    "builtin",
    "BUILTINS",
    "make_test_set",
    "mae",
    "norm_histogram",
    "rotation",
]


@dataclass
class TargetFunction:
    name: str
    dim: int
    box: BoundingBox
    fn: Callable[[np.ndarray], np.ndarray]
    region: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return float(self.fn(x)[0])

    def batch(self, xs) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(np.asarray(xs, dtype=float))), dtype=float)

    @property
    def domain(self):
        """Membership test for restricted domains (``None`` means the whole box)."""
        if self.region is None:
            return None
        return self._inside

    def _inside(self, x) -> bool | np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool(self.region(x[None])[0])
        return self.region(x)


def rotation(angle_deg: float) -> np.ndarray:
    a = math.radians(angle_deg)
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def _gaussian(sigma2: float = 0.1, half_width: float = 1.0):
    norm = 1.0 / (2 * math.pi * sigma2)

    def fn(x):
        return norm * np.exp(-(x**2).sum(axis=1) / (2 * sigma2))

    return 2, BoundingBox.cube(-half_width, half_width, 2), fn


def _spiral(a: float = 0.08, w: float = 0.06, theta_max: float = 6 * math.pi, half_width: float = 1.0):
    if a <= 0 or w <= 0 or theta_max <= 0:
        raise ConfigurationError("spiral parameters must be positive")
    turns = int(math.ceil(theta_max / (2 * math.pi))) + 1

    def fn(x):
        r = np.hypot(x[:, 0], x[:, 1])
        phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * math.pi)
        hit = np.zeros(len(x), dtype=bool)
        for k in range(turns):
            theta = phi + 2 * math.pi * k
            hit |= (theta <= theta_max) & (np.abs(r - a * theta) < w)
        return hit.astype(float)

    return 2, BoundingBox.cube(-half_width, half_width, 2), fn


def _ellipse(angle: float = 0.0, half_width: float = 1.0):
    # f(y) = f0(R^-1 y); row vectors, so R^-1 y is y @ R
    rot = rotation(angle)

    def fn(x):
        u = x @ rot
        return (u[:, 0] ** 2 + 4 * u[:, 1] ** 2 <= 1).astype(float)

    return 2, BoundingBox.cube(-half_width, half_width, 2), fn


def _ball(dim: int = 6, radius: float = 1.0, half_width: float = 2.0):
    dim = int(dim)
    if dim < 1:
        raise ConfigurationError("ball dimension must be >= 1")

    def fn(x):
        return ((x**2).sum(axis=1) <= radius**2).astype(float)

    return dim, BoundingBox.cube(-half_width, half_width, dim), fn


LENS_CENTERS = np.array([[-3.0, -3.0], [4.0, 4.0]])
LENS_RADIUS = 5.0


def _lens():
    def fn(x):
        return np.sqrt((x**2).sum(axis=1))

    def region(x):
        d = np.sqrt(((x[:, None, :] - LENS_CENTERS[None]) ** 2).sum(axis=2))
        return (d <= LENS_RADIUS).all(axis=1)

    # the two circles meet at (0, 1) and (1, 0); the lens fills exactly this box
    return 2, BoundingBox.cube(0.0, 1.0, 2), fn, region


def _sqnorm(dim: int = 2, half_width: float = 1.0):
    def fn(x):
        return (x**2).sum(axis=1)

    return int(dim), BoundingBox.cube(-half_width, half_width, int(dim)), fn


BUILTINS = {
    "gaussian": _gaussian,
    "spiral": _spiral,
    "ellipse": _ellipse,
    "ball": _ball,
    "lens": _lens,
    "sqnorm": _sqnorm,
}


def builtin(name: str, **params) -> TargetFunction:
    """Instantiate a named target; unknown names or parameters raise ConfigurationError."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigurationError(f"unknown target {name!r}; choose from {sorted(BUILTINS)}") from None
    try:
        made = factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {name}: {exc}") from None
    region = made[3] if len(made) > 3 else None
    dim, box, fn = made[:3]
    return TargetFunction(name, dim, box, fn, region, dict(params))


@dataclass
class TestSet:
    points: np.ndarray
    values: np.ndarray
    mode: str
    seed: int | None = None

    __test__ = False  # not a pytest class

    def __len__(self) -> int:
        return len(self.points)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def write_csv(self, fh):
        m = self.points.shape[1]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(m)] + ["f"])
        for p, v in zip(self.points, self.values):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])

    @classmethod
    def read_csv(cls, fh, mode: str = "file") -> "TestSet":
        rows = list(csv.reader(fh))
        if not rows or rows[0][-1] != "f":
            raise InvalidInputError("test-set CSV needs a header x0,...,f")
        data = np.array([[float(c) for c in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
        return cls(data[:, :-1], data[:, -1], mode)


def make_test_set(function: TargetFunction, size: int, mode: str = "uniform", seed: int = 0) -> TestSet:
    """Grid (2-D only, endpoint-inclusive ``ceil(sqrt(size))**2`` lattice) or uniform points.

    With a restricted domain, grid points outside it are dropped and uniform
    points are drawn by rejection.
    """
    if size < 1:
        raise ConfigurationError("test-set size must be >= 1")
    box = function.box
    inside = function.domain
    if mode == "grid":
        if function.dim != 2:
            raise ConfigurationError("grid test sets are only defined for m = 2")
        g = math.ceil(math.sqrt(size))
        axes = [np.linspace(box.lo[i], box.hi[i], g) for i in range(2)]
        xx, yy = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        if inside is not None:
            pts = pts[inside(pts)]
    elif mode == "uniform":
        rng = np.random.default_rng(seed)
        if inside is None:
            pts = box.sample(rng, size)
        else:
            chunks, have = [], 0
            while have < size:
                cand = box.sample(rng, max(64, 2 * (size - have)))
                cand = cand[inside(cand)]
                chunks.append(cand)
                have += len(cand)
            pts = np.concatenate(chunks)[:size]
    else:
        raise ConfigurationError(f"unknown test-set mode {mode!r}")
    return TestSet(pts, function.batch(pts), mode, seed if mode == "uniform" else None)


def mae(predict, test_set: TestSet) -> float:
    """Mean absolute error of ``predict`` (vectorized over rows) on the test set."""
    if len(test_set) == 0:
        raise InvalidInputError("empty test set")
    pred = np.asarray(predict(test_set.points), dtype=float).reshape(-1)
    return float(np.mean(np.abs(pred - test_set.values)))


def norm_histogram(points, bins: int, upper: float | None = None):
    """Histogram of point norms over ``[0, upper]`` (default: the largest norm).

    Returns ``(counts, frequencies, edges)``.
    """
    if bins < 1:
        raise InvalidInputError("bins must be >= 1")
    norms = np.sqrt((np.atleast_2d(np.asarray(points, dtype=float)) ** 2).sum(axis=1))
    top = float(norms.max()) if upper is None else float(upper)
    if top <= 0:
        top = 1.0
    counts, edges = np.histogram(norms, bins=bins, range=(0.0, top))
    total = counts.sum()
    freqs = counts / total if total else counts.astype(float)
    return counts, freqs, edges
