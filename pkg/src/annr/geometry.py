"""Numeric kernels: simplex volumes, liftings, circumspheres and boundary clamping.

Everything here is a pure function of its arguments.  Points are float64
numpy vectors; a simplex is an array of shape ``(k + 1, d)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSimplexError, InvalidInputError, NumericalError

__all__ = [
    "BoundingBox",
    "simplex_volume",
    "simplex_volumes",
    "lifted_volume",
    "lifted_volumes",
    "circumcenter",
    "clipped_score",
    "clamp_to_boundary",
    "barycenter",
]

# Tolerances on the squared volume, measured after rescaling the squared
# edge lengths so that the longest one equals 1.
NEGATIVE_CLAMP = 1e-10
COND_LIMIT = 1e12
EQUIDISTANCE_RTOL = 1e-6


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box ``prod_i [lo_i, hi_i]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidInputError("lo and hi must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidInputError("box bounds must be finite")
        if np.any(lo >= hi):
            raise InvalidInputError(f"empty box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "BoundingBox":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol: float = 0.0) -> bool | np.ndarray:
        """Closed membership test; vectorized over leading axes."""
        x = np.asarray(x, dtype=float)
        pad = tol * self.widths
        inside = (x >= self.lo - pad) & (x <= self.hi + pad)
        return inside.all(axis=-1)

    def corners(self) -> np.ndarray:
        """All ``2**dim`` vertices, in binary counting order."""
        bits = np.array(list(itertools.product((0, 1), repeat=self.dim)), dtype=float)
        return self.lo + bits * self.widths

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lo + rng.random((n, self.dim)) * self.widths

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)


def _as_simplex(vertices) -> np.ndarray:
    try:
        v = np.array(vertices, dtype=float)
    except ValueError as exc:  # ragged input
        raise InvalidInputError(f"vertices have inconsistent dimensions: {exc}") from None
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2 or v.shape[0] < 1:
        raise InvalidInputError(f"expected an array of shape (k+1, d), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vertex coordinates must be finite")
    return v


def _lu_det(a: np.ndarray) -> np.ndarray:
    """Determinants of a stack of square matrices by LU with partial pivoting.

    Works in whatever dtype ``a`` carries (used with ``np.longdouble``, which
    ``np.linalg.det`` does not accept).
    """
    a = a.copy()
    n = a.shape[-1]
    det = np.ones(a.shape[:-2], dtype=a.dtype)
    rows = np.arange(a.shape[0])
    for j in range(n):
        piv = j + np.argmax(np.abs(a[:, j:, j]), axis=1)
        swap = piv != j
        if np.any(swap):
            r = rows[swap]
            tmp = a[r, j, :].copy()
            a[r, j, :] = a[r, piv[swap], :]
            a[r, piv[swap], :] = tmp
            det[swap] = -det[swap]
        p = a[:, j, j]
        det = det * p
        if j + 1 < n:
            with np.errstate(divide="ignore", invalid="ignore"):
                factors = np.where(p[:, None] != 0, a[:, j + 1 :, j] / p[:, None], 0)
            a[:, j + 1 :, j:] -= factors[:, :, None] * a[:, None, j, j:]
    return det


def _cayley_menger_sq(v: np.ndarray, errors: str) -> np.ndarray:
    """Squared k-volumes of a stack of simplices, shape (n, k+1, d).

    Squared distances and the determinant are formed in extended precision:
    the volume is quadratically sensitive to rounding in the squared
    distances, which float64 cannot absorb for elongated simplices.
    """
    k = v.shape[-2] - 1
    vl = v.astype(np.longdouble)
    diff = vl[:, :, None, :] - vl[:, None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    scale = d2.max(axis=(-1, -2))
    safe = np.where(scale > 0, scale, 1)
    n = k + 2
    cm = np.ones((v.shape[0], n, n), dtype=np.longdouble)
    cm[:, 0, 0] = 0
    cm[:, 1:, 1:] = d2 / safe[:, None, None]
    det = _lu_det(cm)
    coeff = np.longdouble((-1) ** (k + 1)) / (np.longdouble(2) ** k * math.factorial(k) ** 2)
    vol2 = (coeff * det).astype(float)
    bad = vol2 < -NEGATIVE_CLAMP
    if np.any(bad):
        if errors == "raise":
            raise NumericalError(f"Cayley-Menger determinant has wrong sign ({vol2[bad].min():.3e})")
        vol2 = np.where(bad, np.nan, vol2)
    vol2 = np.maximum(vol2, 0.0)
    return np.where(scale > 0, vol2 * safe.astype(float) ** k, 0.0)


def simplex_volume(vertices) -> float:
    """k-dimensional volume of the simplex spanned by ``k + 1`` vertices.

    Uses the Cayley-Menger determinant, so the ambient dimension may exceed
    k.  Affinely dependent vertex sets give 0.
    """
    v = _as_simplex(vertices)
    if v.shape[0] == 1:
        return 0.0
    return float(np.sqrt(_cayley_menger_sq(v[None], "raise")[0]))


def simplex_volumes(simplices, errors: str = "raise") -> np.ndarray:
    """Vectorized :func:`simplex_volume` over an array ``(n, k+1, d)``.

    With ``errors="nan"`` a numerically inconsistent determinant yields NaN
    instead of raising.
    """
    v = np.asarray(simplices, dtype=float)
    if v.ndim != 3:
        raise InvalidInputError(f"expected shape (n, k+1, d), got {v.shape}")
    if v.shape[0] == 0:
        return np.zeros(0)
    return np.sqrt(_cayley_menger_sq(v, errors))


def _lift(v: np.ndarray, f_values, lam: float) -> np.ndarray:
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")
    f = np.asarray(f_values, dtype=float)
    if f.shape != v.shape[:-1]:
        raise InvalidInputError(f"need one f value per vertex, got {f.shape} for {v.shape}")
    return np.concatenate([v, lam * f[..., None]], axis=-1)


def lifted_volume(vertices, f_values, lam: float) -> float:
    """Volume of the simplex lifted onto the graph of ``lam * f``."""
    v = _as_simplex(vertices)
    return simplex_volume(_lift(v, f_values, lam))


def lifted_volumes(simplices, f_values, lam: float, errors: str = "raise") -> np.ndarray:
    v = np.asarray(simplices, dtype=float)
    return simplex_volumes(_lift(v, f_values, lam), errors=errors)


def circumcenter(vertices) -> tuple[np.ndarray, float]:
    """Center and radius of the circumsphere of a full-dimensional simplex.

    Solves ``2 (v_i - v_0) . (c - v_0) = |v_i - v_0|^2``.  Raises
    :class:`DegenerateSimplexError` for ill-conditioned systems or when the
    recovered center is not equidistant from the vertices.
    """
    v = _as_simplex(vertices)
    m = v.shape[1]
    if v.shape[0] != m + 1:
        raise InvalidInputError(f"need {m + 1} vertices in R^{m}, got {v.shape[0]}")
    edges = v[1:] - v[0]
    rhs = 0.5 * np.einsum("ij,ij->i", edges, edges)
    # one solve gives the offset and the inverse, hence the 1-norm condition number
    try:
        sol = np.linalg.solve(edges, np.column_stack([rhs, np.eye(m)]))
    except np.linalg.LinAlgError:
        raise DegenerateSimplexError("singular circumcenter system") from None
    offset = sol[:, 0]
    cond = np.abs(edges).sum(axis=0).max() * np.abs(sol[:, 1:]).sum(axis=0).max()
    if not cond <= COND_LIMIT:
        raise DegenerateSimplexError("simplex is (nearly) flat")
    center = v[0] + offset
    dists = np.linalg.norm(v - center, axis=1)
    radius = float(dists[0])
    if not np.isfinite(radius) or np.max(np.abs(dists - radius)) > EQUIDISTANCE_RTOL * radius:
        raise DegenerateSimplexError("circumcenter is not equidistant from the vertices")
    return center, radius


def barycenter(vertices) -> np.ndarray:
    return np.asarray(vertices, dtype=float).mean(axis=0)


def clipped_score(base_vol: float, lifted_vol: float, alpha0: float | None = None) -> float:
    """``min(lifted, base / cos(alpha0))``; ``alpha0`` in degrees, ``None`` disables."""
    if alpha0 is None:
        return lifted_vol
    if not 0.0 < alpha0 < 90.0:
        raise InvalidInputError(f"clipping angle must lie in (0, 90) degrees, got {alpha0}")
    return np.minimum(lifted_vol, base_vol / math.cos(math.radians(alpha0)))


def clamp_to_boundary(bary, circ, box: BoundingBox) -> np.ndarray:
    """Pull an out-of-box circumcenter back along the Euler line.

    Returns ``circ`` itself when it lies in the box, otherwise the point where
    the segment from ``bary`` to ``circ`` leaves the box.
    """
    b = np.asarray(bary, dtype=float)
    c = np.asarray(circ, dtype=float)
    if not box.contains(b, tol=1e-12):
        raise InvalidInputError(f"barycenter {b} lies outside the bounding box")
    if box.contains(c):
        return c.copy()
    d = c - b
    t = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(d > 0, (box.hi - b) / d, np.inf)
        down = np.where(d < 0, (box.lo - b) / d, np.inf)
    t = min(t, float(up.min()), float(down.min()))
    t = max(t, 0.0)
    return box.clip(b + t * d)
