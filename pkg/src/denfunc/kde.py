"""Boundary-mirrored kernel density estimation on the unit cube.

Every sample coordinate ``v`` is mirrored to ``{v, -v, 2 - v}``; with a
kernel supported on [-1, 1] and ``h <= 1`` these are the only images that
reach [0, 1], so the estimate keeps all of its mass inside the cube::

    p(x) = 1/(n h^d) sum_i prod_j [K((x_j - v_ij)/h) + K((x_j + v_ij)/h) + K((x_j - 2 + v_ij)/h)]

The product over axes of the per-axis mirrored sums equals the sum over all
``3^d`` reflected points, which is what makes tensor-grid evaluation cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .kernels import Kernel
from .quadrature import Grid

__all__ = ["Sample", "MirroredKde", "fit", "evaluate", "evaluate_clipped", "replace_point", "as_sample"]

# Upper bound on the number of floats in one (samples x queries) block.
_BLOCK = 1 << 21
_QUERY_CHUNK = 256


def _check_unit_cube(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        bad = np.argwhere((arr < 0.0) | (arr > 1.0))[0]
        raise ConfigError(f"{what} has a coordinate outside [0, 1] at index {tuple(int(b) for b in bad)}")


@dataclass(frozen=True, eq=False)
class Sample:
    """``n x d`` matrix of observations in [0, 1]^d (read-only)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ConfigError(f"sample must be a non-empty n x d matrix, got shape {pts.shape}")
        _check_unit_cube(pts, "sample")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def columns(self, cols) -> "Sample":
        return Sample(self.points[:, list(cols)])

    def rows(self, idx) -> "Sample":
        return Sample(self.points[np.asarray(idx)])


def as_sample(data) -> Sample:
    return data if isinstance(data, Sample) else Sample(data)


def _mirrored_axis(kernel: Kernel, v: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    """``(len(v), len(x))`` matrix of per-axis mirrored kernel sums."""
    v = v[:, None]
    x = x[None, :]
    return kernel((x - v) / h) + kernel((x + v) / h) + kernel((x - 2.0 + v) / h)


def _axis_triplets(kernel: Kernel, v: np.ndarray, axis: np.ndarray, h: float):
    """Sparse form of :func:`_mirrored_axis` for a sorted ``axis``.

    Yields ``(rows, cols, values)`` per mirror image, covering every axis
    node within one bandwidth of the image (plus one node of slack on each
    side, where the kernel itself returns an exact zero).  Entries skipped
    are exact zeros, so sums agree with the dense matrix.
    """
    m = len(axis)
    rows_all = np.arange(len(v))
    for image in (v, -v, 2.0 - v):
        lo = np.searchsorted(axis, image - h, side="left") - 1
        hi = np.searchsorted(axis, image + h, side="right") + 1
        lo = np.clip(lo, 0, m)
        hi = np.clip(hi, 0, m)
        width = int((hi - lo).max(initial=0))
        if width <= 0:
            continue
        cols = lo[:, None] + np.arange(width)[None, :]
        keep = cols < hi[:, None]
        rows = np.broadcast_to(rows_all[:, None], cols.shape)[keep]
        cols = cols[keep]
        yield rows, cols, kernel((axis[cols] - image[rows]) / h)


def _mirrored_axis_dense(kernel: Kernel, v: np.ndarray, axis: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros((len(v), len(axis)))
    for rows, cols, vals in _axis_triplets(kernel, v, axis, h):
        out[rows, cols] += vals
    return out


def _rowwise_outer(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = (out[:, :, None] * m[:, None, :]).reshape(out.shape[0], -1)
    return out


@dataclass(frozen=True, eq=False)
class MirroredKde:
    sample: Sample
    kernel: Kernel
    bandwidth: float
    _sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = float(self.bandwidth)
        if not (0.0 < h <= 1.0):
            raise ConfigError(f"bandwidth must lie in (0, 1], got {self.bandwidth}")
        object.__setattr__(self, "bandwidth", h)
        pts = self.sample.points
        # Canonical row order makes every evaluation independent of the
        # order in which observations were supplied, bit for bit.
        order = np.lexsort(pts.T[::-1])
        srt = np.ascontiguousarray(pts[order])
        srt.flags.writeable = False
        object.__setattr__(self, "_sorted", srt)

    @property
    def n(self) -> int:
        return self.sample.n

    @property
    def dimension(self) -> int:
        return self.sample.d

    @property
    def _norm(self) -> float:
        return 1.0 / (self.n * self.bandwidth**self.dimension)

    def evaluate(self, x):
        """Density estimate at one point (returns float) or at ``(q, d)`` points."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] == self.dimension)
        if single:
            q = arr.reshape(1, -1)
        elif arr.ndim == 1 and self.dimension == 1:
            q = arr[:, None]
        else:
            q = np.atleast_2d(arr)
        if q.ndim != 2 or q.shape[1] != self.dimension:
            raise ConfigError(f"query dimension {q.shape[1]} does not match estimator dimension {self.dimension}")
        _check_unit_cube(q, "query")
        out = self._evaluate_points(q)
        return float(out[0]) if single else out

    def _evaluate_points(self, q: np.ndarray) -> np.ndarray:
        # For x, v in [0, 1] every mirror image of v within h of x implies
        # |x - v| <= h, so only samples whose first coordinate (the sort key
        # of _sorted) lies within h of a query can contribute.
        src = self._sorted
        h = self.bandwidth
        first = src[:, 0]
        reach = h * (1.0 + 1e-9) + 1e-12
        order = np.argsort(q[:, 0], kind="stable")
        out = np.zeros(len(q))
        for start in range(0, len(q), _QUERY_CHUNK):
            idx = order[start:start + _QUERY_CHUNK]
            qc = q[idx]
            lo = np.searchsorted(first, qc[0, 0] - reach, side="left")
            hi = np.searchsorted(first, qc[-1, 0] + reach, side="right")
            out[idx] = self._dense_sum(src[lo:hi], qc)
        return out * self._norm

    def _dense_sum(self, src: np.ndarray, q: np.ndarray) -> np.ndarray:
        total = np.zeros(len(q))
        step = max(1, _BLOCK // max(1, len(q)))
        for start in range(0, len(src), step):
            blk = src[start:start + step]
            prod = _mirrored_axis(self.kernel, blk[:, 0], q[:, 0], self.bandwidth)
            for j in range(1, src.shape[1]):
                prod = prod * _mirrored_axis(self.kernel, blk[:, j], q[:, j], self.bandwidth)
            total += prod.sum(axis=0)
        return total

    def evaluate_tensor(self, axes) -> np.ndarray:
        """Evaluate on the tensor product of 1-d coordinate arrays.

        Returns an array of shape ``(len(axes[0]), ..., len(axes[d-1]))``.
        """
        axes = [np.asarray(a, dtype=float) for a in axes]
        if len(axes) != self.dimension:
            raise ConfigError(f"{len(axes)} axes given for a {self.dimension}-d estimator")
        for a in axes:
            _check_unit_cube(a, "query")
        src = self._sorted
        d = self.dimension
        split = (d + 1) // 2
        m_left = int(np.prod([len(a) for a in axes[:split]]))
        m_right = int(np.prod([len(a) for a in axes[split:]])) if d > 1 else 1
        out = np.zeros((m_left, m_right)) if d > 1 else np.zeros(m_left)
        step = max(1, _BLOCK // max(m_left, m_right, 1))
        sortable = all(np.all(np.diff(a) > 0) for a in axes)
        axis_matrix = _mirrored_axis_dense if sortable else _mirrored_axis
        for start in range(0, src.shape[0], step):
            blk = src[start:start + step]
            if d == 1 and sortable:
                for _, cols, vals in _axis_triplets(self.kernel, blk[:, 0], axes[0], self.bandwidth):
                    out += np.bincount(cols, weights=vals, minlength=m_left)
                continue
            mats = [axis_matrix(self.kernel, blk[:, j], axes[j], self.bandwidth) for j in range(d)]
            if d == 1:
                out += mats[0].sum(axis=0)
            else:
                out += _rowwise_outer(mats[:split]).T @ _rowwise_outer(mats[split:])
        return (out * self._norm).reshape([len(a) for a in axes])

    def evaluate_grid(self, grid: Grid) -> np.ndarray:
        """Values at every grid node, shaped like ``grid.shape``."""
        if grid.dimension != self.dimension:
            raise ConfigError(f"grid dimension {grid.dimension} does not match estimator dimension {self.dimension}")
        if grid.is_tensor:
            return self.evaluate_tensor(grid.axes)
        return self._evaluate_points(grid.points)

    def evaluate_clipped(self, x, kappa_min: float, kappa_max: float):
        check_clip(kappa_min, kappa_max)
        return np.clip(self.evaluate(x), kappa_min, kappa_max)

    def replace_point(self, index: int, new_point) -> "MirroredKde":
        if not (0 <= index < self.n):
            raise IndexError(f"sample index {index} out of range for n={self.n}")
        pts = np.array(self.sample.points)
        pts[index] = np.asarray(new_point, dtype=float).reshape(self.dimension)
        return MirroredKde(Sample(pts), self.kernel, self.bandwidth)


def check_clip(kappa_min: float, kappa_max: float) -> None:
    if not (np.isfinite(kappa_min) and np.isfinite(kappa_max)) or not (0.0 < kappa_min <= kappa_max):
        raise ConfigError(f"clip bounds must satisfy 0 < kappa_min <= kappa_max (got {kappa_min}, {kappa_max})")


def fit(sample, kernel: Kernel, h: float) -> MirroredKde:
    return MirroredKde(as_sample(sample), kernel, h)


def evaluate(kde: MirroredKde, x):
    return kde.evaluate(x)


def evaluate_clipped(kde: MirroredKde, x, kappa_min: float, kappa_max: float):
    return kde.evaluate_clipped(x, kappa_min, kappa_max)


def replace_point(kde: MirroredKde, index: int, new_point) -> MirroredKde:
    return kde.replace_point(index, new_point)
