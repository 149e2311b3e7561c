"""Equal-weight quadrature over the unit cube [0,1]^d.

Two schemes: tensor grids of cell midpoints and seeded Monte-Carlo points.
Integrands are vectorized: they receive an ``(N, d)`` array of nodes and
return ``N`` values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NonFiniteIntegrand

__all__ = [
    "Grid",
    "DEFAULT_RESOLUTION",
    "MC_DEFAULT_N",
    "MAX_NODES",
    "midpoint_grid",
    "mc_grid",
    "default_grid",
    "integrate",
    "integrate_values",
]

DEFAULT_RESOLUTION = {1: 256, 2: 64, 3: 24}
MC_DEFAULT_N = 100_000
MAX_NODES = 10**8


@dataclass(frozen=True, eq=False)
class Grid:
    dimension: int
    scheme: str  # "midpoint" | "monte-carlo"
    resolution: int  # m per axis, or N total
    seed: Optional[int] = None
    axes: Optional[tuple] = None
    _points: Optional[np.ndarray] = None

    @property
    def is_tensor(self) -> bool:
        return self.axes is not None

    @property
    def shape(self) -> tuple:
        if self.is_tensor:
            return tuple(len(a) for a in self.axes)
        return (self.resolution,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def weight(self) -> float:
        return 1.0 / self.size

    @property
    def points(self) -> np.ndarray:
        """All nodes as an ``(N, d)`` array, in C order of :attr:`shape`."""
        if self._points is not None:
            return self._points
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def sub(self, dims) -> "Grid":
        """Tensor sub-grid over the listed axes (midpoint grids only)."""
        if not self.is_tensor:
            raise ValueError("sub-grids are only defined for tensor grids")
        dims = tuple(dims)
        return Grid(len(dims), self.scheme, self.resolution, axes=tuple(self.axes[i] for i in dims))

    def describe(self) -> dict:
        out = {"scheme": self.scheme, "dimension": self.dimension, "resolution": self.resolution, "nodes": self.size}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def midpoint_grid(d: int, m: int) -> Grid:
    """Tensor grid of cell midpoints ``(2i+1)/(2m)``, ``m`` per axis."""
    if d < 1 or m < 1:
        raise ConfigError(f"midpoint grid needs d >= 1 and m >= 1 (got d={d}, m={m})")
    if float(m) ** d > MAX_NODES:
        raise ConfigError(f"midpoint grid with m={m}, d={d} exceeds {MAX_NODES:.0e} nodes")
    axis = (2.0 * np.arange(m) + 1.0) / (2.0 * m)
    axis.flags.writeable = False
    return Grid(int(d), "midpoint", int(m), axes=(axis,) * int(d))


def mc_grid(d: int, n: int, seed: int) -> Grid:
    if d < 1 or n < 1:
        raise ConfigError(f"Monte-Carlo grid needs d >= 1 and N >= 1 (got d={d}, N={n})")
    pts = np.random.default_rng(seed).random((int(n), int(d)))
    pts.flags.writeable = False
    return Grid(int(d), "monte-carlo", int(n), seed=int(seed), _points=pts)


def default_grid(d: int, seed: int = 0) -> Grid:
    if d in DEFAULT_RESOLUTION:
        return midpoint_grid(d, DEFAULT_RESOLUTION[d])
    return mc_grid(d, MC_DEFAULT_N, seed)


def integrate_values(values, grid: Grid, context: Optional[Callable] = None) -> float:
    """Equal-weight sum of integrand values laid out in grid order.

    ``context(flat_index)`` may return a dict describing the inputs at a
    node; it is attached to the error raised for non-finite values.
    """
    flat = np.asarray(values, dtype=float).ravel()
    if flat.size != grid.size:
        raise ValueError(f"expected {grid.size} integrand values, got {flat.size}")
    bad = ~np.isfinite(flat)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        point = _node(grid, idx)
        ctx = context(idx) if context is not None else {}
        raise NonFiniteIntegrand(
            f"integrand is {flat[idx]} at node {np.round(point, 6).tolist()}", point=point, context=ctx
        )
    # np.sum on a contiguous 1-d array uses pairwise summation: fixed order.
    return float(grid.weight * np.sum(flat))


def integrate(fn: Callable, grid: Grid) -> float:
    """``weight * sum(fn(nodes))`` for a vectorized ``fn``."""
    pts = grid.points
    vals = np.asarray(fn(pts), dtype=float)
    if vals.shape == ():
        vals = np.full(len(pts), float(vals))
    return integrate_values(vals, grid)


def _node(grid: Grid, flat_index: int) -> np.ndarray:
    if grid.is_tensor:
        idx = np.unravel_index(flat_index, grid.shape)
        return np.array([grid.axes[j][i] for j, i in enumerate(idx)])
    return grid.points[flat_index]
