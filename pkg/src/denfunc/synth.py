"""Synthetic test densities with exact samplers and quadrature ground truth.

The family is

    p(x) = 1 + a * (prod_j (2 sin^2(pi x_j))^m - c_{m,d}),

with ``c_{m,d} = (binom(2m, m) / 2^m)^d`` the mean of the product term.  All
derivatives of order ``< 2m`` vanish on the cube boundary, so ``p`` sits in
the boundary-flat Holder classes for ``beta <= m + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from . import bounds
from ._parallel import parallel_map, trial_rng
from .errors import ConfigError
from .functionals import FunctionalSpec, estimate
from .kde import Sample
from .kernels import make_kernel
from .quadrature import midpoint_grid

__all__ = [
    "TrigDensity",
    "sample_density",
    "rejection_sample",
    "oracle_functional",
    "rate_experiment",
    "concentration_experiment",
]

_ORACLE_RES = {1: 100_000, 2: 1024}


@dataclass(frozen=True)
class TrigDensity:
    d: int = 1
    a: float = 0.0
    m: int = 1

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.d}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"boundary order m must be a positive integer, got {self.m}")
        if not (0.0 <= self.a < 1.0):
            raise ConfigError(f"amplitude must lie in [0, 1), got {self.a}")
        if self.a * self.normalizer >= 1.0:
            raise ConfigError(f"amplitude {self.a} makes the density non-positive (a * c = {self.a * self.normalizer})")

    @property
    def axis_mean(self) -> float:
        # int_0^1 (2 sin^2(pi x))^m dx
        return math.comb(2 * self.m, self.m) / 2.0**self.m

    @property
    def normalizer(self) -> float:
        return self.axis_mean**self.d

    @property
    def lower(self) -> float:
        return 1.0 - self.a * self.normalizer

    @property
    def envelope(self) -> float:
        """``sup p``, reached where every ``sin^2`` equals one."""
        return 1.0 + self.a * (2.0 ** (self.m * self.d) - self.normalizer)

    def _bump(self, x: np.ndarray) -> np.ndarray:
        return np.prod((2.0 * np.sin(np.pi * x) ** 2) ** self.m, axis=-1)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and self.d > 1:
            x = x[None, :]
        elif x.ndim <= 1:
            x = x.reshape(-1, 1)
        return 1.0 + self.a * (self._bump(x) - self.normalizer)

    def marginal(self, dims: Sequence[int]):
        """Density of the coordinates ``dims`` (same family, fewer axes)."""
        dims = list(dims)
        rest = self.d - len(dims)
        scale = self.axis_mean**rest

        def p(x):
            x = np.asarray(x, dtype=float).reshape(-1, len(dims))
            return 1.0 + self.a * (scale * self._bump(x) - self.normalizer)

        return p

    def cdf1d(self, x):
        """CDF for ``d == 1``; closed form when ``m == 1``."""
        if self.d != 1:
            raise ConfigError("cdf1d is defined for one-dimensional densities only")
        x = np.asarray(x, dtype=float)
        if self.m == 1:
            return x - self.a * np.sin(2.0 * np.pi * x) / (2.0 * np.pi)
        flat = [integrate.quad(lambda t: float(self(t)[0]), 0.0, v, epsabs=1e-12)[0] for v in np.ravel(x)]
        return np.reshape(flat, np.shape(x))


def rejection_sample(density, envelope: float, d: int, n: int, rng: np.random.Generator):
    """``n`` draws from ``density`` on [0,1]^d with a uniform proposal.

    Returns ``(points, proposals_used)``.
    """
    out = []
    have = 0
    proposed = 0
    while have < n:
        batch = int(math.ceil((n - have) * envelope * 1.1)) + 16
        x = rng.random((batch, d))
        u = rng.random(batch)
        keep = u * envelope <= density(x)
        acc = x[keep]
        need = n - have
        if len(acc) > need:
            # count proposals up to and including the last accepted draw used
            last = np.flatnonzero(keep)[need - 1]
            proposed += last + 1
            acc = acc[:need]
        else:
            proposed += batch
        out.append(acc)
        have += len(acc)
    return np.concatenate(out, axis=0), proposed


def sample_density(p: TrigDensity, n: int, seed) -> Sample:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts, _ = rejection_sample(p, p.envelope, p.d, int(n), rng)
    return Sample(pts)


# ---------------------------------------------------------------------------
# ground truth


def _true_values(spec: FunctionalSpec, densities, pts: np.ndarray):
    if spec.is_mi:
        p = densities[0]
        dx = spec.x_dims
        D = pts.shape[1]
        return [p(pts), p.marginal(range(dx))(pts[:, :dx]), p.marginal(range(dx, D))(pts[:, dx:])]
    return [q(pts) for q in densities]


def _midpoint_truth(spec, densities, d, m):
    grid = midpoint_grid(d, m)
    total = 0.0
    pts_all = grid.points
    step = 1 << 20
    parts = []
    for start in range(0, len(pts_all), step):
        pts = pts_all[start:start + step]
        parts.append(np.asarray(spec.integrand(*_true_values(spec, densities, pts)), dtype=float))
    vals = np.concatenate(parts)
    total = grid.weight * np.sum(vals)
    return float(total)


def oracle_functional(p: TrigDensity, spec: FunctionalSpec, q: Optional[TrigDensity] = None,
                      resolution: Optional[int] = None, tol: float = 1e-6, transformed: bool = True) -> float:
    """High-resolution midpoint value of the functional on the true densities.

    Raises if doubling the resolution moves the inner integral by ``tol`` or more.
    """
    if spec.is_mi:
        densities = [p]
    elif spec.k == 1:
        densities = [p]
    elif spec.k == 2:
        densities = [p, q if q is not None else p]
    else:
        raise ConfigError(f"oracle supports k <= 2 (and MI), got k={spec.k}")
    if spec.mode != "shared" and spec.k > 1:
        raise ConfigError("oracle supports shared-argument functionals only")
    d = p.d
    m = resolution or _ORACLE_RES.get(d)
    if m is None or float(2 * m) ** d > 1e8:
        raise ConfigError(f"oracle resolution unavailable for d={d}")
    coarse = _midpoint_truth(spec, densities, d, m)
    fine = _midpoint_truth(spec, densities, d, 2 * m)
    if abs(fine - coarse) >= tol:
        raise ArithmeticError(f"oracle quadrature not converged: |F(2m) - F(m)| = {abs(fine - coarse):.3g}")
    if not transformed:
        return fine
    out = spec.apply_outer(fine)
    if out is None:
        raise ArithmeticError("outer transform undefined at the true inner integral")
    return out


# ---------------------------------------------------------------------------
# experiments


def _draw(spec: FunctionalSpec, p: TrigDensity, q: Optional[TrigDensity], n: int, rng):
    if spec.is_mi or spec.k == 1:
        return [sample_density(p, n, rng)]
    return [sample_density(p, n, rng), sample_density(q if q is not None else p, n, rng)]


def _setup(spec, p, beta, kernel_order, grid_m):
    d = p.d
    beta = float(beta if beta is not None else p.m + 1)
    order = bounds.HolderParams(beta, d).ell if kernel_order is None else kernel_order
    kernel = make_kernel(order)
    grid = midpoint_grid(d, grid_m) if grid_m else None
    return beta, kernel, grid


def _loglog_slope(ns, errs):
    slope, _ = np.polyfit(np.log(ns), np.log(errs), 1)
    return float(slope)


def rate_experiment(p: TrigDensity, spec: FunctionalSpec, n_list: Sequence[int], trials: int, seed: int, *,
                    q: Optional[TrigDensity] = None, beta: Optional[float] = None, c: float = 1.0,
                    kernel_order: Optional[int] = None, grid_m: Optional[int] = None,
                    bootstrap: int = 200) -> dict:
    """Mean absolute error against the oracle for each ``n`` and the log-log slope."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("n_list must be strictly ascending")
    if trials < 1:
        raise ConfigError("need at least one trial")
    beta, kernel, grid = _setup(spec, p, beta, kernel_order, grid_m)
    truth = oracle_functional(p, spec, q)

    def run(job):
        i, t = job
        n = n_list[i]
        h = bounds.bandwidth(n, beta, p.d, c)
        rep = estimate(spec, _draw(spec, p, q, n, trial_rng(seed, i, t)), kernel, h, grid, seed=seed)
        return abs(rep.value - truth)

    jobs = [(i, t) for i in range(len(n_list)) for t in range(trials)]
    errs = np.array(parallel_map(run, jobs)).reshape(len(n_list), trials)
    mean_err = errs.mean(axis=1)
    slope = _loglog_slope(n_list, mean_err)

    rng = trial_rng(seed, 10**6)
    boot = []
    for _ in range(bootstrap):
        idx = rng.integers(0, trials, size=(len(n_list), trials))
        boot.append(_loglog_slope(n_list, np.take_along_axis(errs, idx, axis=1).mean(axis=1)))
    lo, hi = np.percentile(boot, [2.5, 97.5]) if boot else (slope, slope)
    return {
        "functional": spec.name,
        "truth": truth,
        "beta": beta,
        "d": p.d,
        "target_slope": -beta / (beta + p.d),
        "kernel_order": kernel.order,
        "trials": trials,
        "rows": [{"n": n, "mean_error": float(e), "bandwidth": bounds.bandwidth(n, beta, p.d, c)}
                 for n, e in zip(n_list, mean_err)],
        "slope": slope,
        "slope_ci": [float(lo), float(hi)],
    }


def concentration_experiment(p: TrigDensity, spec: FunctionalSpec, n: int, trials: int, eps_list: Sequence[float],
                             seed: int, *, q: Optional[TrigDensity] = None, beta: Optional[float] = None,
                             c: float = 1.0, kernel_order: Optional[int] = None,
                             grid_m: Optional[int] = None) -> dict:
    """Empirical tail ``P(|F - mean F| > eps)`` next to the exponential bound.

    Deviations are measured on the inner integral, before any outer transform.
    """
    if trials < 200:
        raise ConfigError("the tail experiment needs at least 200 trials")
    if spec.C_f is None:
        raise ConfigError(f"{spec.name} needs a clip box so that its Lipschitz constant is finite")
    beta, kernel, grid = _setup(spec, p, beta, kernel_order, grid_m)
    h = bounds.bandwidth(n, beta, p.d, c)

    def run(t):
        return estimate(spec, _draw(spec, p, q, n, trial_rng(seed, t)), kernel, h, grid, seed=seed)

    reports = parallel_map(run, range(trials))
    vals = np.array([r.inner_integral for r in reports])
    C_V, k = reports[0].C_V, reports[0].k
    center = float(np.mean(vals))
    rows = []
    for eps in eps_list:
        emp = float(np.mean(np.abs(vals - center) > eps))
        bound = bounds.deviation_probability(float(eps), n, k, C_V)
        slack = 3.0 * math.sqrt(bound * (1.0 - bound) / trials)
        rows.append({"eps": float(eps), "empirical": emp, "bound": bound, "allowance": slack,
                     "within": emp <= bound + slack})
    return {
        "functional": spec.name,
        "n": int(n),
        "trials": int(trials),
        "bandwidth": h,
        "C_V": C_V,
        "k": k,
        "mean": center,
        "std": float(np.std(vals, ddof=1)),
        "rows": rows,
    }
