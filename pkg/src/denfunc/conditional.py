"""Conditional density functionals and Renyi-alpha conditional mutual information.

Estimates functionals of the form

    F(P) = int_Z P(z) f( int_X g(P(x_1, z)/P(z), ..., P(x_k, z)/P(z)) dx ) dz

from two disjoint halves of the data: one half fits the KDE of ``P(z)``, the
other fits the joint KDEs.  Every KDE value is clipped to
``[kappa_min, kappa_max]`` before it enters a ratio, so ratios stay in
``[kappa_min/kappa_max, kappa_max/kappa_min]`` and ``f``, ``g`` remain
Lipschitz there.

Each joint density is a *view*: the set of X blocks it sees, joined with Z.
The plain form above has one view per block; Renyi CMI uses three views
(XY, X and Y) over a single integration space X x Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import bounds
from .errors import ConfigError, NonFiniteIntegrand
from .functionals import EstimateReport
from .kde import MirroredKde, Sample, as_sample, check_clip
from .kernels import Kernel, make_kernel
from .quadrature import DEFAULT_RESOLUTION, Grid, midpoint_grid

__all__ = [
    "ConditionalSpec",
    "SplitData",
    "split_data",
    "estimate_conditional",
    "make_cmi_spec",
    "renyi_cmi",
    "cmi_variance_constant",
    "conditional_variance_constant",
    "axis_resolution",
]


def axis_resolution(total_dim: int) -> int:
    """Points per axis for a tensor grid over ``total_dim`` coordinates."""
    if total_dim in DEFAULT_RESOLUTION:
        return DEFAULT_RESOLUTION[total_dim]
    return max(4, int(10 ** (5.0 / total_dim)))


def _ratio_grid(lo: float, hi: float, k: int, per_axis: int) -> np.ndarray:
    axis = np.geomspace(lo, hi, per_axis) if hi > lo else np.array([lo])
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class ConditionalSpec:
    """Outer ``f``, inner ``g`` and the clip box.

    ``c_g``/``C_g`` bound ``g`` on the clipped ratio box, ``C_f``/``C_fprime``
    bound ``|f|``/``|f'|`` on ``[c_g, C_g]`` and ``g_lipschitz`` bounds the
    largest partial derivative of ``g``.  Whatever is not supplied is found by
    a dense search over the box.
    """

    name: str
    g: Callable
    f: Callable
    kappa_min: float
    kappa_max: float
    x_dims: tuple
    dz: int
    views: Optional[tuple] = None
    f_prime: Optional[Callable] = None
    c_g: Optional[float] = None
    C_g: Optional[float] = None
    C_f: Optional[float] = None
    C_fprime: Optional[float] = None
    g_lipschitz: Optional[float] = None
    variance_constant: Optional[Callable] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        check_clip(self.kappa_min, self.kappa_max)
        if self.dz < 1 or not self.x_dims or any(d < 1 for d in self.x_dims):
            raise ConfigError("conditional functionals need dz >= 1 and positive X block dimensions")
        object.__setattr__(self, "x_dims", tuple(int(d) for d in self.x_dims))
        views = self.views or tuple((i,) for i in range(len(self.x_dims)))
        views = tuple(tuple(sorted(v)) for v in views)
        for v in views:
            if not v or any(b < 0 or b >= len(self.x_dims) for b in v):
                raise ConfigError(f"view {v} refers to unknown X blocks")
        object.__setattr__(self, "views", views)
        self._derive()

    @property
    def k(self) -> int:
        return len(self.views)

    @property
    def ratio_box(self) -> tuple:
        return (self.kappa_min / self.kappa_max, self.kappa_max / self.kappa_min)

    @property
    def dx_total(self) -> int:
        return sum(self.x_dims)

    def view_coords(self, v: tuple) -> tuple:
        """X coordinates (columns) covered by a view."""
        offsets = np.concatenate([[0], np.cumsum(self.x_dims)])
        return tuple(c for b in v for c in range(offsets[b], offsets[b + 1]))

    def _derive(self):
        lo, hi = self.ratio_box
        per_axis = {1: 4001, 2: 201, 3: 41}.get(self.k, 9)
        pts = None
        if self.c_g is None or self.C_g is None:
            pts = _ratio_grid(lo, hi, self.k, per_axis)
            with np.errstate(all="ignore"):
                vals = np.asarray(self.g(*pts.T), dtype=float)
            object.__setattr__(self, "c_g", float(np.min(vals)))
            object.__setattr__(self, "C_g", float(np.max(vals)))
        if self.g_lipschitz is None:
            if pts is None:
                pts = _ratio_grid(lo, hi, self.k, per_axis)
            step = 1e-6 * np.maximum(pts, 1.0)
            worst = 0.0
            for i in range(self.k):
                up, dn = pts.copy(), pts.copy()
                up[:, i] += step[:, i]
                dn[:, i] -= step[:, i]
                with np.errstate(all="ignore"):
                    d = (np.asarray(self.g(*up.T)) - np.asarray(self.g(*dn.T))) / (2 * step[:, i])
                worst = max(worst, float(np.max(np.abs(d))))
            object.__setattr__(self, "g_lipschitz", worst)
        u = np.linspace(self.c_g, self.C_g, 4001)
        with np.errstate(all="ignore"):
            if self.C_f is None:
                object.__setattr__(self, "C_f", float(np.max(np.abs(self.f(u)))))
            if self.C_fprime is None:
                if self.f_prime is not None:
                    fp = np.abs(self.f_prime(u))
                else:
                    du = 1e-6 * max(1.0, abs(self.C_g))
                    fp = np.abs((self.f(u + du) - self.f(u - du)) / (2 * du))
                object.__setattr__(self, "C_fprime", float(np.max(fp)))
        if not all(math.isfinite(getattr(self, a)) for a in ("c_g", "C_g", "C_f", "C_fprime", "g_lipschitz")):
            raise ConfigError(f"{self.name}: f or g is unbounded on the clipped ratio range")

    def constants(self) -> dict:
        return {"c_g": self.c_g, "C_g": self.C_g, "C_f": self.C_f, "C_fprime": self.C_fprime,
                "g_lipschitz": self.g_lipschitz, "kappa_min": self.kappa_min, "kappa_max": self.kappa_max}


@dataclass(frozen=True, eq=False)
class SplitData:
    """Disjoint halves: ``sample_z`` (Z columns) and ``sample_joint`` (X blocks then Z)."""

    sample_z: Sample
    sample_joint: Sample

    @property
    def n(self) -> int:
        return min(self.sample_z.n, self.sample_joint.n)


def split_data(data, dz: int, seed: int = 0) -> SplitData:
    """Seeded shuffle, then first half -> ``P(z)`` sample, second half -> joint sample."""
    data = as_sample(data)
    if data.d <= dz:
        raise ConfigError(f"data has {data.d} columns; need more than dz={dz}")
    half = data.n // 2
    if half < 1:
        raise ConfigError("need at least two rows to split")
    perm = np.random.default_rng(seed).permutation(data.n)
    z_rows = data.points[perm[:half]][:, data.d - dz:]
    joint_rows = data.points[perm[half:2 * half]]
    return SplitData(Sample(z_rows), Sample(joint_rows))


def conditional_variance_constant(spec: ConditionalSpec, l1: float, views_per_point: Optional[int] = None) -> float:
    """Per-observation change bound ``C_V`` (change <= C_V / n) for a general spec.

    A Z-half observation moves ``P(z)``, which enters both as the outer weight
    and in every ratio denominator:
        (C_f + kappa_max C_f' k L_g kappa_max / kappa_min^2) * 2 l1^dz.
    A joint-half observation moves the joint KDEs it feeds:
        kappa_max C_f' L_g k / kappa_min * 2 l1^(dx + dz).
    """
    k = spec.k if views_per_point is None else views_per_point
    k1, k2 = spec.kappa_min, spec.kappa_max
    z_case = (spec.C_f + k2 * spec.C_fprime * spec.k * spec.g_lipschitz * k2 / k1**2) * l1**spec.dz
    d_joint = max(len(spec.view_coords(v)) for v in spec.views) + spec.dz
    joint_case = k2 * spec.C_fprime * spec.g_lipschitz * k / k1 * l1**d_joint
    return 2.0 * max(z_case, joint_case)


def _eval_on_product(fn, coords, grid_x: Grid, grid_z: Grid) -> np.ndarray:
    """Evaluate ``fn`` on pairs (x[coords], z); result shaped ``grid_x.shape + grid_z.shape``."""
    if isinstance(fn, MirroredKde) and grid_x.is_tensor and grid_z.is_tensor:
        vals = fn.evaluate_tensor([grid_x.axes[c] for c in coords] + list(grid_z.axes))
        shape = [grid_x.shape[j] if j in coords else 1 for j in range(grid_x.dimension)] + list(grid_z.shape)
        return vals.reshape(shape)
    px = grid_x.points[:, list(coords)]
    pz = grid_z.points
    nx, nz = len(px), len(pz)
    pairs = np.concatenate([np.repeat(px, nz, axis=0), np.tile(pz, (nx, 1))], axis=1)
    call = fn._evaluate_points if isinstance(fn, MirroredKde) else fn
    return np.asarray(call(pairs), dtype=float).reshape(tuple(grid_x.shape) + tuple(grid_z.shape))


def _eval_z(fn, grid_z: Grid) -> np.ndarray:
    if isinstance(fn, MirroredKde):
        return fn.evaluate_grid(grid_z)
    return np.asarray(fn(grid_z.points), dtype=float).reshape(grid_z.shape)


def _fit_views(spec: ConditionalSpec, data: SplitData, kernel: Kernel, h: float, joint_split: str):
    z_cols = list(range(spec.dx_total, spec.dx_total + spec.dz))
    joint = data.sample_joint
    if joint.d != spec.dx_total + spec.dz:
        raise ConfigError(f"joint sample has {joint.d} columns, expected {spec.dx_total + spec.dz}")
    if data.sample_z.d != spec.dz:
        raise ConfigError(f"Z sample has {data.sample_z.d} columns, expected {spec.dz}")
    if joint_split == "shared":
        parts = [joint] * spec.k
    elif joint_split == "separate":
        size = joint.n // spec.k
        if size < 1:
            raise ConfigError("joint half too small for a separate split per density")
        parts = [joint.rows(np.arange(i * size, (i + 1) * size)) for i in range(spec.k)]
    else:
        raise ConfigError(f"unknown joint split {joint_split!r} (use 'shared' or 'separate')")
    kdes = []
    for v, part in zip(spec.views, parts):
        cols = list(spec.view_coords(v)) + z_cols
        kdes.append(MirroredKde(part.columns(cols), kernel, h))
    return MirroredKde(data.sample_z, kernel, h), kdes, [p.n for p in parts]


def estimate_conditional(spec: ConditionalSpec, data: Optional[SplitData], kernel: Kernel, h: float,
                         grid_z: Optional[Grid] = None, grid_x: Optional[Grid] = None, *,
                         densities: Optional[dict] = None, delta: Optional[float] = None,
                         beta: Optional[float] = None, C_B: float = 1.0, joint_split: str = "shared",
                         mcdiarmid_k: Optional[int] = None) -> EstimateReport:
    """Clipped plug-in estimate of a conditional functional.

    ``densities`` switches to injection mode: ``{"z": callable, "joint":
    [callable per view]}`` with each callable taking an ``(N, dims)`` array,
    used in place of the fitted KDEs (lets tests separate quadrature error
    from estimation error).
    """
    D = spec.dx_total + spec.dz
    m = axis_resolution(D)
    grid_x = grid_x or midpoint_grid(spec.dx_total, m)
    grid_z = grid_z or midpoint_grid(spec.dz, m)
    if grid_x.dimension != spec.dx_total or grid_z.dimension != spec.dz:
        raise ConfigError("grid dimensions do not match the functional's X and Z dimensions")

    if densities is not None:
        pz_fn = densities["z"]
        joint_fns = list(densities["joint"])
        if len(joint_fns) != spec.k:
            raise ConfigError(f"need {spec.k} joint densities, got {len(joint_fns)}")
        n_z, n_parts = None, None
    else:
        if data is None:
            raise ConfigError("either data or injected densities are required")
        pz_fn, joint_fns, n_parts = _fit_views(spec, data, kernel, h, joint_split)
        n_z = data.sample_z.n

    lo, hi = spec.kappa_min, spec.kappa_max
    raw_z = _eval_z(pz_fn, grid_z)
    raw_joint = [_eval_on_product(fn, spec.view_coords(v), grid_x, grid_z) for fn, v in zip(joint_fns, spec.views)]
    clip_counts = {"z": [int((raw_z < lo).sum()), int((raw_z > hi).sum())]}
    for i, a in enumerate(raw_joint):
        clip_counts[f"joint{i}"] = [int((a < lo).sum()), int((a > hi).sum())]
    pz = np.clip(raw_z, lo, hi)
    joint = [np.clip(a, lo, hi) for a in raw_joint]

    ratios = [a / pz for a in joint]
    r_lo, r_hi = spec.ratio_box
    for r in ratios:
        if r.min() < r_lo * (1 - 1e-12) or r.max() > r_hi * (1 + 1e-12):
            raise ArithmeticError("clipped density ratio escaped the ratio box")

    full_shape = tuple(grid_x.shape) + tuple(grid_z.shape)
    with np.errstate(all="ignore"):
        w = np.broadcast_to(np.asarray(spec.g(*ratios), dtype=float), full_shape)
    nx, nz = grid_x.size, grid_z.size
    inner = grid_x.weight * w.reshape(nx, nz).sum(axis=0)
    with np.errstate(all="ignore"):
        outer = np.asarray(spec.f(inner), dtype=float) * pz.ravel()
    bad = ~np.isfinite(outer)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise NonFiniteIntegrand(
            f"{spec.name}: non-finite outer integrand at Z node {j} (inner integral {inner[j]!r}); "
            "clip bounds should prevent this",
            point=grid_z.points[j], context={"inner": float(inner[j]), "p_z": float(pz.ravel()[j])},
        )
    value = float(grid_z.weight * np.sum(outer))

    diagnostics = ["density estimates clipped to [kappa_min, kappa_max] before forming ratios"]
    report = dict(
        functional=spec.name, value=value, inner_integral=value, bandwidth=float(h), kernel=kernel.to_dict(),
        grid={"x": grid_x.describe(), "z": grid_z.describe()}, k=mcdiarmid_k or (1 + spec.k),
        clipping={"applied": True, "box": [lo, hi], "counts": clip_counts}, diagnostics=diagnostics,
        n=[] if n_z is None else [n_z] + list(n_parts), constants=spec.constants(),
    )
    if densities is None:
        n_eff = min([n_z] + list(n_parts))
        if spec.variance_constant is not None:
            C_V = float(spec.variance_constant(kernel.l1_norm))
        else:
            C_V = conditional_variance_constant(spec, kernel.l1_norm, 1 if joint_split == "separate" else None)
        report.update(C_f=spec.C_f, C_V=C_V)
        if delta is not None:
            eps = bounds.ci_halfwidth(delta, n_eff, report["k"], C_V)
            report.update(delta=delta, ci_halfwidth=eps, inner_ci=[value - eps, value + eps],
                          ci=[value - eps, value + eps])
        if beta is not None:
            params = bounds.HolderParams(beta, D)
            report.update(beta=float(beta), C_B=float(C_B), bias_bound=bounds.bias_bound(h, params, n_eff, C_B))
            diagnostics.append("bias bound is stated up to the unknown constant C_B")
    return EstimateReport(**report)


# ---------------------------------------------------------------------------
# Renyi-alpha CMI


def _cmi_log_range(alpha: float, kappa_min: float, kappa_max: float) -> float:
    """Largest |log| of the CMI integrand (a/p)^alpha (b c / p^2)^(1 - alpha) on the clip box."""
    rho = kappa_max / kappa_min
    return (alpha + 2.0 * abs(1.0 - alpha)) * math.log(rho)


def cmi_variance_constant(alpha: float, kappa_min: float, kappa_max: float, l1: float,
                          dx: int, dy: int, dz: int) -> float:
    """``C_V = kappa* l1^(dx+dy+dz)`` for the clipped Renyi CMI estimate.

    With a, b, c the clipped joint KDEs of (x,y,z), (x,z), (y,z), p the
    clipped KDE of z, rho = kappa_max/kappa_min and
    Lam = (alpha + 2|1-alpha|) log rho, the integrand w = a^alpha (bc)^(1-alpha) p^(alpha-2)
    has |log w| <= Lam, so its inner integral I satisfies |log I| <= Lam.

    * Z-half observation: d/dp [p log(I)/(alpha-1)] = (log I + alpha - 2)/(alpha-1),
      giving a change of at most (Lam + |alpha-2|)/|alpha-1| * int|dp|.
    * joint-half observation: along the segment between the two estimates
      d log I = int w dlog w / I with sup w / I <= e^Lam and
      |dlog w| <= (alpha|da| + |1-alpha|(|db| + |dc|)) / kappa_min; the outer
      weight p is at most kappa_max.  Change <= rho e^Lam (alpha + 2|1-alpha|)/|alpha-1| * int|d.|.

    Each int|d.| is at most 2 l1^(dx+dy+dz) / n (l1 >= 1), so
    kappa* = 2 max(z-case, joint-case).
    """
    alpha = float(alpha)
    if not alpha > 0 or alpha == 1.0:
        raise ConfigError(f"alpha must lie in (0,1) or (1,inf), got {alpha}")
    check_clip(kappa_min, kappa_max)
    lam = _cmi_log_range(alpha, kappa_min, kappa_max)
    rho = kappa_max / kappa_min
    scale = abs(alpha - 1.0)
    z_case = (lam + abs(alpha - 2.0)) / scale
    joint_case = rho * math.exp(lam) * (alpha + 2.0 * abs(1.0 - alpha)) / scale
    return 2.0 * max(z_case, joint_case) * l1 ** (dx + dy + dz)


def make_cmi_spec(alpha: float, kappa_min: float, kappa_max: float, dx: int, dy: int, dz: int) -> ConditionalSpec:
    alpha = float(alpha)
    if not alpha > 0 or alpha == 1.0 or not math.isfinite(alpha):
        raise ConfigError(f"alpha must lie in (0,1) or (1,inf), got {alpha}")
    check_clip(kappa_min, kappa_max)
    lam = _cmi_log_range(alpha, kappa_min, kappa_max)
    scale = abs(alpha - 1.0)
    rho = kappa_max / kappa_min

    def g(r_xy, r_x, r_y):
        return np.power(r_xy, alpha) * np.power(r_x * r_y, 1.0 - alpha)

    def f(u):
        return np.log(u) / (alpha - 1.0)

    return ConditionalSpec(
        name="renyi-cmi", g=g, f=f, f_prime=lambda u: 1.0 / ((alpha - 1.0) * u),
        kappa_min=kappa_min, kappa_max=kappa_max, x_dims=(dx, dy), dz=dz, views=((0, 1), (0,), (1,)),
        c_g=math.exp(-lam), C_g=math.exp(lam), C_f=lam / scale, C_fprime=math.exp(lam) / scale,
        # dg/dr_xy = alpha r_xy^(alpha-1) (r_x r_y)^(1-alpha); dg/dr_x = (1-alpha) r_xy^alpha r_x^-alpha r_y^(1-alpha)
        g_lipschitz=max(alpha * rho ** (3.0 * scale), scale * rho ** (2.0 * alpha + scale)),
        variance_constant=lambda l1: cmi_variance_constant(alpha, kappa_min, kappa_max, l1, dx, dy, dz),
        alpha=alpha,
    )


def renyi_cmi(data, alpha: float, kappa_min: float, kappa_max: float, dx: int = 1, dy: int = 1, dz: int = 1, *,
              kernel: Optional[Kernel] = None, h: Optional[float] = None, beta: float = 2.0, c: float = 1.0,
              grid_m: Optional[int] = None, delta: Optional[float] = None, C_B: float = 1.0, seed: int = 0,
              cmi_split: str = "shared") -> EstimateReport:
    """Renyi-alpha CMI ``I(X; Y | Z)`` from rows ``[x | y | z]``.

    The rows are shuffled with ``seed`` and halved; ``n`` below is the half size.
    """
    spec = make_cmi_spec(alpha, kappa_min, kappa_max, dx, dy, dz)
    data = as_sample(data)
    if data.d != dx + dy + dz:
        raise ConfigError(f"data has {data.d} columns, expected dx+dy+dz = {dx + dy + dz}")
    split = split_data(data, dz, seed)
    D = dx + dy + dz
    if kernel is None:
        kernel = make_kernel(bounds.HolderParams(beta, D).ell)
    if h is None:
        h = bounds.bandwidth(split.n, beta, D, c)
    m = grid_m or axis_resolution(D)
    return estimate_conditional(spec, split, kernel, h, midpoint_grid(dz, m), midpoint_grid(dx + dy, m),
                                delta=delta, beta=beta, C_B=C_B, joint_split=cmi_split, mcdiarmid_k=4)
