"""Plug-in estimation of integral functionals of densities on unit cubes.

A functional ``F(p_1, ..., p_k) = phi( int f(p_1, ..., p_k) )`` is estimated by
fitting one mirrored KDE per sample, evaluating ``f`` on the KDE values over a
quadrature grid, integrating, and applying the optional outer transform
``phi``.  Two argument modes are supported:

``shared``
    every density is evaluated at the same point of ``[0,1]^d``
    (divergences, distances);
``product``
    density ``i`` sees only its own block of a point in the product space
    ``[0,1]^{d_1} x ... x [0,1]^{d_k}``.

Shannon MI is built on ``shared`` mode: the joint KDE sees the whole point and
the two marginal KDEs see their coordinate blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import xlogy

from . import bounds
from .bounds import bandwidth
from .errors import ConfigError
from .kde import MirroredKde, Sample, as_sample, check_clip
from .kernels import Kernel
from .quadrature import Grid, default_grid, integrate_values

__all__ = [
    "FunctionalSpec",
    "EstimateReport",
    "BUILTINS",
    "bandwidth",
    "make_builtin",
    "lipschitz_constant",
    "estimate",
    "map_interval",
]

BUILTINS = (
    "shannon-entropy",
    "renyi-entropy",
    "tsallis-entropy",
    "kl",
    "renyi-divergence",
    "tsallis-divergence",
    "l2-distance",
    "shannon-mi",
)
_ALPHA_FAMILY = {"renyi-entropy", "tsallis-entropy", "renyi-divergence", "tsallis-divergence"}


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    """Description of ``phi(int f(p_1, ..., p_k))``.

    ``integrand`` takes ``k`` broadcastable arrays of density values.
    ``gradient_bound(kmin, kmax)`` returns the sup over the box
    ``[kmin, kmax]^k`` of the largest partial derivative of ``f``, i.e. the
    Lipschitz constant of ``f`` in the 1-norm.  ``outer_domain`` is the
    lower end of the set on which ``outer`` is defined (``outer_open``
    marks it as excluded, as for ``log``).
    """

    name: str
    k: int
    integrand: Callable
    mode: str = "shared"
    outer: Optional[Callable] = None
    outer_domain: float = -math.inf
    outer_open: bool = False
    C_f: Optional[float] = None
    domain_box: Optional[tuple] = None
    gradient_bound: Optional[Callable] = None
    needs_box: bool = False
    alpha: Optional[float] = None
    x_dims: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("shared", "product"):
            raise ConfigError(f"unknown argument mode {self.mode!r}")
        if self.k < 1:
            raise ConfigError("a functional needs at least one density")
        if self.domain_box is not None:
            lo, hi = map(float, self.domain_box)
            if not (0.0 <= lo <= hi) or not math.isfinite(hi):
                raise ConfigError(f"domain box must satisfy 0 <= kappa_min <= kappa_max, got {self.domain_box}")
            object.__setattr__(self, "domain_box", (lo, hi))
            if self.C_f is None and self.gradient_bound is not None:
                object.__setattr__(self, "C_f", lipschitz_constant(self, lo, hi))

    @property
    def is_mi(self) -> bool:
        return self.x_dims is not None

    def with_box(self, kappa_min: float, kappa_max: float) -> "FunctionalSpec":
        return replace(self, domain_box=(kappa_min, kappa_max), C_f=None)

    def apply_outer(self, u: float) -> Optional[float]:
        if self.outer is None:
            return float(u)
        if u < self.outer_domain or (self.outer_open and u <= self.outer_domain):
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            v = float(self.outer(u))
        return v if math.isfinite(v) else None


@dataclass(frozen=True)
class EstimateReport:
    functional: str
    value: Optional[float]
    inner_integral: float
    bandwidth: float
    kernel: dict
    n: list
    grid: dict
    k: int
    C_f: Optional[float] = None
    C_V: Optional[float] = None
    delta: Optional[float] = None
    ci_halfwidth: Optional[float] = None
    inner_ci: Optional[list] = None
    ci: Optional[list] = None
    bias_bound: Optional[float] = None
    beta: Optional[float] = None
    C_B: Optional[float] = None
    clipping: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for key in self.__dataclass_fields__:
            out[key] = getattr(self, key)
        return out


# ---------------------------------------------------------------------------
# builtin functionals


def _check_alpha(name: str, alpha) -> float:
    if alpha is None:
        raise ConfigError(f"{name} needs alpha")
    alpha = float(alpha)
    if not (alpha > 0) or alpha == 1.0 or not math.isfinite(alpha):
        raise ConfigError(f"{name} needs alpha in (0,1) or (1,inf), got {alpha}")
    return alpha


def _need_positive(kmin: float, what: str) -> None:
    if kmin <= 0:
        raise ConfigError(f"{what} has an unbounded derivative unless kappa_min > 0")


def _shannon_entropy_grad(kmin, kmax):
    _need_positive(kmin, "shannon-entropy")
    return max(abs(1.0 + math.log(kmin)), abs(1.0 + math.log(kmax)))


def _power_grad(alpha):
    def grad(kmin, kmax):
        # d/dt t^alpha = alpha t^(alpha-1); monotone in t
        if alpha < 1:
            _need_positive(kmin, "t^alpha with alpha < 1")
            return alpha * kmin ** (alpha - 1)
        return alpha * kmax ** (alpha - 1)

    return grad


def _kl_grad(kmin, kmax):
    _need_positive(kmin, "kl")
    rho = kmax / kmin
    # d/ds = log(s/t) + 1, d/dt = -s/t with s/t in [1/rho, rho]
    return max(1.0 + math.log(rho), abs(1.0 - math.log(rho)), rho)


def _alpha_divergence_grad(alpha):
    def grad(kmin, kmax):
        _need_positive(kmin, "s^alpha t^(1-alpha)")
        rho = kmax / kmin
        # d/ds = alpha r^(alpha-1), d/dt = (1-alpha) r^alpha, r = s/t in [1/rho, rho]
        return max(alpha * rho ** abs(alpha - 1.0), abs(1.0 - alpha) * rho**alpha)

    return grad


def _l2_grad(kmin, kmax):
    return max(2.0 * (kmax - kmin), np.finfo(float).tiny)


def _mi_grad(kmin, kmax):
    _need_positive(kmin, "shannon-mi")
    lo = math.log(kmin / kmax**2)
    hi = math.log(kmax / kmin**2)
    # d/ds = log(s/(uv)) + 1, d/du = -s/u, d/dv = -s/v
    return max(abs(1.0 + lo), abs(1.0 + hi), kmax / kmin)


def _entropy(t):
    return -xlogy(t, t)


def _kl(s, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        return xlogy(s, s) - xlogy(s, t)


def _mi(s, u, v):
    with np.errstate(divide="ignore", invalid="ignore"):
        return xlogy(s, s) - xlogy(s, u * v)


def make_builtin(name: str, alpha: Optional[float] = None, box: Optional[Sequence[float]] = None,
                 dx: Optional[int] = None) -> FunctionalSpec:
    """Return one of the shipped functionals.

    ``box`` is the clip box ``(kappa_min, kappa_max)``; log-type and
    negative-power functionals have no default and report an error when
    estimated without one produces non-finite values.  ``shannon-mi`` needs
    ``dx``, the number of leading coordinates that form ``X``.
    """
    if name not in BUILTINS:
        raise ConfigError(f"unknown functional {name!r}; choose from {', '.join(BUILTINS)}")
    if name in _ALPHA_FAMILY:
        alpha = _check_alpha(name, alpha)
    else:
        alpha = None

    kw = {}
    if name == "shannon-entropy":
        kw = dict(k=1, integrand=_entropy, gradient_bound=_shannon_entropy_grad, needs_box=True)
    elif name == "renyi-entropy":
        a = alpha
        kw = dict(k=1, integrand=lambda t: np.power(t, a), gradient_bound=_power_grad(a),
                  outer=lambda u: math.log(u) / (1.0 - a), outer_domain=0.0, outer_open=True, needs_box=a < 1)
    elif name == "tsallis-entropy":
        a = alpha
        kw = dict(k=1, integrand=lambda t: np.power(t, a), gradient_bound=_power_grad(a),
                  outer=lambda u: (1.0 - u) / (a - 1.0), needs_box=a < 1)
    elif name == "kl":
        kw = dict(k=2, integrand=_kl, gradient_bound=_kl_grad, needs_box=True)
    elif name == "renyi-divergence":
        a = alpha
        kw = dict(k=2, integrand=lambda s, t: np.power(s, a) * np.power(t, 1.0 - a),
                  gradient_bound=_alpha_divergence_grad(a), needs_box=True,
                  outer=lambda u: math.log(u) / (a - 1.0), outer_domain=0.0, outer_open=True)
    elif name == "tsallis-divergence":
        a = alpha
        kw = dict(k=2, integrand=lambda s, t: np.power(s, a) * np.power(t, 1.0 - a),
                  gradient_bound=_alpha_divergence_grad(a), needs_box=True,
                  outer=lambda u: (u - 1.0) / (a - 1.0))
    elif name == "l2-distance":
        kw = dict(k=2, integrand=lambda s, t: (s - t) ** 2, gradient_bound=_l2_grad,
                  outer=math.sqrt, outer_domain=0.0)
    elif name == "shannon-mi":
        if dx is None or int(dx) < 1:
            raise ConfigError("shannon-mi needs dx >= 1 (number of X coordinates)")
        kw = dict(k=3, integrand=_mi, gradient_bound=_mi_grad, needs_box=True, x_dims=int(dx))
    return FunctionalSpec(name=name, alpha=alpha, domain_box=None if box is None else tuple(box), **kw)


def lipschitz_constant(spec: FunctionalSpec, kappa_min: float, kappa_max: float) -> float:
    """Sup of ``max_i |df/dp_i|`` over ``[kappa_min, kappa_max]^k``."""
    if spec.gradient_bound is None:
        raise ConfigError(f"{spec.name} has no closed-form gradient bound; pass C_f explicitly")
    if not (0.0 <= kappa_min <= kappa_max) or not math.isfinite(kappa_max):
        raise ConfigError(f"invalid box [{kappa_min}, {kappa_max}]")
    return float(spec.gradient_bound(kappa_min, kappa_max))


def map_interval(spec: FunctionalSpec, lo: float, hi: float):
    """Image of the inner-integral interval ``[lo, hi]`` under the outer transform.

    Endpoints outside the transform's domain map to ``None`` (unbounded).
    """
    if spec.outer is None:
        return [lo, hi]
    if not spec.outer_open and lo < spec.outer_domain:
        lo = spec.outer_domain
    a, b = spec.apply_outer(lo), spec.apply_outer(hi)
    if a is None or b is None:
        known = [v for v in (a, b) if v is not None]
        if not known:
            return [None, None]
        # The missing endpoint sits at the domain edge where phi is unbounded;
        # its side depends on whether phi increases.
        probe = spec.apply_outer(hi + 1.0)
        increasing = probe is not None and b is not None and probe >= b
        return [None, known[0]] if increasing else [known[0], None]
    return [min(a, b), max(a, b)]


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class _View:
    label: str
    sample_id: int
    sample: Sample
    coords: tuple


def _resolve_views(spec: FunctionalSpec, samples, split: bool, seed: int):
    samples = [as_sample(s) for s in samples]
    diagnostics = []
    if spec.is_mi:
        if len(samples) != 1:
            raise ConfigError("shannon-mi takes a single joint sample")
        joint = samples[0]
        dx = spec.x_dims
        if not (0 < dx < joint.d):
            raise ConfigError(f"dx={dx} must leave at least one Y coordinate in a {joint.d}-d sample")
        D = joint.d
        xs, ys = tuple(range(dx)), tuple(range(dx, D))
        if split:
            perm = np.random.default_rng(seed).permutation(joint.n)
            half = joint.n // 2
            if half < 1:
                raise ConfigError("sample too small to split")
            a, b = joint.rows(perm[:half]), joint.rows(perm[half:2 * half])
            views = [_View("joint", 0, a, xs + ys), _View("marginal-x", 1, b.columns(xs), xs),
                     _View("marginal-y", 1, b.columns(ys), ys)]
            diagnostics.append("marginals estimated on a disjoint half of the data")
        else:
            views = [_View("joint", 0, joint, xs + ys), _View("marginal-x", 0, joint.columns(xs), xs),
                     _View("marginal-y", 0, joint.columns(ys), ys)]
            diagnostics.append(
                "marginal KDEs reuse the joint sample; the estimates are not independent, so the "
                "bias analysis holds only approximately"
            )
        return views, D, diagnostics

    if len(samples) != spec.k:
        raise ConfigError(f"{spec.name} takes {spec.k} samples, got {len(samples)}")
    if spec.mode == "shared":
        dims = {s.d for s in samples}
        if len(dims) != 1:
            raise ConfigError(f"shared-argument mode needs equal dimensions, got {[s.d for s in samples]}")
        D = samples[0].d
        views = [_View(f"p{i + 1}", i, s, tuple(range(D))) for i, s in enumerate(samples)]
    else:
        offset = 0
        views = []
        for i, s in enumerate(samples):
            views.append(_View(f"p{i + 1}", i, s, tuple(range(offset, offset + s.d))))
            offset += s.d
        D = offset
    return views, D, diagnostics


def _evaluate_view(kde: MirroredKde, coords: tuple, grid: Grid) -> np.ndarray:
    if grid.is_tensor:
        vals = kde.evaluate_tensor([grid.axes[c] for c in coords])
        shape = [grid.shape[j] if j in coords else 1 for j in range(grid.dimension)]
        return vals.reshape(shape)
    return kde._evaluate_points(np.ascontiguousarray(grid.points[:, list(coords)]))


def estimate(spec: FunctionalSpec, samples, kernel: Kernel, h: float, grid: Optional[Grid] = None, *,
             delta: Optional[float] = None, beta: Optional[float] = None, C_B: float = 1.0,
             split: bool = False, seed: int = 0) -> EstimateReport:
    """Plug-in estimate of ``spec`` from one sample per density.

    With ``delta`` (and a finite ``C_f`` on ``spec``) the report carries the
    concentration half-width; with ``beta`` it carries the bias bound.
    """
    views, D, diagnostics = _resolve_views(spec, samples, split, seed)
    if grid is None:
        grid = default_grid(D, seed)
    if grid.dimension != D:
        raise ConfigError(f"grid dimension {grid.dimension} does not match the functional's domain dimension {D}")

    kdes = [MirroredKde(v.sample, kernel, h) for v in views]
    values = [_evaluate_view(kde, v.coords, grid) for kde, v in zip(kdes, views)]

    clipping = {"applied": False}
    if spec.domain_box is not None:
        lo, hi = spec.domain_box
        counts = {}
        for v, arr in zip(views, values):
            counts[v.label] = {"below": int(np.count_nonzero(arr < lo)), "above": int(np.count_nonzero(arr > hi))}
        values = [np.clip(arr, lo, hi) for arr in values]
        clipping = {"applied": True, "box": [lo, hi], "counts": counts}

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        f_vals = np.asarray(spec.integrand(*values), dtype=float)
    if f_vals.shape != tuple(grid.shape):
        f_vals = np.broadcast_to(f_vals, grid.shape)

    def context(idx):
        out = {}
        for v, arr in zip(views, values):
            full = np.broadcast_to(arr, grid.shape).ravel()
            out[v.label] = float(full[idx])
        return out

    inner = integrate_values(f_vals, grid, context)
    value = spec.apply_outer(inner)
    if value is None:
        diagnostics.append(f"outer transform undefined at inner integral {inner!r}")

    n_per = [v.sample.n for v in views]
    sample_ids = sorted({v.sample_id for v in views})
    k = len(sample_ids)
    report = dict(
        functional=spec.name, value=value, inner_integral=inner, bandwidth=float(h), kernel=kernel.to_dict(),
        n=[min(v.sample.n for v in views if v.sample_id == s) for s in sample_ids], grid=grid.describe(), k=k,
        clipping=clipping, diagnostics=diagnostics,
    )

    C_f = spec.C_f
    if C_f is not None:
        # One observation feeds every view built on its sample.
        per_sample = [sum(kernel.l1_norm ** len(v.coords) for v in views if v.sample_id == s) for s in sample_ids]
        C_V = 2.0 * C_f * max(per_sample)
        report.update(C_f=C_f, C_V=C_V)
        if delta is not None:
            n_min = min(n_per)
            eps = bounds.ci_halfwidth(delta, n_min, k, C_V)
            lo_in, hi_in = inner - eps, inner + eps
            report.update(delta=delta, ci_halfwidth=eps, inner_ci=[lo_in, hi_in], ci=map_interval(spec, lo_in, hi_in))
    elif delta is not None:
        diagnostics.append("no Lipschitz constant available (supply a clip box); confidence interval omitted")

    if beta is not None:
        d_max = max(len(v.coords) for v in views)
        params = bounds.HolderParams(beta, d_max)
        report.update(beta=float(beta), C_B=float(C_B),
                      bias_bound=bounds.bias_bound(h, params, min(n_per), C_B))
        diagnostics.append("bias bound is stated up to the unknown constant C_B")
    return EstimateReport(**report)
