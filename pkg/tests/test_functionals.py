import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from denfunc.bounds import bandwidth, ci_halfwidth, deviation_probability
from denfunc.errors import ConfigError, NonFiniteIntegrand
from denfunc.functionals import (
    BUILTINS,
    FunctionalSpec,
    estimate,
    lipschitz_constant,
    make_builtin,
    map_interval,
)
from denfunc.kde import MirroredKde, Sample
from denfunc.kernels import make_kernel
from denfunc.quadrature import mc_grid, midpoint_grid
from denfunc.synth import TrigDensity, sample_density

EPA = make_kernel(1)
BOX = (0.25, 4.0)


def entropy_spec():
    return make_builtin("shannon-entropy", box=BOX)


def test_uniform_entropy_near_zero(rng):
    n = 10_000
    rep = estimate(entropy_spec(), [rng.random((n, 1))], EPA, bandwidth(n, 2, 1), midpoint_grid(1, 256))
    assert abs(rep.value) <= 0.05
    assert rep.value == rep.inner_integral


def test_kl_of_sample_with_itself(rng):
    s = Sample(rng.random((2000, 1)))
    rep = estimate(make_builtin("kl", box=BOX), [s, s], EPA, 0.1, midpoint_grid(1, 256))
    assert abs(rep.value) <= 1e-10


def test_trig_entropy_against_quadrature_oracle():
    p = TrigDensity(1, 0.5, 1)
    truth = sci_integrate.quad(lambda x: -float(p(x)[0]) * math.log(float(p(x)[0])), 0, 1, epsabs=1e-13, limit=200)[0]
    n = 100_000
    rep = estimate(entropy_spec(), [sample_density(p, n, 7)], EPA, bandwidth(n, 2, 1), midpoint_grid(1, 256))
    assert abs(rep.value - truth) <= 0.05


def test_renyi_divergence_identical(rng):
    s = Sample(rng.random((3000, 1)))
    spec = make_builtin("renyi-divergence", alpha=0.5, box=BOX)
    rep = estimate(spec, [s, s], EPA, 0.08, midpoint_grid(1, 256))
    # phi(int p^a p^(1-a)) = log(int p) / (a - 1) with the clipped KDE mass ~ 1
    assert rep.value == pytest.approx(math.log(rep.inner_integral) / (0.5 - 1.0), abs=1e-14)
    assert abs(rep.value) < 1e-3


def test_tsallis_entropy_alpha_two_on_uniform(rng):
    spec = make_builtin("tsallis-entropy", alpha=2.0)
    assert spec.outer(float(spec.integrand(np.float64(1.0)))) == 0.0
    n = 10_000
    rep = estimate(spec, [rng.random((n, 1))], EPA, bandwidth(n, 2, 1), midpoint_grid(1, 256))
    assert abs(rep.value) < 0.02


def test_shannon_mi_independent():
    vals = []
    for t in range(50):
        data = np.random.default_rng([3, t]).random((10_000, 2))
        rep = estimate(make_builtin("shannon-mi", box=BOX, dx=1), [data], EPA, bandwidth(10_000, 2, 2),
                       midpoint_grid(2, 64))
        vals.append(rep.value)
    assert np.all(np.abs(vals) <= 0.08)


def test_shannon_mi_positive_for_dependent(rng):
    x = rng.random(5000)
    data = np.c_[x, np.clip(x + 0.05 * rng.standard_normal(5000), 0, 1)]
    rep = estimate(make_builtin("shannon-mi", box=(0.05, 20), dx=1), [data], EPA, 0.05, midpoint_grid(2, 64))
    assert rep.value > 0.5


def test_mi_split_uses_disjoint_halves(rng):
    data = rng.random((4001, 2))
    rep = estimate(make_builtin("shannon-mi", box=BOX, dx=1), [data], EPA, 0.1, midpoint_grid(2, 32),
                   split=True, seed=3)
    assert rep.n == [2000, 2000] and rep.k == 2
    assert any("disjoint" in m for m in rep.diagnostics)


def test_lipschitz_examples():
    assert lipschitz_constant(make_builtin("shannon-entropy"), 1, 1) == 1.0
    assert lipschitz_constant(make_builtin("l2-distance"), 0.5, 3.0) == 5.0
    assert lipschitz_constant(make_builtin("kl"), 0.5, 2.0) == pytest.approx(4.0)
    with pytest.raises(ConfigError):
        lipschitz_constant(make_builtin("shannon-entropy"), 0.0, 2.0)


def _numeric_gradient_sup(spec, lo, hi, per_axis):
    axis = np.linspace(lo, hi, per_axis)
    mesh = np.meshgrid(*([axis] * spec.k), indexing="ij")
    pts = [m.ravel() for m in mesh]
    worst = 0.0
    for i in range(spec.k):
        step = 1e-7 * np.maximum(pts[i], 1.0)
        up = [p + step if j == i else p for j, p in enumerate(pts)]
        dn = [p - step if j == i else p for j, p in enumerate(pts)]
        g = (np.asarray(spec.integrand(*up)) - np.asarray(spec.integrand(*dn))) / (2 * step)
        worst = max(worst, float(np.max(np.abs(g))))
    return worst


@pytest.mark.parametrize("name,alpha", [("shannon-entropy", None), ("renyi-entropy", 0.5), ("renyi-entropy", 3.0),
                                        ("tsallis-entropy", 2.0), ("kl", None), ("renyi-divergence", 0.5),
                                        ("renyi-divergence", 2.0), ("tsallis-divergence", 0.3),
                                        ("l2-distance", None), ("shannon-mi", None)])
@pytest.mark.parametrize("box", [(0.5, 2.0), (0.25, 4.0), (0.8, 1.1)])
def test_gradient_bound_matches_grid_search(name, alpha, box):
    spec = make_builtin(name, alpha=alpha, dx=1 if name == "shannon-mi" else None)
    closed = lipschitz_constant(spec, *box)
    lo, hi = box
    # stay off the box edges by the finite-difference step
    numeric = _numeric_gradient_sup(spec, lo * (1 + 1e-6), hi * (1 - 1e-6), {1: 20001, 2: 801, 3: 101}[spec.k])
    assert numeric <= closed * (1 + 1e-5)
    assert numeric >= closed * (1 - 1e-3)


def test_plug_in_identity_against_monolithic(rng):
    names = [("shannon-entropy", None), ("renyi-entropy", 0.7), ("tsallis-entropy", 1.5), ("kl", None),
             ("renyi-divergence", 1.5), ("tsallis-divergence", 0.5), ("l2-distance", None), ("shannon-mi", None),
             ("kl", None), ("shannon-entropy", None)]
    for i, (name, alpha) in enumerate(names):
        mi = name == "shannon-mi"
        d = 2 if mi or i % 2 else 1
        spec = make_builtin(name, alpha=alpha, box=BOX, dx=1 if mi else None)
        samples = [Sample(rng.random((300, d))) for _ in range(1 if mi else spec.k)]
        h = float(rng.uniform(0.1, 0.4))
        grid = midpoint_grid(d, 40 if d == 1 else 16)
        rep = estimate(spec, samples, EPA, h, grid)
        pts = grid.points
        if mi:
            s = samples[0]
            vals = [MirroredKde(s, EPA, h).evaluate(pts),
                    MirroredKde(s.columns([0]), EPA, h).evaluate(pts[:, :1]),
                    MirroredKde(s.columns([1]), EPA, h).evaluate(pts[:, 1:])]
        else:
            vals = [MirroredKde(s, EPA, h).evaluate(pts) for s in samples]
        vals = [np.clip(v, *BOX) for v in vals]
        inner = float(np.sum(np.asarray(spec.integrand(*vals))) / grid.size)
        assert rep.inner_integral == pytest.approx(inner, rel=1e-12, abs=1e-14), name
        expected = inner if spec.outer is None else spec.outer(inner)
        assert rep.value == pytest.approx(expected, rel=1e-12, abs=1e-14), name


def _replaced(sample, rng):
    pts = np.array(sample.points)
    pts[rng.integers(len(pts))] = rng.random(pts.shape[1])
    return Sample(pts)


@pytest.mark.parametrize("name,alpha,box,d", [("shannon-entropy", None, BOX, 1), ("l2-distance", None, (0.0, 4.0), 1),
                                              ("kl", None, (0.5, 2.0), 1), ("renyi-divergence", 0.5, BOX, 2),
                                              ("tsallis-entropy", 2.0, (0.0, 3.0), 2),
                                              ("shannon-mi", None, BOX, 2)])
def test_bounded_differences(rng, name, alpha, box, d):
    mi = name == "shannon-mi"
    spec = make_builtin(name, alpha=alpha, box=box, dx=1 if mi else None)
    n = 400
    samples = [Sample(rng.random((n, d))) for _ in range(1 if mi else spec.k)]
    grid = midpoint_grid(d, 256 if d == 1 else 48)
    kern = make_kernel(1)
    h = 0.15
    base = estimate(spec, samples, kern, h, grid)
    for t in range(100 if d == 1 else 25):
        j = t % len(samples)
        alt = list(samples)
        alt[j] = _replaced(samples[j], rng)
        rep = estimate(spec, alt, kern, h, grid)
        assert abs(rep.inner_integral - base.inner_integral) <= base.C_V / n + 1e-9


def test_bounded_differences_higher_order_kernel(rng):
    spec = make_builtin("shannon-entropy", box=BOX)
    n = 300
    s = Sample(rng.random((n, 1)))
    k = make_kernel(3)
    grid = midpoint_grid(1, 512)
    base = estimate(spec, [s], k, 0.2, grid)
    assert base.C_V == pytest.approx(2 * spec.C_f * k.l1_norm)
    for _ in range(50):
        rep = estimate(spec, [_replaced(s, rng)], k, 0.2, grid)
        assert abs(rep.inner_integral - base.inner_integral) <= base.C_V / n + 1e-9


def test_permutation_invariance_bitwise(rng):
    pts = rng.random((500, 2))
    spec = make_builtin("shannon-mi", box=BOX, dx=1)
    a = estimate(spec, [pts], EPA, 0.2, midpoint_grid(2, 32))
    b = estimate(spec, [pts[rng.permutation(500)]], EPA, 0.2, midpoint_grid(2, 32))
    assert a.value == b.value and a.inner_integral == b.inner_integral


def test_ci_consistent_with_bounds(rng):
    n = 1000
    rep = estimate(entropy_spec(), [rng.random((n, 1))], EPA, 0.1, midpoint_grid(1, 128), delta=0.05, beta=2)
    assert rep.ci_halfwidth == ci_halfwidth(0.05, n, 1, rep.C_V)
    assert abs(deviation_probability(rep.ci_halfwidth, n, 1, rep.C_V) - 0.05) < 1e-12
    assert rep.inner_ci == [rep.inner_integral - rep.ci_halfwidth, rep.inner_integral + rep.ci_halfwidth]
    assert rep.bias_bound is not None and rep.C_B == 1.0


def test_ci_mapped_through_outer(rng):
    spec = make_builtin("renyi-entropy", alpha=2.0, box=BOX)
    rep = estimate(spec, [rng.random((800, 1))], EPA, 0.1, midpoint_grid(1, 128), delta=0.1)
    lo, hi = rep.inner_ci
    assert rep.ci == sorted([spec.outer(lo), spec.outer(hi)])
    assert rep.ci[0] <= rep.value <= rep.ci[1]


def test_map_interval_open_domain():
    spec = make_builtin("renyi-divergence", alpha=0.5, box=BOX)
    lo, hi = map_interval(spec, -0.5, 2.0)
    assert lo is None and hi == pytest.approx(math.log(2.0) / (0.5 - 1.0)) or hi is None
    assert map_interval(make_builtin("l2-distance"), 0.01, 0.04) == [pytest.approx(0.1), pytest.approx(0.2)]
    assert map_interval(make_builtin("l2-distance"), -0.01, 0.04)[0] == 0.0


def test_non_finite_integrand_reports_kde_values():
    # order-3 kernel goes negative near an isolated point; -t log t is undefined there
    s = Sample([[0.5]])
    with pytest.raises(NonFiniteIntegrand) as info:
        estimate(make_builtin("shannon-entropy"), [s], make_kernel(3), 0.25, midpoint_grid(1, 64))
    assert "p1" in info.value.context and info.value.context["p1"] < 0


def test_arity_and_name_errors(rng):
    s = Sample(rng.random((10, 1)))
    with pytest.raises(ConfigError):
        make_builtin("entropy")
    with pytest.raises(ConfigError):
        make_builtin("renyi-entropy", alpha=1.0)
    with pytest.raises(ConfigError):
        make_builtin("renyi-entropy")
    with pytest.raises(ConfigError):
        estimate(make_builtin("kl", box=BOX), [s], EPA, 0.2)
    with pytest.raises(ConfigError):
        estimate(make_builtin("kl", box=BOX), [s, Sample(rng.random((10, 2)))], EPA, 0.2)
    with pytest.raises(ConfigError):
        estimate(entropy_spec(), [s], EPA, 0.2, midpoint_grid(2, 4))


def test_all_builtins_construct():
    for name in BUILTINS:
        alpha = 0.5 if "renyi" in name or "tsallis" in name else None
        spec = make_builtin(name, alpha=alpha, box=BOX, dx=1 if name == "shannon-mi" else None)
        assert spec.C_f is not None and spec.C_f > 0


def test_product_mode():
    rng = np.random.default_rng(5)
    a, b = Sample(rng.random((200, 1))), Sample(rng.random((150, 2)))
    spec = FunctionalSpec(name="product-mass", k=2, integrand=lambda s, t: s * t, mode="product")
    rep = estimate(spec, [a, b], EPA, 0.2, midpoint_grid(3, 20))
    g1, g2 = midpoint_grid(1, 20), midpoint_grid(2, 20)
    m1 = g1.weight * MirroredKde(a, EPA, 0.2).evaluate_grid(g1).sum()
    m2 = g2.weight * MirroredKde(b, EPA, 0.2).evaluate_grid(g2).sum()
    assert rep.value == pytest.approx(m1 * m2, rel=1e-12)


def test_monte_carlo_grid_close_to_midpoint(rng):
    data = rng.random((3000, 2))
    spec = make_builtin("shannon-entropy", box=BOX)
    a = estimate(spec, [data], EPA, 0.15, midpoint_grid(2, 64)).value
    b = estimate(spec, [data], EPA, 0.15, mc_grid(2, 100_000, 1)).value
    assert abs(a - b) < 0.01


def test_report_serializes():
    rep = estimate(entropy_spec(), [np.full((5, 1), 0.5)], EPA, 0.5, midpoint_grid(1, 16), delta=0.1)
    d = rep.to_dict()
    assert d["kernel"]["order"] == 1 and d["clipping"]["applied"] is True
