"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into an "acceptance criteria" section of the summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import optimize

from conftest import brute_force_kde
from denfunc.bounds import HolderParams, bandwidth, bias_bound, ci_halfwidth, deviation_probability
from denfunc.citest import conditional_independence_test
from denfunc.cli import main
from denfunc.conditional import renyi_cmi
from denfunc.functionals import estimate, make_builtin
from denfunc.kde import Sample, fit
from denfunc.kernels import make_kernel
from denfunc.quadrature import midpoint_grid
from denfunc.synth import TrigDensity, concentration_experiment, rate_experiment

BOX = (0.25, 4.0)
EPA = make_kernel(1)


def test_01_kernel_moments(criterion):
    t0 = time.perf_counter()
    # 40-node Gauss-Legendre is exact for every u^j K(u) here (degree <= 11)
    nodes, weights = np.polynomial.legendre.leggauss(40)
    worst = 0.0
    for order in (1, 2, 3, 5):
        vals = np.asarray(make_kernel(order)(nodes), dtype=float)
        worst = max(worst, abs(float(weights @ vals) - 1))
        for j in range(1, order + 1):
            worst = max(worst, abs(float(weights @ (nodes**j * vals))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 1.0
    criterion(1, "kernel moments", ok, f"max |moment error| {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_02_kde_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for d in (1, 2, 3):
        for order in (1, 2):
            k = make_kernel(order)
            pts = rng.random((30, d))
            pts[:4] *= 0.05
            q = rng.random((100, d))
            q[:10] *= 0.02
            kde = fit(pts, k, 0.3)
            fast = kde.evaluate(q)
            slow = np.array([brute_force_kde(pts, k.coefficients, 0.3, x) for x in q])
            scale = np.maximum(np.abs(slow), 1e-300)
            mask = slow != 0
            worst = max(worst, float(np.max(np.abs(fast - slow)[mask] / scale[mask], initial=0.0)))
            assert np.all(fast[~mask] == 0.0) or np.max(np.abs(fast[~mask])) < 1e-13
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10
    criterion(2, "mirrored KDE vs 3^d brute force", ok, f"max rel diff {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_03_kde_mass(criterion):
    rng = np.random.default_rng(3)
    n = 10_000
    errs = []
    for d in (1, 2):
        kde = fit(rng.random((n, d)), EPA, bandwidth(n, 2, d))
        g = midpoint_grid(d, 128)
        errs.append(abs(g.weight * float(np.sum(kde.evaluate_grid(g))) - 1.0))
    ok = max(errs) <= 0.02
    criterion(3, "KDE mass", ok, "|mass-1| " + ", ".join(f"d={d}: {e:.2e}" for d, e in zip((1, 2), errs)))
    assert ok


def test_04_bounded_differences(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    n = 500
    grid = midpoint_grid(1, 256)
    h = bandwidth(n, 2, 1)
    worst_ratio = 0.0
    for name, box in (("shannon-entropy", BOX), ("l2-distance", (0.0, 4.0))):
        spec = make_builtin(name, box=box)
        samples = [rng.random((n, 1)) for _ in range(spec.k)]
        base = estimate(spec, samples, EPA, h, grid)
        for t in range(100):
            j = t % spec.k
            alt = [s.copy() for s in samples]
            alt[j][rng.integers(n)] = rng.random(1)
            diff = abs(estimate(spec, alt, EPA, h, grid).inner_integral - base.inner_integral)
            worst_ratio = max(worst_ratio, diff / (base.C_V / n + 1e-9))
    elapsed = time.perf_counter() - t0
    ok = worst_ratio <= 1.0 and elapsed < 60
    criterion(4, "bounded differences", ok, f"max |dF|/(C_V/n) {worst_ratio:.3f} over 200 replacements, {elapsed:.1f}s")
    assert ok


def test_05_trivial_values(criterion):
    rng = np.random.default_rng(5)
    n = 10_000
    ent = estimate(make_builtin("shannon-entropy", box=BOX), [rng.random((n, 1))], EPA, bandwidth(n, 2, 1),
                   midpoint_grid(1, 256)).value
    s = Sample(rng.random((n, 1)))
    kl = estimate(make_builtin("kl", box=BOX), [s, s], EPA, bandwidth(n, 2, 1), midpoint_grid(1, 256)).value
    hits = 0
    for t in range(100):
        data = np.random.default_rng([5, t]).random((8000, 3))
        rep = renyi_cmi(data, 0.5, *BOX, delta=0.05, seed=t)
        hits += abs(rep.value) <= rep.ci_halfwidth
    ok = abs(ent) <= 0.05 and abs(kl) <= 1e-10 and hits >= 90
    criterion(5, "trivial values", ok, f"uniform entropy {ent:.4f}, D(p||p) {kl:.1e}, CMI covered {hits}/100")
    assert ok


def test_06_rate(criterion):
    t0 = time.perf_counter()
    res = rate_experiment(TrigDensity(1, 0.5, 1), make_builtin("shannon-entropy", box=BOX),
                          [500, 1000, 2000, 4000, 8000, 16000, 32000, 64000], 20, 6, beta=2.0)
    elapsed = time.perf_counter() - t0
    ok = -0.87 <= res["slope"] <= -0.45 and elapsed < 600
    criterion(6, "rate reproduction", ok,
              f"slope {res['slope']:.4f} (target {res['target_slope']:.4f}, bootstrap CI "
              f"[{res['slope_ci'][0]:.3f}, {res['slope_ci'][1]:.3f}]), {elapsed:.0f}s")
    assert ok


def test_07_concentration_tail(criterion):
    t0 = time.perf_counter()
    res = concentration_experiment(TrigDensity(1, 0.5, 1), make_builtin("shannon-entropy", box=BOX), 2000, 200,
                                   [0.001, 0.005, 0.02, 0.08, 0.15], 7, beta=2.0)
    elapsed = time.perf_counter() - t0
    ok = all(r["within"] for r in res["rows"]) and elapsed < 600
    table = "; ".join(f"eps={r['eps']}: {r['empirical']:.3f} vs {r['bound']:.3f}" for r in res["rows"])
    criterion(7, "concentration tail", ok, f"{table}, {elapsed:.0f}s")
    assert ok


def test_08_ci_round_trip(criterion):
    worst = 0.0
    for delta in (0.001, 0.01, 0.05, 0.2, 0.5):
        for n, k, C_V in ((100, 1, 2.0), (10_000, 4, 37.5)):
            eps = ci_halfwidth(delta, n, k, C_V)
            worst = max(worst, abs(deviation_probability(eps, n, k, C_V) - delta))
    ok = worst <= 1e-12
    criterion(8, "CI round trip", ok, f"max |P(eps(delta)) - delta| {worst:.1e}")
    assert ok


def test_09_bandwidth_optimality(criterion):
    n = 10_000
    parts = []
    ok = True
    for beta, d in ((1, 1), (2, 1), (2, 2)):
        params = HolderParams(beta, d)
        res = optimize.minimize_scalar(lambda lh: bias_bound(math.exp(lh), params, n), bounds=(-20, 0),
                                       method="bounded", options={"xatol": 1e-12})
        ratio = math.exp(res.x) / n ** (-1 / (beta + d))
        good = abs(ratio - 1) <= 0.05
        ok &= good
        parts.append(f"(beta={beta}, d={d}) h*/n^(-1/(beta+d)) = {ratio:.4f}{'' if good else ' FAIL'}")
    criterion(9, "bandwidth optimality", ok, "; ".join(parts))
    assert ok


def test_10_type_one(criterion):
    t0 = time.perf_counter()
    trials = 200
    rejected = sum(conditional_independence_test(np.random.default_rng([10, t]).random((2000, 3)), 0.5, 0.05, *BOX,
                                                 mode="conc", seed=t).rejected for t in range(trials))
    rate = rejected / trials
    limit = 0.05 + 3 * math.sqrt(0.05 * 0.95 / trials)
    elapsed = time.perf_counter() - t0
    ok = rate <= limit and elapsed < 900
    criterion(10, "type-I control", ok, f"false-rejection rate {rate:.3f} <= {limit:.3f}, {elapsed:.0f}s")
    assert ok


def test_11_cli_determinism(criterion, tmp_path):
    rng = np.random.default_rng(11)
    one = tmp_path / "one.csv"
    xyz = tmp_path / "xyz.csv"
    np.savetxt(one, rng.random((3000, 1)), delimiter=",")
    np.savetxt(xyz, rng.random((2000, 3)), delimiter=",")
    clip = ["--kappa-min", "0.25", "--kappa-max", "4"]
    commands = {
        "estimate": ["estimate", "--functional", "shannon-entropy", "--input", str(one), *clip, "--mc", "5000",
                     "--seed", "9"],
        "cmi": ["cmi", "--input", str(xyz), "--alpha", "0.5", *clip, "--seed", "3"],
        "citest": ["citest", "--input", str(xyz), "--alpha", "2", *clip, "--seed", "3"],
        "bounds": ["bounds", "--d", "2", "--n", "5000", "--cf", "3"],
        "kde-check": ["kde-check", "--input", str(one)],
        "rate": ["rate", "--functional", "shannon-entropy", *clip, "--n-list", "250,500,1000", "--trials", "4",
                 "--bootstrap", "50", "--seed", "5"],
        "tail": ["tail", "--functional", "shannon-entropy", *clip, "--n", "300", "--seed", "5"],
    }
    same = []
    for name, argv in commands.items():
        outs = []
        for rep in range(2):
            path = tmp_path / f"{name}-{rep}.json"
            assert main(argv + ["--out", str(path)]) in (0, 3)
            outs.append(path.read_bytes())
        same.append(outs[0] == outs[1])
    ok = all(same)
    criterion(11, "CLI determinism", ok, f"{sum(same)}/{len(same)} commands byte-identical on repeat")
    assert ok
