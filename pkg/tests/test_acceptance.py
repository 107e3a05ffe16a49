"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line (shown in the terminal summary and on
stdout with ``-s``) before asserting.

    pytest tests/test_acceptance.py -v
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, binary_entropy, var_log
from ratedisp import codebook_lab as lab
from ratedisp.dispersion import (
    dispersion_report,
    dispersion_via_derivatives,
    dispersion_via_tilted,
    estimate_d0,
    fit_exponent_curvature,
)
from ratedisp.finite_blocklength import lemma2_check, q_inverse, rate_redundancy_oracle
from ratedisp.gaussian import (
    GaussianSpec,
    gaussian_achievable_rate,
    gaussian_converse_rate,
    gaussian_exponent,
    gaussian_normal_approx,
    gaussian_rdf,
)
from ratedisp.rd_solver import clear_memo, rdf_value
from ratedisp.source_model import DistortionSpec


def record(k, title, ok, detail, t0):
    line = f"{'PASS' if ok else 'FAIL'}  [{k}] {title}: {detail} ({time.perf_counter() - t0:.1f}s)"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def test_criterion_1_rdf_closed_forms():
    t0 = time.perf_counter()
    clear_memo()
    H2 = DistortionSpec.hamming(2)
    worst = 0.0
    for p in np.round(np.arange(0.05, 0.5001, 0.05), 2):
        for D in np.linspace(0, p, 12)[1:-1]:
            r = rdf_value([p, 1 - p], H2, D, memo=False)
            worst = max(worst, abs(r - (binary_entropy(p) - binary_entropy(D))))
    H4 = DistortionSpec.hamming(4)
    worst4 = 0.0
    for D in np.linspace(0.01, 0.74, 30):
        exact = math.log(4) - binary_entropy(D) - D * math.log(3)
        worst4 = max(worst4, abs(rdf_value(np.full(4, 0.25), H4, D, memo=False) - exact))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and worst4 <= 1e-6 and elapsed < 10
    record(1, "RDF closed forms", ok,
           f"binary max err {worst:.1e}, L=4 max err {worst4:.1e}", t0)
    assert ok


def random_interior_sources(count, seed=20240501):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        L = int(rng.integers(2, 4))
        p = rng.dirichlet(np.full(L, 2.0))
        p = 0.85 * p + 0.15 / L
        H = DistortionSpec.hamming(L)
        D = float(rng.uniform(0.05, 0.9) * H.trivial_distortion(p))
        out.append((p, H, D))
    return out


@pytest.mark.slow
def test_criterion_2_dispersion_routes_agree():
    t0 = time.perf_counter()
    worst_d = worst_e = 0.0
    flagged = failures = 0
    for p, H, D in random_interior_sources(20):
        rep = dispersion_report(p, H, D)
        if rep.jump_suspected:
            flagged += 1
            continue
        if rep.v_exponent is None:
            failures += 1
            continue
        worst_d = max(worst_d, abs(rep.v_derivative - rep.v_tilted) / rep.v_tilted)
        worst_e = max(worst_e, abs(rep.v_exponent - rep.v_tilted) / rep.v_tilted)
    elapsed = time.perf_counter() - t0
    ok = worst_d <= 1e-3 and worst_e <= 5e-2 and failures == 0 and flagged < 20 and elapsed < 300
    record(2, "dispersion route agreement", ok,
           f"derivative gap {worst_d:.1e}, exponent gap {worst_e:.1e}, "
           f"{flagged} jump-flagged, {failures} route failures", t0)
    assert ok


def test_criterion_3_special_cases():
    t0 = time.perf_counter()
    errs = []
    # zero distortion: variance of log p
    for p in ([0.2, 0.8], [0.2, 0.3, 0.5], [0.1, 0.2, 0.3, 0.4]):
        p = np.array(p)
        H = DistortionSpec.hamming(p.size)
        errs.append(abs(dispersion_via_derivatives(p, H, 0.0) - var_log(p)))
        errs.append(abs(dispersion_via_tilted(p, H, 0.0)[0] - var_log(p)))
    zero_err = max(errs)
    # uniform source under Hamming distortion
    uni = 0.0
    for L in (2, 3, 4):
        u = np.full(L, 1.0 / L)
        H = DistortionSpec.hamming(L)
        for D in (0.05, 0.2, 0.4):
            uni = max(uni, abs(dispersion_via_tilted(u, H, D)[0]),
                      abs(dispersion_via_derivatives(u, H, D)))
    # plateau below D0 for difference measures
    plateau = 0.0
    p = np.array([0.2, 0.3, 0.5])
    for profile in ([0, 1, 4], [0, 2, 1]):
        d = DistortionSpec.difference(profile)
        d0 = estimate_d0(p, d)
        for D in (0.25 * d0, 0.5 * d0, 0.9 * d0):
            plateau = max(plateau, abs(dispersion_via_tilted(p, d, D)[0] - var_log(p)),
                          abs(dispersion_via_derivatives(p, d, D) - var_log(p)))
    ok = zero_err <= 1e-4 and uni <= 1e-8 and plateau <= 1e-4
    record(3, "special cases", ok,
           f"D=0 err {zero_err:.1e}, uniform |V| {uni:.1e}, plateau err {plateau:.1e}", t0)
    assert ok


def test_criterion_4_gaussian_closed_forms():
    t0 = time.perf_counter()
    spec = GaussianSpec(1.0, 0.25, 0.05)
    rdf_err = abs(gaussian_rdf(spec) - 0.5 * math.log(4.0))
    scaled_err = abs(gaussian_rdf(GaussianSpec(4.0, 1.0)) - math.log(2.0))
    exp_err = abs(gaussian_exponent(spec, gaussian_rdf(spec) + 0.1) - (math.exp(0.2) - 1.2) / 2)
    deltas = np.array([0.005, 0.01, 0.02, 0.04])
    values = np.array([gaussian_exponent(spec, gaussian_rdf(spec) + t) for t in deltas])
    V = fit_exponent_curvature(deltas, values)
    ok = max(rdf_err, scaled_err) <= 4 * np.finfo(float).eps and exp_err <= 1e-15 \
        and abs(V - 0.5) <= 0.005
    record(4, "Gaussian closed forms", ok,
           f"RDF err {max(rdf_err, scaled_err):.1e}, exponent err {exp_err:.1e}, fitted V {V:.6f}", t0)
    assert ok


@pytest.mark.slow
def test_criterion_5_oracle_redundancy_converges():
    t0 = time.perf_counter()
    p = np.array([0.2, 0.8])
    H = DistortionSpec.hamming(2)
    D, eps = 0.05, 0.05
    V = dispersion_via_tilted(p, H, D)[0]
    z = q_inverse(eps)
    devs = []
    for n in (100, 1000, 10000):
        dr = rate_redundancy_oracle(p, H, D, eps, n)
        devs.append(abs(dr * math.sqrt(n / V) - z))
    elapsed = time.perf_counter() - t0
    decreasing = all(b < a for a, b in zip(devs, devs[1:]))
    ok = devs[-1] <= 0.05 and decreasing and elapsed < 600
    record(5, "oracle redundancy convergence", ok,
           "deviations " + ", ".join(f"{d:.4f}" for d in devs), t0)
    assert ok


def test_criterion_6_atypical_type_bound():
    t0 = time.perf_counter()
    rows = []
    for p in ([0.2, 0.8], [0.5, 0.5]):
        for n in (16, 64, 256, 1024, 4096):
            chk = lemma2_check(p, n)
            rows.append(chk.holds)
    elapsed = time.perf_counter() - t0
    ok = all(rows) and elapsed < 60
    record(6, "atypical-type probability bound", ok, f"{sum(rows)}/{len(rows)} cases hold", t0)
    assert ok


def test_criterion_7_gaussian_bracket():
    t0 = time.perf_counter()
    ns = np.unique(np.rint(np.logspace(2, 4, 25)).astype(int))
    slopes = []
    order_ok = True
    for eps in (0.01, 0.05, 0.2):
        spec = GaussianSpec(1.0, 0.25, eps)
        ach = np.array([gaussian_achievable_rate(spec, n) for n in ns])
        nor = np.array([gaussian_normal_approx(spec, n) for n in ns])
        con = np.array([gaussian_converse_rate(spec, n) for n in ns])
        order_ok &= bool(np.all(ach >= nor) and np.all(nor >= con - 1e-12))
        X = np.column_stack([np.log(ns) / ns, 1.0 / ns])
        slopes.append(np.linalg.lstsq(X, ach - nor, rcond=None)[0][0])
    elapsed = time.perf_counter() - t0
    ok = order_ok and all(abs(s - 2.5) <= 0.25 for s in slopes) and elapsed < 60
    record(7, "Gaussian finite-n bracket", ok,
           "slopes " + ", ".join(f"{s:.3f}" for s in slopes) + f", ordering {order_ok}", t0)
    assert ok


@pytest.mark.slow
def test_criterion_8_codebook_sandwich():
    t0 = time.perf_counter()
    H = DistortionSpec.hamming(2)
    D, eps = 0.25, 0.1
    problems = []
    worst_excess = 0.0
    for p in ([0.5, 0.5], [0.3, 0.7], [0.2, 0.8]):
        for n in range(4, 13):
            conv = lab.converse_rate_bound(p, H, n, D, eps)
            greedy = lab.greedy_cover_code(p, H, n, D, eps)
            if conv > greedy.rate + 1e-12:
                problems.append(f"converse above greedy at n={n}, p={p}")
            if n <= 4:
                exact = lab.exact_min_code(p, H, n, D, eps)
                if not conv - 1e-12 <= exact.rate <= greedy.rate + 1e-12:
                    problems.append(f"exact code out of order at n={n}, p={p}")
            dr = lab.union_recipe_redundancy(p, H, n, D, eps)
            union = lab.type_union_code(p, H, n, D, dr)
            excess = lab.coverage(p, H, union, D).excess_probability
            worst_excess = max(worst_excess, excess)
            if excess > eps:
                problems.append(f"union code excess {excess:.3g} at n={n}, p={p}")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 900
    record(8, "codebook sandwich", ok,
           f"worst union-code excess {worst_excess:.4f}" + ("; " + "; ".join(problems) if problems else ""),
           t0)
    assert ok


def _cli(args):
    res = subprocess.run([sys.executable, "-m", "ratedisp", *args], capture_output=True, check=True)
    return res.stdout


def test_criterion_9_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    src = tmp_path / "s.json"
    src.write_text('{"probs": [0.2, 0.8], "distortion": {"kind": "hamming"}}')
    runs = [
        ["curve", "--source", str(src), "-D", "0.05", "--eps", "0.05", "--nmin", "100",
         "--nmax", "1000", "--geom", "10", "--oracle"],
        ["gaussian", "--var", "1", "--D", "0.25", "--eps", "0.05", "--nmin", "100", "--nmax", "10000"],
        ["dispersion", "--source", str(src), "--distortion", "hamming", "-D", "0.05",
         "--routes", "tilted,derivative"],
        ["codebook", "--probs", "0.3,0.7", "-D", "0.25", "--eps", "0.1", "--n", "10",
         "--coverage", "monte_carlo", "--seed", "12345", "--samples", "100000"],
    ]
    same = [_cli(a) == _cli(a) for a in runs]
    ok = all(same)
    record(9, "CLI determinism", ok, f"{sum(same)}/{len(same)} commands byte-identical", t0)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
