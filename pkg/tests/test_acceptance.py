"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
with its measured figures at the pinned tolerances."""

import csv
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import beta as beta_dist

from martinpot import (
    Ball,
    BallSpec,
    Complement,
    Halfspace,
    Intersection,
    LogPowerProfile,
    Thorn,
    PowerProfile,
    ball_green,
    ball_martin_kernel,
    estimate_exit_time,
    estimate_harmonic_measure,
    estimate_martin_kernel,
    exit_samples,
    exit_time_constant,
    growth_probe,
    harmonicity_check,
    locate_thorn_flip,
    make_stable,
    poisson_normalization,
    reduction_identity_check,
    stable_levy_constant,
    thorn_finite_test,
    thorn_infinity_test,
)
from martinpot.cli import main as cli_main
from martinpot.thinness import locality_experiment


def _report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} failed: {detail}"


def _vec_martin_kernel(ball, z, x0, alpha, d):
    z = np.asarray(z, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    r2 = ball.radius**2

    def kernel(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        num = (r2 - np.sum(pts**2, axis=1)) ** (alpha / 2.0)
        num /= np.linalg.norm(pts - z, axis=1) ** d
        den = (r2 - float(np.sum(x0**2))) ** (alpha / 2.0)
        den /= float(np.linalg.norm(x0 - z)) ** d
        return num / den

    return kernel


def test_criterion_01_oracle_consistency():
    worst_norm, worst_bin, worst_time = 0.0, 0.0, 0.0
    for d in (2, 3):
        for alpha in (0.5, 1.0, 1.5):
            t0 = time.time()
            spec = make_stable(alpha, d)
            ball = BallSpec((0.0,) * d, 1.0, alpha, d)
            worst_norm = max(
                worst_norm, abs(poisson_normalization(ball, np.zeros(d)) - 1.0)
            )
            pts, _, trunc = exit_samples(
                spec, Ball((0.0,) * d, 1.0), np.zeros(d), 1_000_000,
                seed=101, workers=4,
            )
            assert not trunc.any()
            radii = np.linalg.norm(pts, axis=1)
            # 20 radial bins of equal oracle mass, from the exit radial law
            qs = np.linspace(0.0, 1.0, 21)[1:-1]
            ppf = beta_dist.ppf(qs, alpha / 2.0, 1.0 - alpha / 2.0)
            edges = np.concatenate([[1.0], 1.0 / np.sqrt(ppf[::-1]), [np.inf]])
            hist, _ = np.histogram(radii, bins=edges)
            emp = hist / len(radii)
            worst_bin = max(worst_bin, float(np.max(np.abs(emp / 0.05 - 1.0))))
            worst_time = max(worst_time, time.time() - t0)
    ok = worst_norm < 1e-3 and worst_bin < 0.03 and worst_time < 120.0
    _report(
        1, ok,
        f"|norm-1| <= {worst_norm:.2e}, sup bin rel err {worst_bin:.4f}, "
        f"max {worst_time:.1f}s per (d,alpha)",
    )


def test_criterion_02_exit_time_oracle():
    worst = 0.0
    for alpha in (0.5, 1.0, 1.5):
        spec = make_stable(alpha, 2)
        for x, prof in [((0.0, 0.0), 1.0), ((0.5, 0.0), 0.75 ** (alpha / 2.0))]:
            est = estimate_exit_time(
                spec, Ball((0.0, 0.0), 1.0), x, 1_000_000, seed=7, workers=4
            )
            oracle = exit_time_constant(2, alpha) * prof
            worst = max(worst, abs(est.value / oracle - 1.0))
    # uniform lower-bound constant: E_x tau_B(0,r) * psi0(1/r) is a
    # positive constant across r at proportional interior points
    ratio_spread, c_min = 1.0, math.inf
    for alpha in (0.5, 1.0, 1.5):
        spec = make_stable(alpha, 2)
        scaled = []
        for r in (0.1, 1.0, 10.0):
            est = estimate_exit_time(
                spec, Ball((0.0, 0.0), r), (r / 2.0, 0.0), 200_000,
                seed=8, workers=4,
            )
            scaled.append(est.value * spec.psi0(1.0 / r))
        ratio_spread = max(ratio_spread, max(scaled) / min(scaled))
        c_min = min(c_min, min(scaled))
    ok = worst < 0.01 and ratio_spread < 1.02 and c_min > 0.1
    _report(
        2, ok,
        f"worst rel err {worst:.4f}, scaled-constant spread {ratio_spread:.4f}, "
        f"uniform c >= {c_min:.3f}",
    )


def test_criterion_03_levy_system_identity():
    d, alpha = 2, 1.0
    spec = make_stable(alpha, d)
    ball = BallSpec((0.0, 0.0), 1.0, alpha, d)
    A = stable_levy_constant(d, alpha)

    def ring(rho, s):
        f = lambda th: A * (rho * rho + s * s - 2 * rho * s * math.cos(th)) ** (
            -(d + alpha) / 2.0
        )
        v, _ = integrate.quad(f, 0.0, 2.0 * math.pi, epsrel=1e-9, limit=200)
        return v

    def lam(rho):
        v, _ = integrate.quad(
            lambda s: s * ring(rho, s), 1.5, 3.0, epsrel=1e-8, limit=200
        )
        return v

    def integrand(rho):
        g = ball_green(ball, np.zeros(2), np.array([rho, 0.0]))
        return rho * g * lam(rho)

    quad_val, _ = integrate.quad(integrand, 0.0, 1.0, epsrel=1e-7, limit=200)
    quad_val *= 2.0 * math.pi

    target = Intersection(
        (Ball((0.0, 0.0), 3.0), Complement(Ball((0.0, 0.0), 1.5)))
    )
    est = estimate_harmonic_measure(
        spec, Ball((0.0, 0.0), 1.0), (0.0, 0.0), target, 1_000_000,
        seed=23, workers=4,
    )
    rel = abs(est.value / quad_val - 1.0)
    ok = rel < 0.02
    _report(3, ok, f"MC {est.value:.5f} vs quadrature {quad_val:.5f}, rel {rel:.4f}")


def test_criterion_04_martin_kernel_limit():
    spec = make_stable(1.0, 2)
    D = Ball((0.0, 0.0), 1.0)
    ball = BallSpec((0.0, 0.0), 1.0, 1.0, 2)
    x0 = np.zeros(2)
    probes = [(0.3, 0.0), (-0.2, 0.4)]
    worst, all_conv, all_mono = 0.0, True, True
    for tz in (np.array([1.0, 0.0]), np.array([0.0, -1.0])):
        base = math.atan2(tz[1], tz[0])
        levels = []
        for h in (0.3, 0.16, 0.09, 0.05):
            ring = [
                (1.0 - h) * np.array(
                    [math.cos(base + da * h), math.sin(base + da * h)]
                )
                for da in (-0.25, -0.08, 0.08, 0.25)
            ]
            levels.append(np.array(ring))
        ests = estimate_martin_kernel(
            spec, D, probes, x0, tz, levels, 800_000, seed=31, workers=4
        )
        for est in ests:
            oracle = ball_martin_kernel(ball, np.array(est.probe), tz, x0)
            worst = max(worst, abs(est.value / oracle - 1.0))
            all_conv = all_conv and est.converged
            ros = [lv["ro"] for lv in est.levels]
            rels = [lv["stderr"] / lv["ratio"] for lv in est.levels]
            all_mono = all_mono and all(
                ros[j + 1] <= ros[j] + 2.0 * (rels[j] + rels[j + 1])
                for j in range(len(ros) - 1)
            )
    ok = worst < 0.05 and all_conv and all_mono
    _report(
        4, ok,
        f"worst rel err {worst:.4f}, all converged {all_conv}, "
        f"RO nonincreasing within slack {all_mono}",
    )


def test_criterion_05_harmonicity():
    spec = make_stable(1.0, 2)
    D = Ball((0.0, 0.0), 1.0)
    ball = BallSpec((0.0, 0.0), 1.0, 1.0, 2)
    kernel = _vec_martin_kernel(ball, (0.0, 1.0), np.zeros(2), 1.0, 2)
    worst = 0.0
    for U, x in [
        (Ball((0.0, 0.0), 0.5), (0.1, 0.1)),
        (Ball((0.2, -0.1), 0.3), (0.2, -0.1)),
    ]:
        rep = harmonicity_check(
            spec, D, kernel, U, x, 100_000, seed=37, workers=4,
            singularity=(0.0, 1.0),
        )
        worst = max(worst, rep["residual_sigmas"])
    ok = worst <= 3.0
    _report(5, ok, f"max mean-value residual {worst:.2f} sigma")


def test_criterion_06_thorn_thresholds():
    t0 = time.time()
    spec = make_stable(1.0, 3)
    v_div = thorn_infinity_test(spec, LogPowerProfile(0.2)).verdict
    v_conv = thorn_infinity_test(spec, LogPowerProfile(0.5)).verdict
    lo, hi = locate_thorn_flip(spec, LogPowerProfile, 0.15, 0.6)
    mid = 0.5 * (lo + hi)
    elapsed = time.time() - t0
    ok = (
        v_div == "divergent"
        and v_conv == "convergent"
        and abs(mid - 1.0 / 3.0) < 0.1
        and elapsed < 10.0
    )
    _report(
        6, ok,
        f"beta=0.2 {v_div}, beta=0.5 {v_conv}, flip bracket "
        f"[{lo:.3f}, {hi:.3f}] around 1/3, {elapsed:.1f}s",
    )


def test_criterion_07_kappa_fat_growth():
    spec = make_stable(1.0, 2)
    h = Halfspace((0.0, 1.0), 0.0)
    rep = growth_probe(
        spec, h, (0.0, 1.0), [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        20_000, seed=5, workers=4, max_steps=2000,
    )
    partials = rep.partials
    # ratios across the five radius doublings 2->4->...->64
    doublings = [partials[k + 1] / partials[k] for k in range(1, 6)]
    ball_rep = growth_probe(
        spec, Ball((0.0, 0.0), 1.0), (0.0, 0.3),
        [0.0, 0.125, 0.25, 0.5, 1.0, 2.0], 20_000, seed=5, workers=4,
    )
    ok = min(doublings) >= 1.3 and ball_rep.verdict == "convergent"
    _report(
        7, ok,
        f"halfspace doubling ratios {[round(r, 3) for r in doublings]}, "
        f"ball probe {ball_rep.verdict}",
    )


def test_criterion_08_reduction_identity():
    spec = make_stable(1.0, 2)
    D = Ball((0.0, 0.0), 1.0)
    E = Intersection([D, Halfspace((1.0, 0.0), -0.2)])
    F = Ball((0.4, 0.0), 0.15)
    ball = BallSpec((0.0, 0.0), 1.0, 1.0, 2)
    pole = np.array([0.1, -0.4])

    def u(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts))
        inside = D.contains(pts)
        if inside.any():
            out[inside] = ball_green(ball, pole, pts[inside])
        return out

    probes = [(0.1, 0.2), (-0.1, 0.1), (0.35, -0.1)]
    worst = 0.0
    for seed in (7, 19, 43):
        res = reduction_identity_check(
            spec, D, E, F, u, probes, n=3000, seed=seed, dt=1e-3, horizon=20.0
        )
        worst = max(worst, max(r["residual_sigmas"] for r in res))
    ok = worst <= 3.0
    _report(8, ok, f"max matched-stream residual {worst:.2f} sigma over 3x3 runs")


def test_criterion_09_locality():
    spec = make_stable(1.0, 2)
    D = Halfspace((1.0, 0.0), 0.0)
    E = Intersection([D, Halfspace((-1.0, 0.0), -2.0)])  # slab {0 < x1 < 2}
    F = Thorn(PowerProfile(3.0), 2, lo=0.0, hi=0.8)  # spike at the origin
    probes = [(0.5, 0.5), (1.0, -0.4)]
    verdict_pairs, all_agree = [], True
    for seed in (11, 29, 57):
        res = locality_experiment(
            spec, D, E, F, (0.0, 0.0), probes, (1.0, 0.5), (0.05, 0.03),
            match_radius=1.5, seed=seed, n=4000, kernel_n=4000, dt=1e-3,
        )
        pair = (res["in_full"].verdict, res["in_sub"].verdict)
        verdict_pairs.append(pair)
        all_agree = all_agree and res["agree"]
        opposite = {"thin", "not-thin"} <= set(pair)
        assert not opposite, f"confident opposite verdicts {pair} at seed {seed}"
    _report(9, all_agree, f"paired verdicts {verdict_pairs}")


def test_criterion_10_determinism(tmp_path):
    domain = '{"type":"ball","center":[0,0],"r":1}'
    base = ["simulate", "--op", "green", "--alpha", "1", "--d", "2",
            "--domain", domain, "--x", "0.3,0.1", "--y=-0.2,0.4",
            "--n", "50000", "--seed", "13"]
    paths = [tmp_path / n for n in ("a.csv", "b.csv", "w4.csv")]
    assert cli_main(base + ["--workers", "1", "--out", str(paths[0])]) == 0
    assert cli_main(base + ["--workers", "1", "--out", str(paths[1])]) == 0
    assert cli_main(base + ["--workers", "4", "--out", str(paths[2])]) == 0

    def payload(p):
        # wall-clock is the one timestamp-like column outside the contract
        with open(p) as fh:
            return [
                {k: v for k, v in row.items() if k != "wall_ms"}
                for row in csv.DictReader(fh)
            ]

    rerun_identical = payload(paths[0]) == payload(paths[1])
    workers_identical = payload(paths[0]) == payload(paths[2])

    out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
    assert cli_main(["schedule", "--eta", "0.1", "--C", "2", "--out", str(out1)]) == 0
    assert cli_main(["schedule", "--eta", "0.1", "--C", "2", "--out", str(out2)]) == 0
    schedule_identical = out1.read_bytes() == out2.read_bytes()

    ok = rerun_identical and workers_identical and schedule_identical
    _report(
        10, ok,
        f"rerun identical {rerun_identical}, worker-count invariant "
        f"{workers_identical}, schedule bytes identical {schedule_identical}",
    )
