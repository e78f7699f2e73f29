"""Acceptance criteria at full size.

Each test prints (and records for the terminal summary) one line
``PASS|FAIL criterion k: ...``. Run standalone with
``python3 tests/test_acceptance.py`` to get just those lines.
"""
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from rmtlab import arithmetic, cli, experiments as ex, smallball
from rmtlab.arithmetic import LcdParams
from rmtlab.ensembles import Distribution
from rmtlab.experiments import ExperimentConfig

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

HERE = Path(__file__).parent
RAD = Distribution.rademacher()


def record(k, ok, detail, runtime, budget=None):
    ok = bool(ok) and (budget is None or runtime <= budget)
    limit = f" (budget {budget:g}s)" if budget else ""
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}; runtime {runtime:.1f}s{limit}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_c01_goe_baseline():
    cfg = ExperimentConfig("tail", ensemble={"kind": "gaussian"}, n_list=[100], trials=100_000, seed=7)
    rep, dt = timed(lambda: ex.run(cfg))
    worst = max(r["p_hat"] - (r["epsilon"] + 3 * (r["ci_high"] - r["ci_low"]) / 2) for r in rep.rows)
    record(1, worst <= 0 and not rep.violations,
           f"GOE n=100, 1e5 trials, {len(rep.rows)} eps in [1e-3,1e-1]: "
           f"max(p_hat - eps - 3*CI) = {worst:.3g} <= 0", dt, 600)


def test_c02_rademacher_tail_linearity():
    cfg = ExperimentConfig("tail", n_list=[100], trials=100_000, seed=1)
    rep, dt = timed(lambda: ex.run(cfg))
    f = rep.fitted["n100"]
    ok = 0.8 <= f["slope"] <= 1.2 and f["C_hat"] <= 10
    record(2, ok, f"Rademacher n=100: slope {f['slope']:.3f} +- {f['slope_stderr']:.3f} "
                  f"in [0.8,1.2], C_hat {f['C_hat']:.3f} <= 10", dt, 600)


def test_c03_simple_spectrum():
    cfg = ExperimentConfig("gaps", n_list=[50], trials=10_000, seed=3)
    rep, dt = timed(lambda: ex.run(cfg))
    s = rep.fitted["n50_simple_spectrum"]
    record(3, s["repeated"] == 0,
           f"Rademacher n=50, 1e4 trials: {s['repeated']} samples with min gap < 1e-10 "
           f"(smallest sqrt(n)*gap {s['min_gap_scaled']:.3g})", dt, 120)


def test_c04_repulsion_exponent():
    cfg = ExperimentConfig("gaps", n_list=[50], trials=100_000, seed=2)
    rep, dt = timed(lambda: ex.run(cfg))
    f1, f2 = rep.fitted["n50_ell1"], rep.fitted["n50_ell2"]
    c = f1["C_hat"]
    within = all(r["p_hat"] <= c * r["epsilon"] * (1 + 1e-12) for r in rep.rows if r["ell"] == 1)
    ok = f1["slope"] >= 0.9 and within and c <= 20 and f2["slope"] >= 1.8
    record(4, ok, f"n=50, 1e5 trials: ell=1 slope {f1['slope']:.3f} >= 0.9, p_hat <= C_hat*eps with "
                  f"C_hat {c:.3f} <= 20; ell=2 slope {f2['slope']:.3f} >= 1.8", dt, 900)


def test_c05_local_law():
    cfg = ExperimentConfig("locallaw", n_list=[400], trials=200, seed=3, grid=[0.5, 1.0, 2.0])
    rep, dt = timed(lambda: ex.run(cfg))
    devs = [abs(r["mean_ratio"] / (2 / math.pi) - 1) for r in rep.rows]
    far = sum(r["tail_freq_dev_gt_pi"] for r in rep.rows)
    record(5, max(devs) <= 0.10 and far == 0,
           f"n=400, 200 samples, t in {{0.5,1,2}}: max rel dev from 2/pi {max(devs):.4f} <= 0.10, "
           f"{far} samples with deviation > pi", dt, 300)


def test_c06_spectral_moments():
    cfg = ExperimentConfig("moments", n_list=[50, 100, 200], trials=500, seed=4)
    rep, dt = timed(lambda: ex.run(cfg))
    ratio = rep.fitted["k5"]["max_consecutive_ratio"]
    dist = [r["mean_pow"] for r in rep.rows if r["quantity"].startswith("||")]
    record(6, ratio <= 1.25 and max(dist) <= 5,
           f"n in {{50,100,200}}, k=5: max consecutive ratio {ratio:.3f} <= 1.25; "
           f"max E[||A^-1||_*/mu_1] {max(dist):.3f} <= 5", dt, 600)


def test_c07_distance_identity():
    sizes = [8, 12, 16, 24, 32, 48, 64]
    cfg = ExperimentConfig("distid", n_list=sizes, trials=1000, seed=11, params={"facts_max_size": 0})
    rep, dt = timed(lambda: ex.run(cfg))
    err = rep.fitted["max_abs_err"]
    skipped = sum(r["skipped"] for r in rep.rows)
    record(7, err <= 1e-6, f"n+1 in {sizes}, 1e3 seeds each: max |d_1 - formula| {err:.3g} <= 1e-6 "
                           f"({skipped} singular minors skipped)", dt, 60)


def test_c08_geometric_facts():
    cfg = ExperimentConfig("distid", n_list=[10], trials=1000, seed=12)
    rep, dt = timed(lambda: ex.run(cfg))
    r = rep.rows[0]
    worst = max(r["fact52_max_excess"], r["fact53_max_excess"])
    record(8, r["facts_checked"] and worst <= 1e-8 and not rep.violations,
           f"1e3 random 10x10: max excess sigma_min-bound {r['fact52_max_excess']:.3g}, "
           f"perturbation {r['fact53_max_excess']:.3g} (slack 1e-8)", dt, 60)


def test_c09_decoupling():
    def go():
        g = np.random.default_rng(2024)
        worst, fails = -math.inf, 0
        for n in (4, 6, 8):
            for _ in range(100):
                m = g.standard_normal((n, n))
                M = (m + m.T) / 2
                u = g.standard_normal(n) * g.uniform(0, 1)
                theta = g.uniform(-1, 1)
                J = sorted(g.choice(n, size=g.integers(1, n), replace=False).tolist())
                res = smallball.decoupling_check(RAD, M, u, theta, J)
                worst = max(worst, res.lhs - res.rhs)
                fails += not res.holds
        return worst, fails

    (worst, fails), dt = timed(go)
    record(9, fails == 0, f"n in {{4,6,8}} x 100 instances: {fails} failures, "
                          f"max lhs - rhs {worst:.3g} <= 1e-9", dt, 120)


def test_c10_charfn_bounds():
    laws = [RAD, Distribution.lazy_signed(0.25), Distribution.uniform_pm1_0((1.0, 2.0, 1.0)),
            Distribution.sparse_rademacher(0.3)]

    def go():
        t = np.linspace(0, 10, 1000)
        a = np.linspace(-3, 3, 1000)
        worst = smallball.cosine_bounds_violation(a)
        for d in laws:
            for nu in (2.0**-15, 0.25):
                worst = max(worst, smallball.xi_bounds_check(d, nu, t))
        return worst

    worst, dt = timed(go)
    record(10, worst <= 1e-12, f"xi bounds ({len(laws)} laws x 2 nu) and cosine inequality on "
                               f"1e3-point grids: max violation {worst:.3g}", dt, 1)


def brute_lcd(v, alpha, gamma, cap, step):
    n = len(v)
    phi = np.arange(step, cap, step)[:, None]
    d = np.linalg.norm(phi * v - np.rint(phi * v), axis=1)
    ok = (d <= gamma * phi[:, 0] * np.linalg.norm(v)) & (d <= math.sqrt(alpha * n))
    return float(phi[np.argmax(ok), 0]) if ok.any() else math.inf


def test_c11_lcd_oracle():
    def go():
        errs = []
        e1 = arithmetic.lcd(np.eye(5)[0], LcdParams(0.25, 0.5))
        const = arithmetic.lcd(np.full(4, 0.5), LcdParams(0.25, 0.5))
        errs.append(abs(e1.value - 1 / 1.5))
        errs.append(abs(const.value - 4 / 3))
        g = np.random.default_rng(99)
        bad_witness = disagree = 0
        step, cap, alpha, gamma = 2e-4, 20.0, 0.05, 0.3
        for i in range(100):
            n = 1 + i % 8
            v = g.standard_normal(n)
            v /= np.linalg.norm(v)
            res = arithmetic.lcd(v, LcdParams(alpha, gamma, cap=cap))
            if res.bounded and arithmetic.lcd_condition(v, res.witness_t, alpha, gamma) < -1e-9:
                bad_witness += 1
            ref = brute_lcd(v, alpha, gamma, cap, step)
            if math.isinf(ref):
                disagree += res.bounded and res.value < cap - step
            else:
                disagree += not (ref - step - 1e-9 <= res.value <= ref + 1e-9)
        return max(errs), bad_witness, disagree

    (err, bad, dis), dt = timed(go)
    record(11, err <= 1e-6 and bad == 0 and dis == 0,
           f"closed forms e1 -> 1/(1+gamma), constant 4-vector -> 4/3: max error {err:.2g}; "
           f"{bad} witnesses failing re-verification; {dis}/100 disagreements with dense grid", dt, 60)


def test_c12_smallball_and_invlwo():
    sb = ExperimentConfig("smallball", n_list=[100], trials=100_000, seed=9,
                          params={"vectors": ["constant"]})
    lw = ExperimentConfig("invlwo", n_list=[128], trials=100_000, seed=8, grid=[0.05, 0.1, 0.2])
    (r1, r2), dt = timed(lambda: (ex.run(sb), ex.run(lw)))
    exact_ok = all(r["ci_low"] <= r["exact"] <= r["ci_high"] for r in r1.rows if r["epsilon"] < 0.2)
    worst = max(abs(r["p_hat"] - r["exact"]) for r in r1.rows)
    dec = True
    for e in (0.05, 0.1, 0.2):
        p = [r["p_hat"] for r in r2.rows if r["epsilon"] == e and r["k"] in (2, 4, 8, 16)]
        dec &= all(b < a for a, b in zip(p, p[1:]))
    record(12, exact_ok and dec,
           f"constant vector n=100 vs exact binomial C(100,50)/2^100 within 95% CI "
           f"(max |p_hat - exact| {worst:.2g}); invlwo d=128 strictly decreasing in k at every eps: {dec}",
           dt, 600)


def test_c13_negative_correlation():
    g = ExperimentConfig("negcorr", ensemble={"kind": "gaussian"}, n_list=[64], trials=100_000, seed=6)
    r = ExperimentConfig("negcorr", n_list=[64], trials=100_000, seed=6)
    (rg, rr), dt = timed(lambda: (ex.run(g), ex.run(r)))
    used = [x for x in rg.rows if x["in_fit"]]
    inside = all(x["ratio_ci_low"] <= 1 <= x["ratio_ci_high"] for x in used)
    mx = rr.fitted["n64"]["C_hat_ratio"]
    record(13, inside and len(used) > 0 and mx <= 4,
           f"gaussian orthogonal u,v: 1 inside 3-sigma ratio CI at {len(used)} grid points: {inside}; "
           f"Rademacher n=64 max ratio {mx:.3f} <= 4", dt, 600)


def test_c14_determinism():
    def go():
        mismatched = []
        with tempfile.TemporaryDirectory() as tmp:
            for sub in cli.SUBCOMMANDS:
                conf = str(HERE / "golden" / "configs" / f"{sub}.json")
                outs = []
                for i, threads in enumerate((1, 1, 4, 8)):
                    out = Path(tmp) / f"{sub}{i}"
                    code = cli.main([sub, "--config", conf, "--seed", "7", "--threads", str(threads),
                                     "--out", str(out)])
                    assert code in (0, 2)
                    d = next(out.iterdir())
                    outs.append({p.name: p.read_bytes() for p in d.iterdir()
                                 if p.is_file() and p.name != "manifest.json"})
                if any(o != outs[0] for o in outs[1:]):
                    mismatched.append(sub)
        return mismatched

    mism, dt = timed(go)
    record(14, not mism, f"{len(cli.SUBCOMMANDS)} subcommands x (threads 1, 1, 4, 8): "
                         f"byte-identical outputs; mismatches: {mism or 'none'}", dt)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
