"""The twelve acceptance criteria, each at its stated size, tolerance and time budget."""
import math
import time

import mpmath
import numpy as np
import pytest

from arnoldlab import circle, roof
from arnoldlab.circle import CirclePoint
from arnoldlab.harness import SHEAR_ROOF, SuiteConfig, resolve_alpha, resolve_roof, run_suite
from arnoldlab.numeration import classify_alpha, golden, make_D_alpha, silver

pytestmark = pytest.mark.acceptance


def run(suite, **cfg):
    t = time.perf_counter()
    report = run_suite(SuiteConfig(suites=[suite], **cfg))
    return report, time.perf_counter() - t


def hard_ok(report):
    return report.hard_failures == 0 and all(c.verdict in ("pass", "reported") for c in report.checks)


def test_01_convergent_inequality(verdict):
    fixtures = [f"random:seed={i},depth=25,max=10" for i in range(50)] + ["golden", "silver"]
    report, secs = run("convergent-inequality", n_max=25, params={"convergent-inequality": {"fixtures": fixtures}})
    checked = sum(c.outputs["checked"] for c in report.checks)
    # independent: the same inequality for golden and silver in 300-bit floats
    with mpmath.workprec(300):
        for cf, alpha in ((golden(40), (mpmath.sqrt(5) - 1) / 2), (silver(30), mpmath.sqrt(2) - 1)):
            for n in range(1, 26):
                q, Q = cf.q[n], cf.q[n + 1]
                v = abs(q * alpha - mpmath.nint(q * alpha))
                assert 1 / mpmath.mpf(q + Q) < v < 1 / mpmath.mpf(Q)
    ok = hard_ok(report) and len(report.checks) == 52 and secs < 10
    verdict(1, "convergent inequality", ok, f"{checked} (alpha, n) checks, 0 violations required, {secs:.1f}s < 10s")
    assert ok


def test_02_ostrowski(verdict):
    fixtures = ["golden", "silver", "random:seed=1,depth=40,max=3", "random:seed=2,depth=30,max=10",
                "cf:3,1,4,1,5,9,2,6,5,3,5", "D_alpha:seed=0,depth=40,boost=4"]
    report, secs = run("ostrowski", params={"ostrowski": {"fixtures": fixtures, "m_max": 10**5, "m_brute": 10**4}})
    rt = report.records("ostrowski", "round-trip")
    ok = hard_ok(report) and len(rt) == 6 and secs < 30
    verdict(2, "Ostrowski round trip and uniqueness", ok, f"6 fixtures x 1e5, brute force 1e4, {secs:.1f}s < 30s")
    assert ok


def test_03_denjoy_koksma(verdict):
    report, secs = run("denjoy-koksma", n_max=20, samples={"denjoy-koksma": 100},
                       params={"denjoy-koksma": {"fixtures": ["golden", "random:seed=7,depth=40,max=2"]}})
    worst = {c.name: max(r.outputs["worst"] for r in report.records("denjoy-koksma", c.name)) for c in report.checks}
    ok = hard_ok(report) and secs < 20
    verdict(3, "classical Denjoy-Koksma", ok,
            f"worst |dev|: identity {worst['identity']:.3f} <= 1, staircase {worst['staircase']:.3f} <= 4/3, {secs:.1f}s < 20s")
    assert ok


def test_04_three_distance(verdict):
    fixtures = ["golden", "silver"] + [f"random:seed={i},depth=40,max=2" for i in range(8)]
    report, secs = run("three-distance", n_max=20, samples={"three-distance": 100},
                       params={"three-distance": {"fixtures": fixtures}})
    ok = hard_ok(report) and len(report.checks) == 10 and secs < 30
    lo = min(c.outputs["min_gap_ratio"] for c in report.checks)
    hi = max(c.outputs["max_gap_ratio"] for c in report.checks)
    verdict(4, "three-distance gaps", ok, f"min 2q*gap {lo:.3f} >= 1, max q*gap/2 {hi:.3f} <= 1, {secs:.1f}s < 30s")
    assert ok


def test_05_distance_estimate(verdict):
    report, secs = run("distance-estimate", samples={"distance-estimate": 1000},
                       params={"distance-estimate": {"fixtures": ["golden", "silver", "random:seed=3,depth=40,max=5"],
                                                     "orders": [4, 10, 16]}})
    worst = max(c.outputs["worst_ratio"] for c in report.checks)
    ok = hard_ok(report) and len(report.checks) == 9 and secs < 60
    verdict(5, "distance estimate", ok, f"9 x 1000 pairs, worst d_k / (5/(6q)) = {worst:.3f}, {secs:.1f}s < 60s")
    assert ok


def test_06_flow(verdict):
    report, secs = run("flow", samples={"flow": 100}, params={"flow": {"special_n_max": 15}})
    ok = hard_ok(report) and len(report.checks) == 3 and secs < 60
    verdict(6, "flow identity, group law, special return", ok, f"100 points each, {secs:.1f}s < 60s")
    assert ok


def test_07_measure_preservation(verdict):
    report, secs = run("measure-preservation", samples={"measure-preservation": 10_000})
    out = report.checks[0].outputs
    ok = out["meets_criterion"] and report.checks[0].inputs["t"] == pytest.approx(math.pi * math.e) and secs < 60
    verdict(7, "measure preservation at t = pi e", ok,
            f"KS p = {out['ks_p']:.3f}, chi2 p = {out['chi2_p']:.3f} (>= 0.01), {secs:.1f}s < 60s")
    assert ok


def test_08_singular_denjoy_koksma(verdict):
    report, secs = run("denjoy-koksma-singular", samples={"denjoy-koksma-singular": 500})
    out = report.checks[0].outputs
    ok = out["meets_criterion"] and math.isfinite(out["C_emp"]) and secs < 120
    verdict(8, "singular Denjoy-Koksma shape", ok,
            f"C_emp = {out['C_emp']:.3f}, half-sample spread {out['relative_spread']:.1%} <= 20%, {secs:.1f}s < 120s")
    assert ok


def test_09_derivative_window(verdict):
    # the criterion verbatim: f'^(m)/(m log m) in [A- - A+ - eps^2, A- - A+ + eps^2]
    f = resolve_roof(SHEAR_ROOF)
    cf = golden(40)
    eps, n, count = 0.1, 20, 300
    q, Q = cf.q[n], cf.q[n + 1]
    assert q >= 10**4
    lo, hi = math.ceil(eps**4 * q), Q // 8
    rng = np.random.default_rng(9)
    target = f.A_minus - f.A_plus
    ratios = []
    t = time.perf_counter()
    while len(ratios) < count:
        x = CirclePoint.random(rng)
        if circle.set_membership(x, "Sigma_n", cf, n, {"M": "1/8"}):
            continue
        m = int(rng.integers(lo, hi + 1))
        d = roof.birkhoff_derivative_sum(f, x, m, cf)
        ratios.append(d.value / (m * math.log(m)))
    secs = time.perf_counter() - t
    r = np.array(ratios)
    verbatim = float(np.mean(np.abs(r - target) <= eps**2))
    mirrored = float(np.mean(np.abs(-r - target) <= eps**2))
    ok = verbatim >= 0.9 and secs < 120
    verdict(9, "derivative Birkhoff window", ok,
            f"in window {verbatim:.1%} (needs 90%); sign-flipped {mirrored:.1%}; median ratio {np.median(r):.3f}, "
            f"target {target:.2f} +- {eps**2:.2f}, {secs:.1f}s < 120s")
    assert ok


def test_10_small_shearing(verdict):
    cf = resolve_alpha("D_alpha:seed=0,depth=40,boost=4")
    order = 12
    assert cf.q[order + 1] / cf.q[order] >= 50
    report, secs = run("small-shearing", roof=SHEAR_ROOF, samples={"small-shearing": 100},
                       params={"small-shearing": {"order": order, "zeta": 0.05}})
    rate = report.records("small-shearing", "success-rate")[0].outputs["success_rate"]
    oracle = report.records("small-shearing", "oracle")[0]
    ok = rate >= 0.8 and oracle.verdict == "pass" and secs < 300
    verdict(10, "small shearing", ok,
            f"success {rate:.0%} (>= 80%), oracle mismatches {oracle.outputs['mismatches']}, {secs:.1f}s < 300s")
    assert ok


def test_11_large_shearing(verdict):
    cf = resolve_alpha("D_alpha:seed=0,depth=40,boost=4")
    assert cf.q[13] >= 10**4
    report, secs = run("large-shearing", roof=SHEAR_ROOF, samples={"large-shearing": 100},
                       params={"large-shearing": {"order": 13, "class": "type_I"}})
    b = report.records("large-shearing", "bounds")[0].outputs
    st = report.records("large-shearing", "straddle")[0]
    ok = (b["upper_fraction"] == 1.0 and b["lower_fraction"] >= 0.9 and st.verdict == "pass"
          and report.records("large-shearing", "two-way")[0].verdict == "pass" and secs < 300)
    verdict(11, "large shearing", ok,
            f"upper {b['upper_fraction']:.0%}, lower {b['lower_fraction']:.0%}, max |I| {st.outputs['max_straddle']}, "
            f"Delta in [{b['delta_min']:.2f}, {b['delta_max']:.2f}] vs [{b['d1']}, {b['d2_log_q']:.2f}], {secs:.1f}s < 300s")
    assert ok


def test_12_diophantine(verdict):
    t = time.perf_counter()
    g = golden(42)
    golden_fails = all(not classify_alpha(g, "D3", d).passed for d in range(1, 41))
    cf = make_D_alpha(0, 42)
    d2, d3 = classify_alpha(cf, "D2", 40), classify_alpha(cf, "D3", 40)
    d1 = classify_alpha(cf, "D1", 40)
    # independent recomputation of the D1 increments across the sparse indices
    q = cf.q
    incs = [1 / math.log(q[n]) ** 0.875 for n in d1.witness]
    monotone = all(b <= a for a, b in zip(incs, incs[1:]))
    assert incs and all(q[n + 1] >= q[n] * math.log(q[n]) ** 0.875 for n in d1.witness)
    secs = time.perf_counter() - t
    ok = golden_fails and d2.passed and d3.passed and d1.passed and monotone and secs < 5
    verdict(12, "Diophantine classifier", ok,
            f"golden D3 fails at all depths: {golden_fails}; D_alpha D2 {d2.passed}, D3 {d3.passed}, "
            f"D1 increments non-increasing over {len(incs)} sparse indices: {monotone}, {secs:.2f}s < 5s")
    assert ok
