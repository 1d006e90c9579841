from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from arnoldlab import circle
from arnoldlab.circle import CirclePoint, TernaryOrder
from arnoldlab.errors import DomainError, IndeterminateError, PrecisionError
from arnoldlab.harness import random_cf
from arnoldlab.numeration import golden, silver

PREC = 256


def mp_alpha(cf):
    # alpha from the tailed quotient list, evaluated far past the stored depth
    cf = cf.extend(cf.depth + 200)
    with mpmath.workprec(PREC):
        x = mpmath.mpf(0)
        for a in reversed(cf.quotients):
            x = 1 / (a + x)
        return x


def mp_frac(v):
    return v - mpmath.floor(v)


def mp_norm(v):
    v = mp_frac(v)
    return min(v, 1 - v)


def test_from_fraction_exact_and_inexact():
    assert CirclePoint.from_fraction(Fraction(1, 4)) == CirclePoint(1 << 62, 0, 64)
    third = CirclePoint.from_fraction(Fraction(1, 3))
    assert third.err == 1
    assert third.fraction() <= Fraction(1, 3) <= third.fraction() + Fraction(1, 1 << 64)


def test_point_rejects_bad_input():
    with pytest.raises(DomainError):
        CirclePoint(1 << 64, 0, 64)
    with pytest.raises(DomainError):
        CirclePoint(0, -1, 64)


def test_widening_is_exact_and_narrowing_adds_one_ulp():
    p = CirclePoint(12345, 3, 64)
    wide = p.at(128)
    assert (wide.value, wide.err) == (12345 << 64, 3 << 64)
    assert wide.at(64) == CirclePoint(12345, 4, 64)


def test_dict_round_trip_keeps_point_inside_bound():
    p = CirclePoint.random(np.random.default_rng(5))
    back = CirclePoint.from_dict(p.to_dict())
    assert abs(back.value - p.value) <= back.err + 1


@pytest.mark.parametrize("cf", [golden(40), silver(30), random_cf(11)])
@pytest.mark.parametrize("bits", [64, 192])
def test_rotate_brackets_high_precision_orbit(cf, bits):
    rng = np.random.default_rng(bits)
    alpha = mp_alpha(cf)
    for _ in range(40):
        x = CirclePoint.random(rng, bits)
        j = int(rng.integers(-10**6, 10**6))
        y = circle.rotate(x, j, cf)
        with mpmath.workprec(PREC):
            exact = mp_frac(mpmath.mpf(x.value) / 2**bits + j * alpha) * 2**bits
            gap = abs(exact - y.value)
            assert min(gap, 2**bits - gap) <= y.err


def test_ternary_compare():
    half = 1 << 63
    assert circle.compare_fixed(half + 10, 5, 64, Fraction(1, 2)) is TernaryOrder.GREATER
    assert circle.compare_fixed(half - 10, 5, 64, Fraction(1, 2)) is TernaryOrder.LESS
    assert circle.compare_fixed(half + 5, 5, 64, Fraction(1, 2)) is TernaryOrder.INDETERMINATE
    with pytest.raises(IndeterminateError):
        circle.certain(TernaryOrder.INDETERMINATE)


def test_log_radius_threshold_brackets():
    thr = circle.log_radius(1, 0.875, 1000)
    r, slack = circle.threshold_floor(thr, 64)
    with mpmath.workprec(PREC):
        exact = mpmath.mpf(2) ** 64 / (1000 * mpmath.log(1000) ** mpmath.mpf(0.875))
    assert r <= exact <= r + slack


def test_retry_doubles_precision_until_resolved():
    seen = []

    @circle.retry_precision
    def needs_256(*, bits):
        seen.append(bits)
        if bits < 256:
            raise PrecisionError("not yet")
        return bits

    assert needs_256() == 256
    assert seen == [64, 128, 256]
    with pytest.raises(PrecisionError):
        needs_256(max_bits=128)


def brute_d_k(x, y, cf, n):
    alpha = mp_alpha(cf)
    q = cf.q[n]
    with mpmath.workprec(PREC):
        diff = mpmath.mpf(x.value - y.value) / 2**x.bits
        best = min(range(-(q - 1), q), key=lambda j: (mp_norm(diff - j * alpha), abs(j), j < 0))
        return mp_norm(diff - best * alpha), best


@pytest.mark.parametrize("cf", [golden(40), silver(30), random_cf(4, max_quotient=5)])
def test_d_k_matches_brute_force(cf):
    rng = np.random.default_rng(1)
    for n in [n for n in (3, 6, 9) if cf.q[n] <= 1000]:
        for _ in range(25):
            x, y = CirclePoint.random(rng), CirclePoint.random(rng)
            od = circle.d_k(x, y, cf, n)
            exact, j0 = brute_d_k(x, y, cf, n)
            assert od.j0 == j0
            with mpmath.workprec(PREC):
                assert abs(mpmath.mpf(od.distance.value) / 2**64 - exact) <= mpmath.mpf(od.distance.err + 1) / 2**64


def test_d_k_of_orbit_point_contains_zero():
    cf = golden(40)
    x = CirclePoint.random(np.random.default_rng(2))
    y = circle.rotate(x, -17, cf)
    od = circle.d_k(x, y, cf, 10)
    assert od.j0 == 17 and od.distance.contains_zero()


def test_d_k_index_agrees_with_scan():
    cf = silver(30)
    rng = np.random.default_rng(3)
    for _ in range(200):
        x, y = CirclePoint.random(rng), CirclePoint.random(rng)
        fast = circle.d_k.unwrapped(x, y, cf, 8, bits=64)
        slow = circle.d_k.unwrapped(x.at(128), y.at(128), cf, 8, bits=128)
        assert fast.j0 == slow.j0
        assert abs((fast.distance.value << 64) - slow.distance.value) <= (fast.distance.err + 1) << 64


def brute_gaps(cf, n):
    alpha = mp_alpha(cf)
    q = cf.q[n]
    with mpmath.workprec(PREC):
        pts = sorted(mp_frac(i * alpha) for i in range(q))
        gaps = [b - a for a, b in zip(pts, pts[1:])] + [1 - pts[-1] + pts[0]]
        return float(min(gaps)), float(max(gaps))


@pytest.mark.parametrize("cf", [golden(40), silver(30), random_cf(8, max_quotient=3)])
def test_spacing_matches_brute_force(cf):
    x = CirclePoint.random(np.random.default_rng(4))
    for n in (2, 5, 8, 11):
        rep = circle.orbit_spacing_check(x, cf, n)
        lo, hi = brute_gaps(cf, n)
        assert float(rep.min_gap) == pytest.approx(lo, rel=1e-12)
        assert float(rep.max_gap) == pytest.approx(hi, rel=1e-12)
        assert rep.ok


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 20), min_size=12, max_size=12), st.integers(2, 11), st.integers(0, 2**64 - 1))
def test_three_distance_property(quotients, n, raw):
    from arnoldlab.numeration import cf_from_quotients

    cf = cf_from_quotients(quotients, tail=1)
    assume(cf.q[n] <= 10**5)
    rep = circle.orbit_spacing_check(CirclePoint(raw, 0, 64), cf, n)
    assert rep.min_ok and rep.max_ok


def test_sigma_membership_by_brute_force():
    cf = golden(40)
    n = 10
    q, Q = cf.q[n], cf.q[n + 1]
    alpha = mp_alpha(cf)
    rng = np.random.default_rng(6)
    for _ in range(40):
        x = CirclePoint.random(rng)
        got = circle.set_membership(x, "Sigma_n", cf, n, {"M": Fraction(1, 8)})
        with mpmath.workprec(PREC):
            v = 1 / (q * mpmath.log(q) ** mpmath.mpf(0.875))
            xv = mpmath.mpf(x.value) / 2**64
            want = any(mp_norm(xv + i * alpha) < v for i in range(Q // 8 + 1))
        assert got == want


def test_sample_clear_draws_are_members():
    cf = golden(40)
    n = 8
    idx = circle.WindowIndex(cf, -cf.q[n], cf.q[n] - 1, circle.log_radius(1, 0.875, cf.q[n]))
    draws = idx.sample_clear(np.random.default_rng(7), 200)
    for v in draws:
        assert circle.set_membership(CirclePoint(int(v), 0, 64), "B_n", cf, n)


def test_badly_approximable_window_counts_hits():
    cf = golden(40)
    # x = 0 is hit by i0 = 0 and nothing else within [0, q_s)
    assert circle.badly_approx_count(CirclePoint(0, 0, 64), cf, 10) == 1
    assert circle.set_membership(CirclePoint(0, 0, 64), "badly_approx_window", cf, 10)
