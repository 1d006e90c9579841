from fractions import Fraction

import mpmath
import numpy as np
import pytest

from arnoldlab import circle, shear
from arnoldlab.circle import CirclePoint
from arnoldlab.errors import PreconditionError
from arnoldlab.harness import SHEAR_ROOF, resolve_alpha, resolve_roof, sample_pairs
from arnoldlab.numeration import golden
from arnoldlab.roof import make_roof

F = resolve_roof(SHEAR_ROOF)
D_ALPHA = resolve_alpha("D_alpha:seed=0,depth=40,boost=4")
PREC = 160


def mp_alpha(cf):
    cf = cf.extend(cf.depth + 150)
    with mpmath.workprec(PREC):
        x = mpmath.mpf(0)
        for a in reversed(cf.quotients):
            x = 1 / (a + x)
        return x


def mp_birkhoff_difference(f, x, y, N, cf):
    alpha = mp_alpha(cf)
    with mpmath.workprec(PREC):
        x0 = mpmath.mpf(x.value) / 2**64
        y0 = mpmath.mpf(y.value) / 2**64
        idx = range(N) if N > 0 else range(N, 0)

        def term(base, i):
            u = (base + i * alpha) % 1
            return -f.A_minus * mpmath.log(u) - f.A_plus * mpmath.log(1 - u) + f.g_const

        total = mpmath.fsum(term(x0, i) - term(y0, i) for i in idx)
        return float(total if N > 0 else -total)


@pytest.mark.parametrize("A_minus, A_plus", [(2, 1), (1, 0.5), (0.5, 0.45), (3, 0), (0.3, 0.25)])
def test_H_two_ways(A_minus, A_plus):
    dA = Fraction(A_minus) - Fraction(A_plus)
    want = dA - Fraction(1, 100) if dA >= Fraction(1, 10) else dA * Fraction(9, 10)
    consts = shear.shear_constants(make_roof(A_minus, A_plus, None, normalize=False))
    assert consts.H == want


def test_constants_for_reference_roof():
    c = shear.shear_constants(F)
    assert c.H == Fraction(99, 100)
    assert c.d1 == Fraction(9801, 10000)
    assert c.d2 == Fraction(20396, 10000)
    assert (c.P_low, c.P_high) == (Fraction(495, 100000), Fraction(398, 100))


def test_H_hat_by_brute_force():
    cf = golden(40)
    c = shear.shear_constants(F, cf)
    alpha = mp_alpha(cf)
    kmax = int((2 * c.H + 3) / Fraction(F.a)) + 1
    with mpmath.workprec(PREC):
        norms = [min(k * alpha % 1, 1 - k * alpha % 1) for k in range(1, kmax + 1)]
    want = min([float(c.H / 200)] + [float(v) for v in norms])
    assert c.H_hat == pytest.approx(want, rel=1e-12)


def test_P_helpers():
    c = shear.shear_constants(F)
    assert c.P_distance(1.0) == 0 and c.P_distance(-1.0) == 0
    assert c.P_distance(5.0) == pytest.approx(5.0 - 3.98)
    assert c.P_project(0.001) == pytest.approx(0.00495)
    assert c.P_project(-9.0) == pytest.approx(-3.98)


def brute_class(x, y, cf, n):
    alpha = mp_alpha(cf)
    q, Q = cf.q[n], cf.q[n + 1]
    with mpmath.workprec(PREC):
        diff = mpmath.mpf(x.value - y.value) / 2**64
        d = min(min((diff - j * alpha) % 1, 1 - (diff - j * alpha) % 1) for j in range(-(q - 1), q))
        lq, lQ = 1 / (q * mpmath.log(q)), 1 / (Q * mpmath.log(Q))
        if d <= lQ:
            return "small"
        if mpmath.mpf(5) / (6 * Q) <= d < lq:
            return "close"
        if lq <= d <= mpmath.mpf(5) / (6 * q):
            return "type_I"
        if lQ <= d <= mpmath.mpf(5) / (6 * Q):
            return "type_II"
        return "unclassified"


@pytest.mark.parametrize("cf, n, cls", [
    (golden(40), 9, "small"), (golden(40), 9, "type_I"), (golden(40), 9, "type_II"),
    (D_ALPHA, 12, "close"), (D_ALPHA, 12, "small"),
])
def test_sampled_pairs_match_brute_force_class(cf, n, cls):
    for x, y in sample_pairs(cf, n, cls, 8, seed=1):
        assert shear.classify_pair(x, y, cf, n).pair_class == cls
        assert brute_class(x, y, cf, n) == cls


def test_close_class_can_be_empty():
    # golden: q_10 = 89 < 5/6 * 55 * log 55
    with pytest.raises(PreconditionError):
        sample_pairs(golden(40), 9, "close", 1, seed=0)


def test_same_orbit_pair():
    cf = golden(40)
    x = CirclePoint.random(np.random.default_rng(0))
    rep = shear.classify_pair(x, circle.rotate(x, 5, cf), cf, 9)
    assert rep.pair_class == "same_orbit" and rep.j0 == -5


def test_small_shearing_preconditions():
    x = CirclePoint.random(np.random.default_rng(1))
    with pytest.raises(PreconditionError):
        shear.small_shearing_search(F, x, circle.rotate(x, 3, D_ALPHA), D_ALPHA, 12)
    (x, y), = sample_pairs(D_ALPHA, 12, "type_I", 1, seed=2)
    with pytest.raises(PreconditionError):
        shear.small_shearing_search(F, x, y, D_ALPHA, 12)


@pytest.fixture(scope="module")
def searched():
    pairs = sample_pairs(D_ALPHA, 12, "good", 6, seed=3, y_sets=[("E_n", 12, None)])
    return [(x, y, shear.small_shearing_search(F, x, y, D_ALPHA, 12, 0.05)) for x, y in pairs]


def test_small_shearing_outcomes(searched):
    consts = shear.shear_constants(F)
    wins = [out for _, _, out in searched if out.success]
    assert len(wins) >= 4
    for out in wins:
        assert consts.P_distance(out.p) == 0
        assert out.residual <= 0.05 and 1 <= abs(out.ell0) <= out.ell_cap


def test_small_shearing_against_direct_sum(searched):
    # the two longest sums the high-precision loop can afford
    wins = [(abs(out.ell0) * D_ALPHA.q[out.m], x, y, out) for x, y, out in searched if out.success]
    wins = sorted((w for w in wins if w[0] <= 150_000), key=lambda w: -w[0])[:2]
    assert len(wins) == 2
    for _, x, y, out in wins:
        exact = mp_birkhoff_difference(F, x, y, out.ell0 * D_ALPHA.q[out.m], D_ALPHA)
        assert abs(exact - out.difference) <= 2 * out.err


def test_preservation_check_reports_fraction(searched):
    x, y, out = next(t for t in searched if t[2].success)
    res = shear.shearing_preservation_check(F, x, y, D_ALPHA, out, 10, rng=np.random.default_rng(0))
    assert 0 <= res["fraction"] <= 1 and res["samples"] == 10


def test_large_shearing_one_pair():
    (x, y), = sample_pairs(D_ALPHA, 13, "type_I", 1, seed=4,
                           x_sets=[("E_n", 13, None), ("E_n", 14, None)], y_sets=[("E_n", 13, None)])
    out = shear.large_shearing_check(F, x, y, D_ALPHA, 13)
    exact = mp_birkhoff_difference(F, x, y, out.q_r, D_ALPHA)
    assert abs(abs(exact) - out.delta) <= out.delta_err
    assert abs(out.delta - out.delta_split) <= out.delta_err + out.split_err
    assert len(out.straddle) <= 2
    assert out.upper_ok


def test_straddle_indices_by_hand():
    cf = golden(40)
    # x just below 0, z just above: index 0 straddles the singularity
    x = CirclePoint((1 << 64) - 10, 0, 64)
    z = CirclePoint(10, 0, 64)
    assert shear.straddle_indices(x, z, cf, 5) == [0]


def test_distance_estimate():
    cf = golden(40)
    for x, y in sample_pairs(cf, 10, "off_orbit", 50, seed=5):
        assert shear.distance_estimate_holds(shear.classify_pair(x, y, cf, 10), cf)
