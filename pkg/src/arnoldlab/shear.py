"""Pair classification and shearing of Birkhoff sums for nearby points.

Thresholds at order n_k (q = q_{n_k}, Q = q_{n_k + 1}):

    small    0 < d_k <= 1/(Q log Q)
    close    5/(6Q) <= d_k < 1/(q log q)
    type_I   1/(q log q) <= d_k <= 5/(6q)
    type_II  1/(Q log Q) <= d_k <= 5/(6Q)

Ranges overlap; the first match in that order wins.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import circle
from .circle import CirclePoint, Fixed, TernaryOrder, certain, log_radius, retry_precision
from .errors import PreconditionError, SingularEvaluationError
from .numeration import ContinuedFraction
from .roof import RHO_0, RoofFunction, _window_sum, birkhoff_sum

PAIR_CLASSES = ("small", "close", "type_I", "type_II", "same_orbit", "unclassified")
GOOD = ("small", "close")
_EPS = 2.0**-52


# --- constants -------------------------------------------------------------------------


def _H_formula(dA: Fraction) -> Fraction:
    return dA - min(Fraction(1, 100), dA / 10)


def _H_spelled(A_minus: Fraction, A_plus: Fraction) -> tuple[int, int]:
    # integer numerator over a common denominator
    den = A_minus.denominator * A_plus.denominator * 100
    diff = A_minus.numerator * (den // A_minus.denominator) - A_plus.numerator * (den // A_plus.denominator)
    cap = den // 100
    if 10 * cap <= diff:
        return diff - cap, den
    return 9 * diff, 10 * den


def shear_H(f: RoofFunction) -> float:
    return float(_H_formula(Fraction(f.A_minus) - Fraction(f.A_plus)))


@dataclass(frozen=True)
class ShearConstants:
    H: Fraction
    P_low: Fraction
    P_high: Fraction
    H_hat: float
    H_hat_k: int
    d1: Fraction
    d2: Fraction

    @property
    def P_interval(self) -> tuple[tuple[float, float], tuple[float, float]]:
        lo, hi = float(self.P_low), float(self.P_high)
        return (-hi, -lo), (lo, hi)

    def P_distance(self, v: float) -> float:
        """Distance from v to P = [-hi, -lo] U [lo, hi]."""
        a = abs(v)
        lo, hi = float(self.P_low), float(self.P_high)
        if a < lo:
            return lo - a
        return max(0.0, a - hi)

    def P_project(self, v: float) -> float:
        lo, hi = float(self.P_low), float(self.P_high)
        return math.copysign(min(max(abs(v), lo), hi), v if v != 0 else 1.0)

    def to_dict(self) -> dict:
        return {"H": float(self.H), "P": [list(p) for p in self.P_interval], "H_hat": self.H_hat,
                "H_hat_k": self.H_hat_k, "d1": float(self.d1), "d2": float(self.d2)}


def shear_constants(f: RoofFunction, cf: Optional[ContinuedFraction] = None) -> ShearConstants:
    """H, P, H_hat, d1, d2 in exact rationals (H_hat as a float).

    H is computed twice, once from the closed formula and once in integer
    arithmetic over a common denominator; a mismatch raises.
    """
    Am, Ap = Fraction(f.A_minus), Fraction(f.A_plus)
    H = _H_formula(Am - Ap)
    num, den = _H_spelled(Am, Ap)
    if Fraction(num, den) != H:
        raise ArithmeticError(f"H disagrees between code paths: {H} vs {num}/{den}")
    P_low, P_high = H / 200, 2 * H + 2
    d1 = Fraction(99, 100) * H
    d2 = 2 * (Am - Ap + H / 50)
    H_hat, k_best = float(H / 200), 0
    if cf is not None:
        kmax = math.floor((2 * H + 3) / Fraction(f.a)) + 1
        alpha, aerr = cf.fixed_point(128)
        mod = 1 << 128
        for k in range(1, kmax + 1):
            v = (k * alpha) % mod
            nrm = (min(v, mod - v) - k * aerr) / mod
            if nrm < H_hat:
                H_hat, k_best = float(nrm), k
    return ShearConstants(H, P_low, P_high, H_hat, k_best, d1, d2)


# --- classification ----------------------------------------------------------------


@dataclass
class PairReport:
    d_k: float
    d_k_err: float
    j0: int
    order_k: int
    pair_class: str
    degenerate: bool = False
    shear: Optional["SmallShearOutcome"] = None
    large: Optional["LargeShearOutcome"] = None
    distance: Optional[Fixed] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("distance", "shear", "large")}
        out["shear"] = None if self.shear is None else self.shear.to_dict()
        out["large"] = None if self.large is None else self.large.to_dict()
        return out


def _below(d: Fixed, thr, strict: bool) -> bool:
    """d < thr (strict) or d <= thr; exact ties only arise for rational thresholds."""
    order = d.compare(thr)
    if order is TernaryOrder.INDETERMINATE:
        if isinstance(thr, Fraction) and d.err == 0:
            return not strict
        certain(order, "class boundary")
    return order is TernaryOrder.LESS


@retry_precision
def classify_pair(x: CirclePoint, y: CirclePoint, cf: ContinuedFraction, n_k: int, *,
                  bits: int) -> PairReport:
    cf.require(n_k + 1)
    q, Q = cf.q[n_k], cf.q[n_k + 1]
    od = circle.d_k.unwrapped(x, y, cf, n_k, bits=bits)
    d = od.distance
    rep = PairReport(float(d), d.err_float, od.j0, n_k, "unclassified", distance=d)
    if d.contains_zero():
        rep.pair_class = "same_orbit"
        return rep
    big_ok, small_ok = q > math.e, Q > math.e
    rep.degenerate = not (big_ok and small_ok)
    if small_ok and _below(d, log_radius(1, 1, Q), strict=False):
        rep.pair_class = "small"
    elif big_ok and not _below(d, Fraction(5, 6 * Q), strict=True) and _below(d, log_radius(1, 1, q), strict=True):
        rep.pair_class = "close"
    elif big_ok and not _below(d, log_radius(1, 1, q), strict=True) and _below(d, Fraction(5, 6 * q), strict=False):
        rep.pair_class = "type_I"
    elif small_ok and not _below(d, log_radius(1, 1, Q), strict=True) and _below(d, Fraction(5, 6 * Q), strict=False):
        rep.pair_class = "type_II"
    return rep


def distance_estimate_holds(report: PairReport, cf: ContinuedFraction) -> bool:
    """d_k < 5/(6 q_{n_k}), decided exactly."""
    q = cf.q[report.order_k]
    return certain(report.distance.compare(Fraction(5, 6 * q)), "distance estimate") is TernaryOrder.LESS


# --- small shearing ----------------------------------------------------------------


@dataclass
class SmallShearOutcome:
    success: bool
    ell0: int
    m: int
    p: float
    residual: float
    direction: str
    difference: float = 0.0
    err: float = 0.0
    ell_cap: int = 0
    best_residual: float = math.inf
    reason: str = ""
    x_in_B_m: Optional[bool] = None
    y_in_E_nk: Optional[bool] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _find_m(d: Fixed, cf: ContinuedFraction, n_k: int) -> int:
    """m >= n_k with 1/(q_{m+1} log q_{m+1}) <= d < 1/(q_m log q_m)."""
    m = n_k
    while True:
        cf.require(m + 1)
        if not _below(d, log_radius(1, 1, cf.q[m + 1]), strict=True):
            return m
        m += 1


def _clear(x, lo, hi, cf, q, bits) -> bool:
    order = circle.window_vs_radius(x, lo, hi, log_radius(1, 0.875, q), cf, bits)
    return circle._all_outside(order)


@retry_precision
def small_shearing_search(f: RoofFunction, x: CirclePoint, y: CirclePoint, cf: ContinuedFraction,
                          n_k: int, zeta: float = 0.05, *, bits: int, rho_0: float = RHO_0,
                          check_sets: bool = True, e_params: Optional[dict] = None) -> SmallShearOutcome:
    """Scan ell = 1, 2, ... for a Birkhoff difference at time ell * q_m within zeta of P.

    Returns a failure outcome (not an exception) when no ell in the cap works.
    """
    rep = classify_pair.unwrapped(x, y, cf, n_k, bits=bits)
    if rep.pair_class == "same_orbit":
        raise PreconditionError("pair lies on one orbit (d_k = 0)")
    if rep.pair_class not in GOOD:
        raise PreconditionError(f"not a good pair: class {rep.pair_class}")
    consts = shear_constants(f)
    m = _find_m(rep.distance, cf, n_k)
    cf.require(m + 1)
    if m > n_k and cf.q[m + 1] < 2 * cf.q[m]:
        # short quotient: run the argument at the previous order
        m -= 1
    q, Q = cf.q[m], cf.q[m + 1]
    out = SmallShearOutcome(False, 0, m, 0.0, math.inf, "", ell_cap=max(Q // (16 * q), 1))
    if check_sets:
        out.x_in_B_m = circle.set_membership.unwrapped(x, "B_n", cf, m, bits=bits) if q > math.e else None
        out.y_in_E_nk = circle.set_membership.unwrapped(y, "E_n", cf, n_k, e_params, bits=bits)
    if q <= math.e:
        out.reason = f"degenerate order: q_m={q}"
        return out
    span = max(Q // 8, q)
    if _clear(x, 0, span, cf, q, bits):
        out.direction, sgn = "forward", 1
    elif _clear(x, -span, -1, cf, q, bits):
        out.direction, sgn = "backward", -1
    else:
        out.reason = "neither orbit window clears the singularity"
        return out
    xs, ys, errs = [], [], []
    for ell in range(1, out.ell_cap + 1):
        lo, hi = ((ell - 1) * q, ell * q) if sgn > 0 else (-ell * q, -(ell - 1) * q)
        sx, ex, _ = _window_sum(f, x, lo, hi, cf, bits, rho_0, False)
        sy, ey, _ = _window_sum(f, y, lo, hi, cf, bits, rho_0, False)
        xs.append(sx)
        ys.append(sy)
        errs.extend((ex, ey))
        diff = sgn * (math.fsum(xs) - math.fsum(ys))
        err = math.fsum(errs) + 2 * _EPS * (math.fsum(map(abs, xs)) + math.fsum(map(abs, ys)))
        resid = consts.P_distance(diff)
        if resid < out.best_residual:
            out.best_residual = resid
        if resid <= zeta:
            out.success, out.ell0 = True, sgn * ell
            out.difference, out.err = diff, err
            out.p = consts.P_project(diff)
            out.residual = abs(diff - out.p)
            return out
    out.reason = "no ell within the cap lands near P"
    return out


def shearing_preservation_check(f: RoofFunction, x: CirclePoint, y: CirclePoint, cf: ContinuedFraction,
                                outcome: SmallShearOutcome, samples: int, zeta: float = 0.05,
                                rng: Optional[np.random.Generator] = None, rho_0: float = RHO_0) -> dict:
    """Sample (i, j) with 0 <= i <= N, |i - j| <= 10 N^(1/5) for N = |ell0 q_m|.

    Each sample compares f^(ell0 q_m) at x +- i alpha and y +- j alpha with p.
    """
    if not outcome.success:
        raise PreconditionError("needs a successful small-shearing outcome")
    rng = rng if rng is not None else np.random.default_rng(0)
    N = abs(outcome.ell0) * cf.q[outcome.m]
    sgn = 1 if outcome.ell0 > 0 else -1
    span = int(10 * N ** 0.2)
    passed = skipped = 0
    worst = 0.0
    for _ in range(samples):
        i = int(rng.integers(0, N + 1))
        j = max(0, i + int(rng.integers(-span, span + 1)))
        try:
            xi = circle.rotate(x, sgn * i, cf)
            yj = circle.rotate(y, sgn * j, cf)
            bx = birkhoff_sum(f, xi, outcome.ell0 * cf.q[outcome.m], cf, rho_0=rho_0)
            by = birkhoff_sum(f, yj, outcome.ell0 * cf.q[outcome.m], cf, rho_0=rho_0)
        except SingularEvaluationError:
            skipped += 1
            continue
        r = abs(bx.value - by.value - outcome.p)
        worst = max(worst, r)
        passed += r <= zeta + bx.err + by.err
    used = samples - skipped
    return {"fraction": passed / used if used else math.nan, "samples": samples, "skipped": skipped,
            "passed": passed, "worst_residual": worst}


# --- large shearing ----------------------------------------------------------------


@dataclass
class LargeShearOutcome:
    r: int
    q_r: int
    delta: float
    delta_err: float
    delta_split: float
    split_err: float
    I1: float
    J1: float
    straddle: list
    lower_ok: bool
    upper_ok: bool
    d1: float
    d2_log_q: float

    def to_dict(self) -> dict:
        return asdict(self)


def straddle_indices(x: CirclePoint, z: CirclePoint, cf: ContinuedFraction, q: int, bits: int = 64) -> list:
    """Indices 0 <= i < q with 0 in the short arc between x + i alpha and z + i alpha."""
    js = np.arange(q, dtype=np.int64)
    a, _ = circle.orbit(x, js, cf, bits)
    b, _ = circle.orbit(z, js, cf, bits)
    mod = 1 << bits
    a_l = [int(v) for v in a.tolist()]
    b_l = [int(v) for v in b.tolist()]
    hits = []
    for i, (u, w) in enumerate(zip(a_l, b_l)):
        diff = (w - u) % mod
        if diff <= mod // 2:
            inside = (-u) % mod <= diff
        else:
            inside = (-w) % mod <= mod - diff
        if inside:
            hits.append(i)
    return hits


@retry_precision
def large_shearing_check(f: RoofFunction, x: CirclePoint, y: CirclePoint, cf: ContinuedFraction,
                         n_k: int, *, bits: int, rho_0: float = RHO_0, check_sets: bool = True,
                         e_params: Optional[dict] = None) -> LargeShearOutcome:
    """|f^(q_r)(x) - f^(q_r)(y)| against d1 and d2 log q_r for a type I/II pair."""
    rep = classify_pair.unwrapped(x, y, cf, n_k, bits=bits)
    if rep.pair_class not in ("type_I", "type_II"):
        raise PreconditionError(f"needs a type I or II pair, got {rep.pair_class}")
    cf.require(n_k + 2)
    if check_sets:
        mem = circle.set_membership.unwrapped
        ok = (mem(x, "E_n", cf, n_k, e_params, bits=bits) and mem(x, "E_n", cf, n_k + 1, e_params, bits=bits)
              and mem(y, "E_n", cf, n_k, e_params, bits=bits))
        if not ok:
            raise PreconditionError("needs x in E_nk and E_nk+1, y in E_nk")
    consts = shear_constants(f)
    r = n_k if rep.pair_class == "type_I" else n_k + 1
    q = cf.q[r]
    bx = birkhoff_sum.unwrapped(f, x, q, cf, bits=bits, rho_0=rho_0)
    by = birkhoff_sum.unwrapped(f, y, q, cf, bits=bits, rho_0=rho_0)
    delta = abs(bx.value - by.value)
    delta_err = bx.err + by.err + _EPS * (abs(bx.value) + abs(by.value))
    j0 = rep.j0
    z = circle.rotate(y, j0, cf, bits)
    bz = birkhoff_sum.unwrapped(f, z, q, cf, bits=bits, rho_0=rho_0)
    I1 = bx.value - bz.value
    # J1 = f^(q)(y + j0 alpha) - f^(q)(y) as the short telescoped sum
    if j0 >= 0:
        lo, hi, sign = 0, j0, 1
    else:
        lo, hi, sign = j0, 0, -1
    if hi > lo:
        s_up, e_up, _ = _window_sum(f, circle.rotate(y, q, cf, bits), lo, hi, cf, bits, rho_0, False)
        s_dn, e_dn, _ = _window_sum(f, y, lo, hi, cf, bits, rho_0, False)
        J1, J_err = sign * (s_up - s_dn), e_up + e_dn
    else:
        J1, J_err = 0.0, 0.0
    split = abs(I1 + J1)
    d2_log = float(consts.d2) * math.log(q)
    hits = straddle_indices(x, z, cf, q, bits)
    lower = delta - delta_err >= float(consts.d1)
    upper = delta + delta_err <= d2_log
    split_err = bx.err + bz.err + J_err + _EPS * (abs(I1) + abs(J1))
    return LargeShearOutcome(r, q, delta, delta_err, split, split_err, I1, J1, hits,
                             lower, upper, float(consts.d1), d2_log)
