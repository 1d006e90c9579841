"""The special flow T_t over the rotation under the roof f.

    T_t(x, s) = (R^m x, s + t - f^(m)(x)),   f^(m)(x) <= s + t < f^(m+1)(x)

m is located by galloping over orbit blocks of doubling length, then a
binary search (``searchsorted``) inside the bracketing block's prefix sums.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import circle
from .circle import CirclePoint, retry_precision
from .errors import DomainError, PrecisionError
from .numeration import ContinuedFraction
from .roof import RHO_0, Real, RoofFunction, eval_terms, roof_eval

_EPS = 2.0**-52


@dataclass(frozen=True)
class FlowPoint:
    x: CirclePoint
    s: float
    s_err: float = 0.0

    def check(self, f: RoofFunction, rho_0: float = RHO_0) -> bool:
        """0 <= s < f(x), decided with the tracked errors."""
        fx = roof_eval(f, self.x, rho_0)
        return self.s + self.s_err >= 0 and self.s - self.s_err < fx.value + fx.err


@dataclass(frozen=True)
class FlowStep:
    target: FlowPoint
    m: int
    residual: float
    err: float


def _prefix(f, x, start, stop, cf, bits, rho_0):
    """Terms f(x + i alpha), i in [start, stop), with running sums and their errors."""
    js = np.arange(start, stop, dtype=np.int64)
    vals, errs = circle.orbit(x, js, cf, bits)
    terms, term_errs, _ = eval_terms(f, vals, errs, bits, rho_0, offset=start)
    return terms, term_errs


def _gallop(f, x, target, cf, bits, rho_0, limit, direction):
    """Smallest k >= 1 with S_k > target (forward) or S_k >= target (backward).

    S_k = sum of the first k terms in ``direction``; returns (k, S_{k-1}, S_k, err_k).
    """
    block = 64
    done = 0
    total, total_err, abs_total = 0.0, 0.0, 0.0
    while True:
        if done > limit:
            raise PrecisionError(f"iterate count exceeded the bound {limit}")
        if direction > 0:
            terms, terms_err = _prefix(f, x, done, done + block, cf, bits, rho_0)
        else:
            terms, terms_err = _prefix(f, x, -(done + block), -done, cf, bits, rho_0)
            terms, terms_err = terms[::-1], terms_err[::-1]
        sums = total + np.cumsum(terms)
        errs = total_err + np.cumsum(terms_err) + (done + np.arange(1, block + 1)) * _EPS * (abs_total + np.cumsum(np.abs(terms)))
        hit = np.flatnonzero(sums > target) if direction > 0 else np.flatnonzero(sums >= target)
        if hit.size:
            i = int(hit[0])
            prev = total if i == 0 else float(sums[i - 1])
            prev_err = total_err if i == 0 else float(errs[i - 1])
            return done + i + 1, prev, prev_err, float(sums[i]), float(errs[i])
        total, total_err = float(sums[-1]), float(errs[-1])
        abs_total += float(np.abs(terms).sum())
        done += block
        block *= 2


@retry_precision
def flow(f: RoofFunction, p: FlowPoint, t: float, cf: ContinuedFraction, *,
         bits: int, rho_0: float = RHO_0) -> FlowStep:
    """Flow the point ``p`` for time ``t``.

    When s + t sits within rounding of a roof crossing, the step snaps to the
    later representative (R^{m+1} x, 0); the two are identified in X^f.
    """
    x = p.x.at(bits)
    target = p.s + t
    fx = roof_eval(f, x, rho_0)
    limit = int((abs(t) + fx.value + fx.err) / f.a) + 2
    if target >= 0:
        k, lo_sum, lo_err, hi_sum, hi_err = _gallop(f, x, target, cf, bits, rho_0, limit, +1)
        m = k - 1
        # f^(m) = lo_sum <= target < hi_sum = f^(m+1)
        if hi_sum - target <= hi_err + p.s_err + _EPS * abs(target):
            m, residual, err = m + 1, 0.0, hi_err
        else:
            residual, err = target - lo_sum, lo_err
    else:
        # f^(-k) = -B_k; want B_{k-1} < -target <= B_k
        k, lo_sum, lo_err, hi_sum, hi_err = _gallop(f, x, -target, cf, bits, rho_0, limit, -1)
        m = -k
        residual, err = target + hi_sum, hi_err
        if lo_sum + target >= -(lo_err + p.s_err + _EPS * abs(target)):
            m, residual, err = m + 1, 0.0, lo_err
    residual = max(residual, 0.0)
    err = err + p.s_err + _EPS * abs(target)
    base = circle.rotate(x, m, cf, bits)
    return FlowStep(FlowPoint(base, residual, err), m, residual, err)


def flow_distance(p: FlowPoint, q: FlowPoint) -> Real:
    """Taxicab metric ||x_p - x_q|| + |s_p - s_q| on X^f."""
    d = circle.circle_distance(p.x, q.x)
    ds = abs(p.s - q.s)
    return Real(float(d) + ds, d.err_float + p.s_err + q.s_err + _EPS * (float(d) + ds))


@dataclass(frozen=True)
class SpecialReturn:
    t: float
    t_err: float
    check: bool
    step: Optional[FlowStep]
    reason: str = ""


def special_return(f: RoofFunction, x: CirclePoint, cf: ContinuedFraction, n: int, s: float = 0.0,
                   bits: Optional[int] = None, rho_0: float = RHO_0) -> SpecialReturn:
    """t_n = f^(q_n)(x); flowing (x, s) for t_n must land on (x + q_n alpha, s)."""
    from .roof import birkhoff_sum

    cf.require(n)
    q = cf.q[n]
    bits = bits or x.bits
    tn = birkhoff_sum(f, x, q, cf, bits=bits, rho_0=rho_0)
    landing = circle.rotate(x, q, cf, max(bits, x.bits))
    f_land = roof_eval(f, landing, rho_0)
    if not s < f_land.value - f_land.err:
        return SpecialReturn(tn.value, tn.err, False, None, "height overflow: s >= f(x + q_n alpha)")
    step = flow(f, FlowPoint(x, s), tn.value, cf, bits=bits, rho_0=rho_0)
    same_base = step.m == q and step.target.x.value == landing.value
    tol = step.err + tn.err + _EPS * abs(tn.value)
    ok = same_base and abs(step.target.s - s) <= tol
    return SpecialReturn(tn.value, tn.err, ok, step, "" if ok else "landing mismatch")


def swr_statistic(f: RoofFunction, p: FlowPoint, q: FlowPoint, t0: float, pshift: float,
                  M: int, L: int, eps: float, direction: str, cf: ContinuedFraction,
                  bits: Optional[int] = None, rho_0: float = RHO_0) -> dict:
    """Fraction of integers n in [M, M+L] with d(T_{n t0} p, T_{n t0 + pshift} q) < eps.

    ``direction='backward'`` uses -t0. Indeterminate comparisons count as
    failures and are tallied separately.
    """
    if direction not in ("forward", "backward"):
        raise DomainError("direction must be 'forward' or 'backward'")
    if L < 0 or M < 0:
        raise DomainError("M and L must be non-negative")
    sgn = 1.0 if direction == "forward" else -1.0
    bits = bits or max(p.x.bits, q.x.bits)
    a = flow(f, p, sgn * M * t0, cf, bits=bits, rho_0=rho_0).target
    b = flow(f, q, sgn * M * t0 + pshift, cf, bits=bits, rho_0=rho_0).target
    close = indeterminate = 0
    for n in range(M, M + L + 1):
        if n > M:
            a = flow(f, a, sgn * t0, cf, bits=bits, rho_0=rho_0).target
            b = flow(f, b, sgn * t0, cf, bits=bits, rho_0=rho_0).target
        order = flow_distance(a, b).compare(eps)
        if order is circle.TernaryOrder.LESS:
            close += 1
        elif order is circle.TernaryOrder.INDETERMINATE:
            indeterminate += 1
    count = L + 1
    return {"fraction": close / count, "count": count, "close": close, "indeterminate": indeterminate}


# --- sampling and dumps ---------------------------------------------------------------


def sample_flow_space(f: RoofFunction, count: int, rng: np.random.Generator,
                      rho_0: float = RHO_0, bits: int = 64) -> tuple[list[FlowPoint], dict]:
    """Rejection samples from the normalised measure on X^f.

    Proposals are uniform on [0, 1) x [0, F] with F an upper bound for the
    roof off the ball ||x|| < rho_0; proposals inside the ball are dropped and
    the mass of X^f over it is reported as ``mass_defect``.
    """
    if bits != 64:
        raise DomainError("flow-space sampling draws 64-bit points")
    A, B = f.A_minus, f.A_plus
    # each log term is at most -log rho_0 outside the excluded ball
    top = -(A + B) * math.log(rho_0) + f.g_max
    out: list[FlowPoint] = []
    proposals = 0
    while len(out) < count:
        batch = max(1024, int(2 * (count - len(out)) * top / f.integral))
        vals = rng.integers(0, 2**64, size=batch, dtype=np.uint64)
        heights = rng.random(batch) * top
        proposals += batch
        u = vals.astype(np.float64) * 2.0**-64
        w = (~vals + np.uint64(1)).astype(np.float64) * 2.0**-64
        ok = np.minimum(u, w) >= rho_0
        fx = np.where(ok, -A * np.log(np.where(ok, u, 0.5)) - B * np.log(np.where(ok, w, 0.5)) + f.g(u), 0.0)
        keep = np.flatnonzero(ok & (heights < fx))
        for i in keep[: count - len(out)]:
            out.append(FlowPoint(CirclePoint(int(vals[i]), 0, 64), float(heights[i])))
    # mass of X^f over ||x|| < rho_0: -A log t integrates to rho_0 (1 - log rho_0)
    defect = (A + B) * rho_0 * (1 - math.log(rho_0)) + 2 * rho_0 * f.g_max
    return out, {"proposals": proposals, "accepted": count, "ceiling": top,
                 "mass_defect": defect / f.integral}


def write_trajectory_csv(path, rows: Iterable[tuple[int, float, FlowStep]]) -> None:
    """Columns n, t, x_value, x_err, s, m."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "t", "x_value", "x_err", "s", "m"])
        for n, t, step in rows:
            pt = step.target
            w.writerow([n, repr(t), repr(float(pt.x)), repr(pt.x.err_float), repr(pt.s), step.m])
