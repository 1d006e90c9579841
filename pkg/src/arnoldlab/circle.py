"""Error-bounded fixed-point arithmetic on the circle T = R/Z.

A point is an integer ``value`` in [0, 2**bits) meaning value / 2**bits, plus
an absolute error bound ``err`` counted in the same ulps. At 64 bits orbit
windows are numpy ``uint64`` arrays, whose wrap-around arithmetic is exactly
addition mod 1; wider precisions fall back to object arrays of Python ints.

Comparisons against thresholds are ternary. An Indeterminate outcome raises
:class:`IndeterminateError`, and operations wrapped in :func:`retry_precision`
rerun at twice the precision, up to ``MAX_BITS``.
"""
from __future__ import annotations

import enum
import functools
import logging
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Callable, Optional, Union

import mpmath
import numpy as np

from .errors import DomainError, IndeterminateError, PrecisionError
from .numeration import ContinuedFraction

log = logging.getLogger(__name__)

DEFAULT_BITS = 64
MAX_BITS = 4096
ERR_CAP_BITS = 16  # err must stay below 2**-16

Threshold = Union[Fraction, int, Callable[[int], "mpmath.mpf"]]

retry_stats = {"retries": 0, "max_bits": DEFAULT_BITS}


class TernaryOrder(enum.Enum):
    LESS = -1
    INDETERMINATE = 0
    GREATER = 1


@dataclass(frozen=True)
class CirclePoint:
    value: int
    err: int = 0
    bits: int = DEFAULT_BITS

    def __post_init__(self):
        if self.bits < 1:
            raise DomainError("bits must be positive")
        if not 0 <= self.value < (1 << self.bits):
            raise DomainError(f"value {self.value} outside [0, 2**{self.bits})")
        if self.err < 0:
            raise DomainError("negative error bound")
        if self.err >= 1 << (self.bits - ERR_CAP_BITS):
            raise PrecisionError(f"error bound {self.err} ulps exceeds 2**-{ERR_CAP_BITS} at {self.bits} bits")

    @classmethod
    def from_fraction(cls, x, bits: int = DEFAULT_BITS) -> "CirclePoint":
        x = Fraction(x) % 1
        scaled = x * (1 << bits)
        value = math.floor(scaled)
        return cls(value, 0 if value == scaled else 1, bits)

    @classmethod
    def from_float(cls, x: float, bits: int = DEFAULT_BITS) -> "CirclePoint":
        return cls.from_fraction(Fraction(float(x)), bits)

    @classmethod
    def random(cls, rng: np.random.Generator, bits: int = DEFAULT_BITS) -> "CirclePoint":
        """Uniform dyadic point with an exact (err 0) value."""
        words = -(-bits // 64)
        raw = 0
        for w in rng.integers(0, 2**64, size=words, dtype=np.uint64):
            raw = (raw << 64) | int(w)
        return cls(raw >> (64 * words - bits), 0, bits)

    def at(self, bits: int) -> "CirclePoint":
        """Same point expressed at another precision (widening is exact)."""
        if bits == self.bits:
            return self
        if bits > self.bits:
            shift = bits - self.bits
            return CirclePoint(self.value << shift, self.err << shift, bits)
        shift = self.bits - bits
        return CirclePoint(self.value >> shift, (self.err >> shift) + 1, bits)

    def fraction(self) -> Fraction:
        return Fraction(self.value, 1 << self.bits)

    def __float__(self) -> float:
        return _to_float(self.value, self.bits)

    @property
    def err_float(self) -> float:
        return _to_float(self.err, self.bits)

    def to_dict(self) -> dict:
        digits = math.ceil(self.bits * math.log10(2)) + 2
        with localcontext() as ctx:
            ctx.prec = digits
            text = str(Decimal(self.value) / Decimal(1 << self.bits))
        # one extra ulp covers the decimal rounding on the way back in
        err = Fraction(self.err + 1, 1 << self.bits)
        return {"value": text, "err": f"{_round_up_float(err):.6e}"}

    @classmethod
    def from_dict(cls, data: dict, bits: int = DEFAULT_BITS) -> "CirclePoint":
        x = Fraction(Decimal(data["value"])) % 1
        err = Fraction(Decimal(data.get("err", "0")))
        base = cls.from_fraction(x, bits)
        extra = math.ceil(err * (1 << bits))
        return CirclePoint(base.value, base.err + extra, bits)


@dataclass(frozen=True)
class Fixed:
    """Non-negative fixed-point real (distances, norms) with error in ulps."""

    value: int
    err: int
    bits: int

    def __float__(self) -> float:
        return _to_float(self.value, self.bits)

    @property
    def err_float(self) -> float:
        return _to_float(self.err, self.bits)

    def fraction(self) -> Fraction:
        return Fraction(self.value, 1 << self.bits)

    def compare(self, threshold: Threshold) -> TernaryOrder:
        return compare_fixed(self.value, self.err, self.bits, threshold)

    def contains_zero(self) -> bool:
        return self.value <= self.err


def _to_float(v: int, bits: int) -> float:
    shift = max(0, v.bit_length() - 64)
    return math.ldexp(float(v >> shift), shift - bits)


def _round_up_float(x: Fraction) -> float:
    f = float(x)
    return f if Fraction(f) >= x else math.nextafter(f, math.inf)


# --- thresholds and ternary comparison ---------------------------------------


def threshold_floor(threshold: Threshold, bits: int) -> tuple[int, int]:
    """(r, slack) with r <= threshold * 2**bits <= r + slack."""
    if isinstance(threshold, (int, Fraction)):
        t = Fraction(threshold) * (1 << bits)
        r = math.floor(t)
        return r, (0 if r == t else 1)
    prec = bits + 96
    with mpmath.workprec(prec):
        t = mpmath.mpf(threshold(prec)) * mpmath.mpf(2) ** bits
        r = int(mpmath.floor(t))
    return r, 1


def compare_fixed(value: int, err: int, bits: int, threshold: Threshold) -> TernaryOrder:
    """Compare value/2**bits (+- err ulps) against ``threshold``.

    Indeterminate exactly when the two uncertainty intervals touch.
    """
    if isinstance(threshold, (int, Fraction)):
        th = Fraction(threshold)
        lhs = value * th.denominator
        rhs = th.numerator << bits
        margin = err * th.denominator
        if lhs - rhs > margin:
            return TernaryOrder.GREATER
        if rhs - lhs > margin:
            return TernaryOrder.LESS
        return TernaryOrder.INDETERMINATE
    r, slack = threshold_floor(threshold, bits)
    if value - err > r + slack:
        return TernaryOrder.GREATER
    if value + err < r:
        return TernaryOrder.LESS
    return TernaryOrder.INDETERMINATE


def certain(order: TernaryOrder, what: str = "comparison") -> TernaryOrder:
    if order is TernaryOrder.INDETERMINATE:
        raise IndeterminateError(f"{what} is indeterminate at this precision")
    return order


def log_radius(scale, power: float, q: int) -> Callable[[int], "mpmath.mpf"]:
    """Threshold scale / (q * log(q)**power) as a precision-parametrised callable."""
    if q <= math.e:
        raise DomainError(f"log-radius undefined for degenerate q={q} <= e")
    scale = Fraction(scale)

    def thr(prec: int):
        with mpmath.workprec(prec):
            return mpmath.mpf(scale.numerator) / scale.denominator / (q * mpmath.log(q) ** mpmath.mpf(power))

    thr.description = f"{scale}/(q log^{power} q), q={q}"
    return thr


def loglog_radius(scale, q: int) -> Callable[[int], "mpmath.mpf"]:
    """Threshold scale / (q log q) (no fractional power)."""
    return log_radius(scale, 1, q)


# --- precision retry -------------------------------------------------------------


def retry_precision(fn):
    """Rerun ``fn`` at doubled ``bits`` while it raises :class:`PrecisionError`."""

    @functools.wraps(fn)
    def wrapper(*args, bits: Optional[int] = None, max_bits: Optional[int] = None, **kwargs):
        bits = bits or max([DEFAULT_BITS] + [a.bits for a in args if isinstance(a, CirclePoint)])
        max_bits = max_bits or MAX_BITS
        while True:
            try:
                return fn(*args, bits=bits, **kwargs)
            except PrecisionError as exc:
                if 2 * bits > max_bits:
                    raise PrecisionError(f"{fn.__name__}: still unresolved at {bits} bits ({exc})") from exc
                bits *= 2
                retry_stats["retries"] += 1
                retry_stats["max_bits"] = max(retry_stats["max_bits"], bits)
                log.info("%s: retrying at %d bits (%s)", fn.__name__, bits, exc)

    wrapper.unwrapped = fn
    return wrapper


# --- orbit windows ------------------------------------------------------------------


def _check_steps(max_j: int, bits: int) -> None:
    if max_j > 1 << (bits // 2):
        raise PrecisionError(f"|j|={max_j} exceeds 2**{bits // 2} at {bits} bits")
    if max_j + 1 >= 1 << (bits - ERR_CAP_BITS):
        raise PrecisionError(f"{max_j} rotation steps would exceed the error cap")


def orbit(x: CirclePoint, js, cf: ContinuedFraction, bits: int):
    """Values and error bounds of x + j*alpha for the integer array ``js``.

    Returns ``(vals, errs)``: uint64 arrays at 64 bits, object arrays otherwise.
    """
    x = x.at(bits)
    js = np.asarray(js, dtype=np.int64)
    if js.size == 0:
        empty = np.zeros(0, dtype=np.uint64 if bits == 64 else object)
        return empty, empty.copy()
    max_j = int(np.abs(js).max())
    _check_steps(max_j, bits)
    alpha, alpha_err = cf.fixed_point(bits)
    if bits == 64:
        vals = np.uint64(x.value) + js.astype(np.uint64) * np.uint64(alpha)
        errs = np.uint64(x.err) + np.abs(js).astype(np.uint64) * np.uint64(alpha_err)
        return vals, errs
    mod = 1 << bits
    jo = js.astype(object)
    vals = (x.value + jo * alpha) % mod
    errs = x.err + np.abs(jo) * alpha_err
    return vals, errs


def norm_array(vals, bits: int):
    """||v|| = min({v}, 1 - {v}) elementwise, in ulps."""
    if bits == 64 and vals.dtype == np.uint64:
        return np.minimum(vals, ~vals + np.uint64(1))
    mod = 1 << bits
    return np.minimum(vals, mod - vals)


def rotate(x: CirclePoint, j: int, cf: ContinuedFraction, bits: Optional[int] = None) -> CirclePoint:
    """{x + j alpha} with err grown by |j| ulps of alpha."""
    bits = bits or x.bits
    if bits < 64:
        raise DomainError("rotate needs at least 64 bits")
    x = x.at(bits)
    if j == 0:
        return x
    _check_steps(abs(j), bits)
    alpha, alpha_err = cf.fixed_point(bits)
    return CirclePoint((x.value + j * alpha) % (1 << bits), x.err + abs(j) * alpha_err, bits)


def circle_norm(x: CirclePoint) -> Fixed:
    v = x.value
    return Fixed(min(v, (1 << x.bits) - v), x.err, x.bits)


def circle_distance(x: CirclePoint, y: CirclePoint) -> Fixed:
    bits = max(x.bits, y.bits)
    x, y = x.at(bits), y.at(bits)
    diff = (x.value - y.value) % (1 << bits)
    return Fixed(min(diff, (1 << bits) - diff), x.err + y.err, bits)


# --- orbit distance d_k -------------------------------------------------------------


@dataclass(frozen=True)
class OrbitDistance:
    distance: Fixed
    j0: int
    q: int

    @property
    def value(self) -> float:
        return float(self.distance)


@retry_precision
def d_k(x: CirclePoint, y: CirclePoint, cf: ContinuedFraction, n: int, *, bits: int) -> OrbitDistance:
    """min over -q_n < j < q_n of ||x - (y + j alpha)||, with a minimising j0.

    Ties go to the smallest |j|, then to positive j.
    """
    cf.require(n)
    q = cf.q[n]
    x, y = x.at(bits), y.at(bits)
    if bits == 64 and q <= _INDEX_MAX_Q:
        return _d_k_indexed(x, y, cf, q)
    js = np.arange(-(q - 1), q, dtype=np.int64)
    vals, errs = orbit(y, js, cf, bits)
    if bits == 64:
        dist = norm_array(np.uint64(x.value) - vals, bits)
        errs = errs + np.uint64(x.err)
    else:
        dist = norm_array((x.value - vals) % (1 << bits), bits)
        errs = errs + x.err
    dmin = dist.min()
    ties = np.flatnonzero(dist == dmin)
    tie_js = js[ties]
    best = min(tie_js.tolist(), key=lambda j: (abs(j), j < 0))
    k = int(best + (q - 1))
    e0 = errs[k]
    if int(dmin) > int(e0):
        # another index whose interval overlaps the minimum makes j0 uncertain
        rivals = np.flatnonzero(dist <= dmin + e0 + errs)
        if rivals.size > 1 and not np.all(dist[rivals] == dmin):
            raise IndeterminateError(f"d_k minimiser ambiguous at {bits} bits")
    return OrbitDistance(Fixed(int(dmin), int(e0), bits), int(best), q)


_INDEX_MAX_Q = 1 << 24


@functools.lru_cache(maxsize=8)
def _offset_index(alpha: int, q: int):
    """Offsets j*alpha mod 2**64, |j| < q, sorted, with their j."""
    js = np.arange(-(q - 1), q, dtype=np.int64)
    offs = js.astype(np.uint64) * np.uint64(alpha)
    order = np.argsort(offs, kind="stable")
    return offs[order], js[order]


def _norm64(v: int) -> int:
    v %= 1 << 64
    return min(v, (1 << 64) - v)


def _d_k_indexed(x: CirclePoint, y: CirclePoint, cf: ContinuedFraction, q: int) -> OrbitDistance:
    """d_k at 64 bits by nearest-offset lookup; same ties and ambiguity rule as the scan."""
    alpha, alpha_err = cf.fixed_point(64)
    offs, js = _offset_index(alpha, q)
    size = offs.size
    t = (x.value - y.value) % (1 << 64)
    base = x.err + y.err
    i = int(np.searchsorted(offs, t))
    near = np.array([(i - 1) % size, i % size])
    dmin = min(_norm64(t - int(offs[k])) for k in near)
    # every index that could tie or rival the minimum lies within this band
    band = dmin + 2 * (base + (q - 1) * alpha_err)
    lo, hi = i - 1, i
    while hi - lo < size and _norm64(t - int(offs[lo % size])) <= band:
        lo -= 1
    while hi - lo < size and _norm64(t - int(offs[hi % size])) <= band:
        hi += 1
    idx = np.arange(lo + 1, hi) % size
    cand_js = js[idx]
    dist = norm_array(np.uint64(t) - offs[idx], 64)
    errs = np.array([base + abs(int(j)) * alpha_err for j in cand_js.tolist()], dtype=object)
    ties = np.flatnonzero(dist == np.uint64(dmin))
    best = min(cand_js[ties].tolist(), key=lambda j: (abs(j), j < 0))
    e0 = base + abs(best) * alpha_err
    if dmin > e0:
        rivals = [k for k in range(idx.size) if int(dist[k]) <= dmin + e0 + errs[k]]
        if len(rivals) > 1 and not all(int(dist[k]) == dmin for k in rivals):
            raise IndeterminateError("d_k minimiser ambiguous at 64 bits")
    return OrbitDistance(Fixed(dmin, e0, 64), int(best), q)


# --- spacing of orbit segments --------------------------------------------------


@dataclass(frozen=True)
class SpacingReport:
    n: int
    q: int
    min_gap: Optional[Fixed]
    max_gap: Fixed
    min_ok: bool
    max_ok: bool
    degenerate: bool = False

    @property
    def ok(self) -> bool:
        return self.min_ok and self.max_ok


@functools.lru_cache(maxsize=256)
def _orbit_gaps(cf: ContinuedFraction, n: int, bits: int) -> tuple[int, int]:
    # gaps of {x + i alpha} do not depend on x: translate the sorted orbit of 0
    q = cf.q[n]
    vals, _ = orbit(CirclePoint(0, 0, bits), np.arange(q, dtype=np.int64), cf, bits)
    if bits == 64:
        vals.sort()
        gaps = np.diff(vals)
        wrap = int(vals[0]) + (1 << 64) - int(vals[-1])
        return int(min(int(gaps.min()), wrap)), int(max(int(gaps.max()), wrap))
    srt = sorted(vals.tolist())
    gaps = [b - a for a, b in zip(srt, srt[1:])] + [srt[0] + (1 << bits) - srt[-1]]
    return min(gaps), max(gaps)


@retry_precision
def orbit_spacing_check(x: CirclePoint, cf: ContinuedFraction, n: int, *, bits: int) -> SpacingReport:
    """Gaps of the segment {x + i alpha : 0 <= i < q_n} against 1/(2q_n) and 2/q_n."""
    cf.require(n)
    q = cf.q[n]
    if q == 1:
        whole = Fixed(1 << bits, 0, bits)
        return SpacingReport(n, q, None, whole, True, True, degenerate=True)
    _check_steps(q, bits)
    lo, hi = _orbit_gaps(cf, n, bits)
    # both endpoints of a gap carry at most (q-1) ulps of alpha error; x cancels
    err = 2 * (q - 1)
    min_gap, max_gap = Fixed(lo, err, bits), Fixed(hi, err, bits)
    min_ok = certain(min_gap.compare(Fraction(1, 2 * q)), "min gap") is TernaryOrder.GREATER
    max_ok = certain(max_gap.compare(Fraction(2, q)), "max gap") is TernaryOrder.LESS
    return SpacingReport(n, q, min_gap, max_gap, min_ok, max_ok)


# --- window predicates -------------------------------------------------------------------


def window_norms(x: CirclePoint, lo: int, hi: int, cf: ContinuedFraction, bits: int):
    """(||x + i alpha||, err) for i in [lo, hi]."""
    js = np.arange(lo, hi + 1, dtype=np.int64)
    vals, errs = orbit(x, js, cf, bits)
    return norm_array(vals, bits), errs


def window_vs_radius(x: CirclePoint, lo: int, hi: int, radius: Threshold,
                     cf: ContinuedFraction, bits: int):
    """Per-index ternary order of ||x + i alpha|| against ``radius``; int8 in {-1,0,1}."""
    d, e = window_norms(x, lo, hi, cf, bits)
    r, slack = threshold_floor(radius, bits)
    if bits == 64:
        greater = d > (e + np.uint64(r + slack))
        less = (d + e) < np.uint64(r)
    else:
        greater = (d - e) > r + slack
        less = (d + e) < r
    out = np.zeros(d.shape, dtype=np.int8)
    out[greater.astype(bool)] = 1
    out[less.astype(bool)] = -1
    return out


def _all_outside(order) -> bool:
    if np.any(order == -1):
        return False
    if np.any(order == 0):
        raise IndeterminateError("orbit point on the exclusion boundary")
    return True


def _any_inside(order) -> bool:
    if np.any(order == -1):
        return True
    if np.any(order == 0):
        raise IndeterminateError("orbit point on the exclusion boundary")
    return False


def e_window(q: int, scale: int = 4) -> int:
    return scale * math.ceil(q * math.sqrt(math.log(q)))


SET_IDS = ("B_n", "O_n", "E_n", "Sigma_n", "badly_approx_window")


@retry_precision
def set_membership(x: CirclePoint, set_id: str, cf: ContinuedFraction, n: int,
                   params: Optional[dict] = None, *, bits: int) -> bool:
    """Orbit-window predicates B_n, O_n, E_n, Sigma_n(M) and the C=2 badly-approximable window.

    ``params``: ``M`` for Sigma_n (default 1/8); ``window_scale`` and
    ``radius_scale`` for E_n (defaults 4 and 1).
    """
    params = params or {}
    if set_id not in SET_IDS:
        raise DomainError(f"unknown set {set_id!r}")
    cf.require(n + 1 if set_id == "Sigma_n" else n)
    q = cf.q[n]
    x = x.at(bits)
    if set_id == "badly_approx_window":
        return badly_approx_count.unwrapped(x, cf, n, bits=bits) <= 1
    v = log_radius(params.get("radius_scale", 1), 0.875, q)
    if set_id == "B_n":
        return _all_outside(window_vs_radius(x, -q, q - 1, v, cf, bits))
    if set_id == "O_n":
        w = log_radius(Fraction(1, 2), 4, q)
        return _all_outside(window_vs_radius(x, -q, q - 1, w, cf, bits))
    if set_id == "E_n":
        W = e_window(q, params.get("window_scale", 4))
        return _all_outside(window_vs_radius(x, -W, W, v, cf, bits))
    M = Fraction(params.get("M", Fraction(1, 8)))
    top = math.floor(M * cf.q[n + 1])
    return _any_inside(window_vs_radius(x, 0, top, v, cf, bits))


@retry_precision
def badly_approx_count(x, cf: ContinuedFraction, s: int, *, bits: int) -> int:
    """Number of i0 in [0, q_s) with x + i0 alpha in [-1/(4 q_s), 1/(4 q_s)]."""
    if not isinstance(x, CirclePoint):
        x = CirclePoint.from_fraction(x, bits)
    cf.require(s)
    q = cf.q[s]
    order = window_vs_radius(x.at(bits), 0, q - 1, Fraction(1, 4 * q), cf, bits)
    if np.any(order == 0):
        raise IndeterminateError("badly-approximable window boundary")
    return int(np.count_nonzero(order == -1))


@retry_precision
def min_norm(x: CirclePoint, lo: int, hi: int, cf: ContinuedFraction, *, bits: int) -> Fixed:
    """min over i in [lo, hi] of ||x + i alpha||."""
    d, e = window_norms(x, lo, hi, cf, bits)
    k = int(np.argmin(d))
    return Fixed(int(d[k]), int(e.max()), bits)


class WindowIndex:
    """Sorted exclusion centres -i*alpha, i in [lo, hi], for batch membership at 64 bits.

    ``clear(values)`` answers "does x's window miss the radius" for many x at
    once; ambiguous points come back as ``None`` and must be checked exactly.
    """

    def __init__(self, cf: ContinuedFraction, lo: int, hi: int, radius: Threshold):
        js = np.arange(lo, hi + 1, dtype=np.int64)
        centres, errs = orbit(CirclePoint(0, 0, 64), -js, cf, 64)
        self.centres = np.sort(centres)
        self.err = int(errs.max()) + 1
        self.r, self.slack = threshold_floor(radius, 64)

    def nearest(self, values: np.ndarray) -> np.ndarray:
        c = self.centres
        idx = np.searchsorted(c, values)
        left = c[(idx - 1) % c.size]
        right = c[idx % c.size]
        return np.minimum(norm_array(values - left, 64), norm_array(right - values, 64))

    def clear(self, values: np.ndarray) -> np.ndarray:
        """Object array: True (window clear), False (hit), None (undecided)."""
        d = self.nearest(np.asarray(values, dtype=np.uint64))
        out = np.full(d.shape, None, dtype=object)
        out[d > np.uint64(self.r + self.slack + self.err)] = True
        out[d + np.uint64(self.err) < np.uint64(self.r)] = False
        return out

    def sample_clear(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` uniform draws from the points whose window is certainly clear."""
        c = self.centres
        gaps = np.diff(c, append=c[:1])  # uint64 wrap gives the circular last gap
        if c.size == 1:
            gaps = np.array([np.uint64(0) - np.uint64(1)], dtype=np.uint64)
        margin = self.r + self.slack + self.err + 1
        usable = np.where(gaps > np.uint64(2 * margin), gaps - np.uint64(2 * margin), np.uint64(0))
        weights = usable.astype(np.float64)
        if weights.sum() == 0:
            raise DomainError("no clear points at this radius")
        k = rng.choice(c.size, size=count, p=weights / weights.sum())
        offs = np.array([int(rng.integers(0, int(usable[i]))) for i in k], dtype=np.uint64)
        return c[k] + np.uint64(margin) + offs
