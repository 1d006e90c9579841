"""The asymmetric logarithmic roof f and its Birkhoff sums.

    f(x) = -A_minus log{x} - A_plus log(1 - {x}) + g({x}),   A_minus > A_plus >= 0

Orbit points come from :mod:`arnoldlab.circle` as exact integers; the roof is
then evaluated in float64 from the integer pair ({x}, 1 - {x}), so both logs
keep full relative precision right up to the exclusion radius. Each term
carries an error bound (input error pushed through the derivative, plus
rounding) and sums use ``math.fsum``, which is order independent.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from . import circle
from .circle import CirclePoint, retry_precision
from .errors import DomainError, PrecisionError, SingularEvaluationError
from .numeration import ContinuedFraction

RHO_0 = 2.0**-60
_EPS = 2.0**-52  # generous per-operation relative rounding
_CHUNK = 1 << 20


@dataclass(frozen=True)
class Real:
    """A float with an absolute error bound."""

    value: float
    err: float = 0.0

    @property
    def lo(self) -> float:
        return self.value - self.err

    @property
    def hi(self) -> float:
        return self.value + self.err

    def __float__(self) -> float:
        return self.value

    def __add__(self, other: "Real") -> "Real":
        return Real(self.value + other.value, self.err + other.err + _EPS * abs(self.value + other.value))

    def __sub__(self, other: "Real") -> "Real":
        return Real(self.value - other.value, self.err + other.err + _EPS * abs(self.value - other.value))

    def __neg__(self) -> "Real":
        return Real(-self.value, self.err)

    def __abs__(self) -> "Real":
        return Real(abs(self.value), self.err)

    def compare(self, threshold: float) -> circle.TernaryOrder:
        if self.lo > threshold:
            return circle.TernaryOrder.GREATER
        if self.hi < threshold:
            return circle.TernaryOrder.LESS
        return circle.TernaryOrder.INDETERMINATE


@dataclass(frozen=True)
class RoofFunction:
    """Roof parameters. ``g_nodes`` is None for the constant g = ``g_const``.

    Piecewise-linear g is given by nodes (x, y) with x running from 0 to 1.
    """

    A_minus: float
    A_plus: float
    g_const: float = 0.0
    g_nodes: Optional[tuple[tuple[float, float], ...]] = None
    normalized: bool = False
    a: float = field(init=False)

    def __post_init__(self):
        if not self.A_minus > self.A_plus >= 0:
            raise DomainError(f"need A_minus > A_plus >= 0, got {self.A_minus}, {self.A_plus}")
        if self.g_nodes is not None:
            xs = [p[0] for p in self.g_nodes]
            if len(xs) < 2 or xs[0] != 0 or xs[-1] != 1 or any(b <= a for a, b in zip(xs, xs[1:])):
                raise DomainError("g nodes must be strictly increasing from x=0 to x=1")
            low = min(p[1] for p in self.g_nodes)
        else:
            low = self.g_const
        if not low > 0:
            raise DomainError(f"g must be bounded below by a > 0, got min {low}")
        object.__setattr__(self, "a", float(low))
        if self.normalized and abs(self.integral - 1.0) > 2.0**-40:
            raise DomainError(f"normalized roof has integral {self.integral}")

    @property
    def g_integral(self) -> float:
        if self.g_nodes is None:
            return self.g_const
        return math.fsum((x1 - x0) * (y0 + y1) / 2 for (x0, y0), (x1, y1) in zip(self.g_nodes, self.g_nodes[1:]))

    @property
    def integral(self) -> float:
        # int_0^1 -log x dx = 1, so each log term contributes its coefficient
        return self.A_minus + self.A_plus + self.g_integral

    @property
    def g_slope_max(self) -> float:
        if self.g_nodes is None:
            return 0.0
        return max(abs((y1 - y0) / (x1 - x0)) for (x0, y0), (x1, y1) in zip(self.g_nodes, self.g_nodes[1:]))

    @property
    def g_max(self) -> float:
        if self.g_nodes is None:
            return self.g_const
        return max(p[1] for p in self.g_nodes)

    def g(self, u: np.ndarray) -> np.ndarray:
        if self.g_nodes is None:
            return np.full(np.shape(u), self.g_const, dtype=float)
        xs, ys = zip(*self.g_nodes)
        return np.interp(u, xs, ys)

    def g_prime(self, u: np.ndarray) -> np.ndarray:
        if self.g_nodes is None:
            return np.zeros(np.shape(u), dtype=float)
        xs = np.array([p[0] for p in self.g_nodes])
        ys = np.array([p[1] for p in self.g_nodes])
        slopes = np.diff(ys) / np.diff(xs)
        idx = np.clip(np.searchsorted(xs, u, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]

    def value(self, x: float) -> float:
        """Plain float evaluation at x in (0, 1), for plotting and oracles."""
        return -self.A_minus * math.log(x) - self.A_plus * math.log1p(-x) + float(self.g(np.array([x]))[0])

    def marginal_cdf(self, x: np.ndarray) -> np.ndarray:
        """int_0^x f / int_0^1 f in closed form; uniform under the flow-space measure."""
        x = np.asarray(x, dtype=float)
        w = 1.0 - x
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(x > 0, x - x * np.log(x), 0.0)
            right = np.where(w > 0, x + w * np.log(w), 1.0)
        if self.g_nodes is None:
            gi = self.g_const * x
        else:
            xs = np.array([p[0] for p in self.g_nodes])
            ys = np.array([p[1] for p in self.g_nodes])
            cum = np.concatenate([[0.0], np.cumsum(np.diff(xs) * (ys[:-1] + ys[1:]) / 2)])
            k = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
            dx = x - xs[k]
            slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
            gi = cum[k] + dx * ys[k] + 0.5 * slope * dx * dx
        return (self.A_minus * left + self.A_plus * right + gi) / self.integral

    def to_dict(self) -> dict:
        g = ({"type": "constant", "c": self.g_const} if self.g_nodes is None
             else {"type": "pwl", "nodes": [list(p) for p in self.g_nodes]})
        return {"A_minus": self.A_minus, "A_plus": self.A_plus, "g": g, "normalize": self.normalized}


def make_roof(A_minus: float, A_plus: float, g: Optional[dict] = None, normalize: bool = True) -> RoofFunction:
    """Build a roof from the JSON-style spec.

    Without ``g`` the default is a constant: 1 - A_minus - A_plus when that is
    positive and ``normalize`` is set (so the integral is 1), else 1 with
    normalisation switched off. An explicit g is shifted by a constant to
    reach integral 1 when ``normalize`` is set.
    """
    target = 1.0 - A_minus - A_plus
    if g is None:
        if normalize and target > 0:
            return RoofFunction(A_minus, A_plus, g_const=target, normalized=True)
        return RoofFunction(A_minus, A_plus, g_const=1.0, normalized=False)
    if g.get("type") == "constant":
        c = float(g["c"])
        if normalize:
            c = target
        return RoofFunction(A_minus, A_plus, g_const=c, normalized=normalize)
    if g.get("type") == "pwl":
        nodes = tuple((float(x), float(y)) for x, y in g["nodes"])
        if normalize:
            integral = math.fsum((x1 - x0) * (y0 + y1) / 2 for (x0, y0), (x1, y1) in zip(nodes, nodes[1:]))
            shift = target - integral
            nodes = tuple((x, y + shift) for x, y in nodes)
        return RoofFunction(A_minus, A_plus, g_nodes=nodes, normalized=normalize)
    raise DomainError(f"unknown g spec {g!r}")


def roof_from_json(text: str) -> RoofFunction:
    data = json.loads(text)
    return make_roof(data["A_minus"], data["A_plus"], data.get("g"), data.get("normalize", True))


# --- vectorised evaluation -------------------------------------------------------------


def _split_floats(vals, bits: int):
    """({x}, 1 - {x}) as float arrays, each with relative error <= 2**-53."""
    if bits == 64 and vals.dtype == np.uint64:
        u = vals.astype(np.float64) * 2.0**-64
        w = (~vals + np.uint64(1)).astype(np.float64) * 2.0**-64
        return u, w
    mod = 1 << bits
    to_f = np.frompyfunc(lambda v: circle._to_float(v, bits), 1, 1)
    u = to_f(vals).astype(np.float64)
    w = to_f(mod - vals).astype(np.float64)
    return u, w


def _errs_float(errs, bits: int) -> np.ndarray:
    if bits == 64 and errs.dtype == np.uint64:
        return errs.astype(np.float64) * 2.0**-64
    return np.frompyfunc(lambda e: circle._to_float(int(e), bits), 1, 1)(errs).astype(np.float64)


def eval_terms(f: RoofFunction, vals, errs, bits: int, rho_0: float = RHO_0,
               derivative: bool = False, offset: int = 0):
    """Roof (or roof derivative) values and error bounds at fixed-point points.

    ``offset`` shifts the orbit index reported in a singular-evaluation error.
    Returns ``(terms, term_errs, min_norm)``.
    """
    u, w = _split_floats(vals, bits)
    delta = _errs_float(errs, bits) * (1 + 2 * _EPS)
    near = np.minimum(u, w)
    k = int(np.argmin(near)) if near.size else 0
    min_norm = float(near[k]) if near.size else math.inf
    if near.size and min_norm < rho_0:
        raise SingularEvaluationError(min_norm, offset + k)
    if near.size and np.any(delta >= 0.5 * near):
        raise PrecisionError("input error comparable to the distance from the singularity")
    gu = f.g(u)
    A, B = f.A_minus, f.A_plus
    if not derivative:
        terms = -A * np.log(u) - B * np.log(w) + gu
        # |d/dx log| <= 1/(dist - delta) on the uncertainty interval
        prop = A * delta / (u - delta) + B * delta / (w - delta) + f.g_slope_max * delta
        rnd = 4 * _EPS * (A * np.abs(np.log(u)) + B * np.abs(np.log(w)) + np.abs(gu) + A + B)
    else:
        gp = f.g_prime(u)
        terms = -A / u + B / w + gp
        prop = A * delta / (u - delta) ** 2 + B * delta / (w - delta) ** 2
        if f.g_nodes is not None:
            # a kink of g inside the uncertainty interval changes g' by at most this
            prop = prop + 2 * f.g_slope_max
        rnd = 4 * _EPS * (A / u + B / w + np.abs(gp))
    return terms, prop + rnd, min_norm


def _sum_with_error(chunks_terms: list, chunks_errs: list) -> tuple[float, float]:
    terms = [t for c in chunks_terms for t in c.tolist()]
    total = math.fsum(terms)
    err = math.fsum(e for c in chunks_errs for e in c.tolist())
    # fsum is correctly rounded: one half-ulp for the final result
    err += _EPS * abs(total)
    return total, err * (1 + 1e-12)


@dataclass(frozen=True)
class BirkhoffResult:
    value: float
    m: int
    min_approach: float
    err: float

    @property
    def real(self) -> Real:
        return Real(self.value, self.err)


def _window_sum(f: RoofFunction, x: CirclePoint, lo: int, hi: int, cf: ContinuedFraction,
                bits: int, rho_0: float, derivative: bool) -> tuple[float, float, float]:
    """Sum of f (or f') over x + i alpha for i in [lo, hi); chunked."""
    chunk_terms, chunk_errs = [], []
    min_approach = math.inf
    for start in range(lo, hi, _CHUNK):
        stop = min(hi, start + _CHUNK)
        js = np.arange(start, stop, dtype=np.int64)
        vals, errs = circle.orbit(x, js, cf, bits)
        t, e, mn = eval_terms(f, vals, errs, bits, rho_0, derivative, offset=start)
        chunk_terms.append(t)
        chunk_errs.append(e)
        min_approach = min(min_approach, mn)
    total, err = _sum_with_error(chunk_terms, chunk_errs)
    return total, err, min_approach


def _birkhoff(f, x, m, cf, bits, rho_0, derivative) -> BirkhoffResult:
    if m == 0:
        return BirkhoffResult(0.0, 0, math.inf, 0.0)
    if m > 0:
        total, err, mn = _window_sum(f, x, 0, m, cf, bits, rho_0, derivative)
        return BirkhoffResult(total, m, mn, err)
    total, err, mn = _window_sum(f, x, m, 0, cf, bits, rho_0, derivative)
    return BirkhoffResult(-total, m, mn, err)


@retry_precision
def birkhoff_sum(f: RoofFunction, x: CirclePoint, m: int, cf: ContinuedFraction, *,
                 bits: int, rho_0: float = RHO_0) -> BirkhoffResult:
    """f^(m)(x): sum_{i<m} f(x+i alpha) for m > 0, 0 for m = 0, -sum_{m<=i<0} for m < 0."""
    return _birkhoff(f, x, m, cf, bits, rho_0, derivative=False)


@retry_precision
def birkhoff_derivative_sum(f: RoofFunction, x: CirclePoint, m: int, cf: ContinuedFraction, *,
                            bits: int, rho_0: float = RHO_0) -> BirkhoffResult:
    """f'^(m)(x) with f' = -A_minus/{x} + A_plus/(1-{x}) + g'."""
    return _birkhoff(f, x, m, cf, bits, rho_0, derivative=True)


def roof_eval(f: RoofFunction, x: CirclePoint, rho_0: float = RHO_0) -> Real:
    vals = np.array([x.value], dtype=np.uint64 if x.bits == 64 else object)
    errs = np.array([x.err], dtype=np.uint64 if x.bits == 64 else object)
    t, e, _ = eval_terms(f, vals, errs, x.bits, rho_0)
    return Real(float(t[0]), float(e[0]))


def roof_prime_eval(f: RoofFunction, x: CirclePoint, rho_0: float = RHO_0) -> Real:
    vals = np.array([x.value], dtype=np.uint64 if x.bits == 64 else object)
    errs = np.array([x.err], dtype=np.uint64 if x.bits == 64 else object)
    t, e, _ = eval_terms(f, vals, errs, x.bits, rho_0, derivative=True)
    return Real(float(t[0]), float(e[0]))


def I_n_x(x: CirclePoint, cf: ContinuedFraction, n: int, **kw) -> Real:
    """q_n * min_{0 <= j < q_n} ||x + j alpha||."""
    cf.require(n)
    q = cf.q[n]
    mn = circle.min_norm(x, 0, q - 1, cf, **kw)
    return Real(q * float(mn), q * mn.err_float + q * float(mn) * _EPS)


def truncated_roof_eval(f: RoofFunction, x: CirclePoint, cf: ContinuedFraction, n: int,
                        rho_0: float = RHO_0) -> Real:
    """f(x) when ||x|| >= 1/(q_n log^{7/8} q_n), else 0."""
    cf.require(n)
    v = circle.log_radius(1, 0.875, cf.q[n])
    order = circle.certain(circle.circle_norm(x).compare(v), "truncation boundary")
    if order is circle.TernaryOrder.LESS:
        return Real(0.0, 0.0)
    return roof_eval(f, x, rho_0)


def truncation_integral(f: RoofFunction, q, prec: int = 128) -> tuple["mpmath.mpf", "mpmath.mpf"]:
    """(f(1 - v) - f(v), (A_minus - A_plus + H/200) log q) for v = 1/(q log^{7/8} q).

    The first entry is the integral of the truncated derivative over the
    circle. ``q`` may be astronomically large (anything mpmath accepts).
    """
    from .shear import shear_H

    with mpmath.workprec(prec):
        q = mpmath.mpf(q)
        v = 1 / (q * mpmath.log(q) ** mpmath.mpf(0.875))
        A, B = mpmath.mpf(f.A_minus), mpmath.mpf(f.A_plus)

        def gv(t):
            return f.g_const if f.g_nodes is None else float(f.g(np.array([t]))[0])

        # f(1 - v) - f(v) with 1 - v never formed: it rounds to 1 for huge q
        near, far = mpmath.log(v), mpmath.log1p(-v)
        diff = (-A * far - B * near + gv(1.0)) - (-A * near - B * far + gv(0.0))
        bound = (A - B + mpmath.mpf(shear_H(f)) / 200) * mpmath.log(q)
        return diff, bound
