"""Continued fractions, Ostrowski numeration and Diophantine class checks.

Everything here is exact integer arithmetic. A rotation number is carried as
its list of partial quotients; the float value is never the source of truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import DomainError, InsufficientDepthError

CLASS_NAMES = ("D-prime-a", "D-prime-b", "D1", "D2", "D3", "badly-approximable-Xi")


@dataclass(frozen=True)
class ContinuedFraction:
    """alpha = [0; a_1, a_2, ...] with exact convergents p_n/q_n, n = 0..N.

    ``tail`` is the quotient repeated forever after the stored ones, which
    makes alpha a quadratic irrational; ``tail=None`` means alpha is the
    rational value of the finite expansion.
    """

    quotients: tuple[int, ...]
    tail: Optional[int] = 1
    label: str = ""
    p: tuple[int, ...] = field(init=False, repr=False, compare=False)
    q: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        quotients = tuple(int(a) for a in self.quotients)
        if not quotients:
            raise DomainError("continued fraction needs at least one quotient")
        if any(a < 1 for a in quotients):
            raise DomainError(f"partial quotients must be positive: {quotients}")
        if self.tail is not None and self.tail < 1:
            raise DomainError("tail quotient must be positive")
        ps, qs = _convergents(quotients)
        object.__setattr__(self, "quotients", quotients)
        object.__setattr__(self, "p", ps)
        object.__setattr__(self, "q", qs)

    @property
    def depth(self) -> int:
        return len(self.quotients)

    @property
    def convergents(self) -> list[tuple[int, int]]:
        return list(zip(self.p, self.q))

    def a(self, n: int) -> int:
        """Partial quotient a_n (n >= 1), using the tail beyond the stored ones."""
        if n < 1:
            raise DomainError("partial quotients are indexed from 1")
        if n <= self.depth:
            return self.quotients[n - 1]
        if self.tail is None:
            raise InsufficientDepthError(f"a_{n} unavailable: rational with {self.depth} quotients")
        return self.tail

    def extend(self, depth: int) -> "ContinuedFraction":
        """Copy with at least ``depth`` stored quotients (tail-filled)."""
        if depth <= self.depth:
            return self
        if self.tail is None:
            raise InsufficientDepthError(f"cannot extend a rational expansion past {self.depth}")
        extra = (self.tail,) * (depth - self.depth)
        return ContinuedFraction(self.quotients + extra, self.tail, self.label)

    def require(self, n: int) -> None:
        if n > self.depth:
            raise InsufficientDepthError(f"index {n} needs more than the {self.depth} stored quotients")

    @property
    def is_rational(self) -> bool:
        return self.tail is None

    def fraction(self) -> Fraction:
        """Value of the stored expansion p_N/q_N."""
        return Fraction(self.p[-1], self.q[-1])

    def fixed_point(self, bits: int) -> tuple[int, int]:
        """(floor(alpha * 2**bits), err_ulps) with |alpha*2**bits - value| <= err_ulps."""
        return _alpha_fixed(self.quotients, self.tail, bits)

    def __float__(self) -> float:
        value, _ = self.fixed_point(64)
        return value / 2.0**64

    def to_json(self) -> str:
        return json.dumps({"quotients": list(self.quotients), "label": self.label, "tail": self.tail})

    @classmethod
    def from_json(cls, text: str) -> "ContinuedFraction":
        data = json.loads(text)
        return cls(tuple(data["quotients"]), data.get("tail", 1), data.get("label", ""))


def _convergents(quotients: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    ps, qs = [0], [1]
    p_prev, q_prev = 1, 0
    for a in quotients:
        p_new = a * ps[-1] + p_prev
        q_new = a * qs[-1] + q_prev
        p_prev, q_prev = ps[-1], qs[-1]
        ps.append(p_new)
        qs.append(q_new)
    return tuple(ps), tuple(qs)


def _sqrt_ge(u: int, v: int, d: int) -> bool:
    """Exact test u*sqrt(d) >= v for integers, d > 0 not a perfect square."""
    if u >= 0 and v <= 0:
        return True
    if u <= 0 and v > 0:
        return False
    if u >= 0:  # both positive
        return u * u * d >= v * v
    return u * u * d <= v * v  # both negative


_ALPHA_CACHE: dict = {}


def _alpha_fixed(quotients: tuple[int, ...], tail: Optional[int], bits: int) -> tuple[int, int]:
    key = (quotients, tail, bits)
    hit = _ALPHA_CACHE.get(key)
    if hit is not None:
        return hit
    ps, qs = _convergents(quotients)
    scale = 1 << bits
    if tail is None:
        num = ps[-1] * scale
        value, rem = divmod(num, qs[-1])
        result = (value, 0 if rem == 0 else 1)
    else:
        # alpha = (p_N t + p_{N-1}) / (q_N t + q_{N-1}), t = (c + sqrt(c^2+4))/2
        c = tail
        disc = c * c + 4
        a_num = ps[-1] * c + 2 * ps[-2]
        b_den = qs[-1] * c + 2 * qs[-2]
        # alpha = (a_num + p_N s) / (b_den + q_N s), s = sqrt(disc)
        guard = bits + 2 * qs[-1].bit_length() + 64
        s_fix = math.isqrt(disc << (2 * guard))
        approx = ((a_num << guard) + ps[-1] * s_fix) * scale // ((b_den << guard) + qs[-1] * s_fix)
        value = approx
        # exact floor: value <= alpha*2^bits < value + 1
        for _ in range(4):
            if not _sqrt_ge(ps[-1] * scale - value * qs[-1], value * b_den - a_num * scale, disc):
                value -= 1
            elif _sqrt_ge(ps[-1] * scale - (value + 1) * qs[-1], (value + 1) * b_den - a_num * scale, disc):
                value += 1
            else:
                break
        else:  # pragma: no cover - isqrt guard makes this unreachable
            raise ArithmeticError("fixed-point alpha did not converge")
        result = (value, 1)
    _ALPHA_CACHE[key] = result
    return result


def cf_expand(value, max_depth: int, label: str = "") -> ContinuedFraction:
    """Euclidean-algorithm expansion of a rational in (0, 1)."""
    value = Fraction(value)
    if not 0 < value < 1:
        raise DomainError(f"value must lie in (0, 1), got {value}")
    if max_depth < 1:
        raise DomainError("max_depth must be positive")
    num, den = value.numerator, value.denominator
    quotients = []
    while num and len(quotients) < max_depth:
        a, rem = divmod(den, num)
        quotients.append(a)
        den, num = num, rem
    return ContinuedFraction(tuple(quotients), tail=None, label=label or str(value))


def cf_from_quotients(quotients: Sequence[int], tail: Optional[int] = 1, label: str = "") -> ContinuedFraction:
    if len(quotients) == 0:
        raise DomainError("empty quotient list")
    return ContinuedFraction(tuple(quotients), tail=tail, label=label)


def golden(depth: int = 40) -> ContinuedFraction:
    return ContinuedFraction((1,) * depth, tail=1, label="golden")


def silver(depth: int = 30) -> ContinuedFraction:
    return ContinuedFraction((2,) * depth, tail=2, label="silver")


# --- Ostrowski numeration -------------------------------------------------


@dataclass(frozen=True)
class OstrowskiDigits:
    """m = sum b_n q_n; ``digits[n]`` multiplies q_n, n = 0..k."""

    digits: tuple[int, ...]
    value: int

    def nonzero(self) -> dict[int, int]:
        return {n: b for n, b in enumerate(self.digits) if b}


def ostrowski_evaluate(digits: Sequence[int], cf: ContinuedFraction) -> int:
    return sum(b * cf.q[n] for n, b in enumerate(digits))


def ostrowski_is_legal(digits: Sequence[int], cf: ContinuedFraction) -> bool:
    """Digit bounds: b_0 < a_1, b_n <= a_{n+1}, and b_n = a_{n+1} forces b_{n-1} = 0."""
    for n, b in enumerate(digits):
        bound = cf.a(n + 1) - (1 if n == 0 else 0)
        if b < 0 or b > bound:
            return False
        if n >= 1 and b == cf.a(n + 1) and digits[n - 1] != 0:
            return False
    return True


def ostrowski_expand(m: int, cf: ContinuedFraction) -> OstrowskiDigits:
    """Greedy expansion: take the largest q_n not exceeding the remainder."""
    if m < 0:
        raise DomainError("Ostrowski expansion needs m >= 0")
    top = cf.depth
    if m >= cf.q[top]:
        raise InsufficientDepthError(f"m={m} needs q beyond q_{top}={cf.q[top]}")
    digits = [0] * top
    rem = m
    for n in range(top - 1, -1, -1):
        if cf.q[n] <= rem:
            # q_0 = q_1 = 1 when a_1 = 1; digit at n = 0 is then empty
            if n == 0 and cf.a(1) == 1:
                continue
            digits[n], rem = divmod(rem, cf.q[n])
    if rem:
        raise ArithmeticError(f"greedy expansion left remainder {rem}")
    while len(digits) > 1 and digits[-1] == 0:
        digits.pop()
    result = tuple(digits)
    if not ostrowski_is_legal(result, cf):
        raise ArithmeticError(f"greedy digits {result} violate the carry rule")
    return OstrowskiDigits(result, m)


# --- Diophantine classes --------------------------------------------------


@dataclass(frozen=True)
class DiophantineVerdict:
    class_name: str
    depth: int
    passed: bool
    witness: object = None
    partial_sum: Optional[float] = None
    skipped: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "class_name": self.class_name,
            "depth": self.depth,
            "passed": self.passed,
            "witness": self.witness,
            "partial_sum": self.partial_sum,
            "skipped": list(self.skipped),
        }


def classify_alpha(cf: ContinuedFraction, class_name: str, depth: int, *,
                   C_alpha: Optional[float] = None, tau: float = 0.0,
                   grid: int = 32, max_orbit: int = 2_000_000) -> DiophantineVerdict:
    """Finite-depth check of one Diophantine condition over n = 1..depth.

    ``passed`` only ever means "no violation found up to depth".
    """
    if class_name not in CLASS_NAMES:
        raise DomainError(f"unknown class {class_name!r}; expected one of {CLASS_NAMES}")
    if depth < 0:
        raise DomainError("depth must be non-negative")
    if depth == 0:
        return DiophantineVerdict(class_name, 0, True)
    cf.require(depth + 1)
    q = cf.q
    # log q_n is 0 or tiny for q_n <= e: those indices are skipped and listed
    usable = [n for n in range(1, depth + 1) if q[n] > math.e]
    skipped = tuple(n for n in range(1, depth + 1) if q[n] <= math.e)

    if class_name in ("D1", "D-prime-a"):
        outside = [n for n in usable if not q[n + 1] < q[n] * math.log(q[n]) ** 0.875]
        terms = [1.0 / math.log(q[n]) ** 0.875 for n in outside]
        increments_ok = all(b <= a for a, b in zip(terms, terms[1:]))
        return DiophantineVerdict(class_name, depth, increments_ok, witness=outside,
                                  partial_sum=math.fsum(terms), skipped=skipped)

    if class_name == "D-prime-b":
        ratios = [q[n + 1] / q[n] ** (1.0 + tau) for n in range(1, depth + 1)]
        worst = max(ratios)
        passed = True if C_alpha is None else all(r < C_alpha for r in ratios)
        return DiophantineVerdict(class_name, depth, passed, witness={"tau": tau, "C_alpha": worst})

    if class_name == "D2":
        ratios = {n: q[n + 1] / (q[n] * math.log(q[n]) ** 1.5) for n in usable}
        worst = max(ratios.values(), default=0.0)
        if C_alpha is None:
            passed = True
            witness = {"C_alpha": worst}
        else:
            bad = [n for n, r in ratios.items() if not r < C_alpha]
            passed = not bad
            witness = {"C_alpha": C_alpha, "violations": bad}
        return DiophantineVerdict(class_name, depth, passed, witness=witness, skipped=skipped)

    if class_name == "D3":
        # below e^e the loglog factor is < 1 and the condition is weaker than log q
        usable3 = [n for n in usable if q[n] >= math.e ** math.e]
        skipped3 = tuple(n for n in range(1, depth + 1) if n not in usable3)
        hits = [n for n in usable3
                if q[n + 1] >= q[n] * math.log(q[n]) * math.log(math.log(q[n]))]
        return DiophantineVerdict(class_name, depth, bool(hits), witness=hits or None, skipped=skipped3)

    # badly approximable singularity set {0} with C = 2
    from .circle import badly_approx_count

    bad, skipped_big = [], []
    for s in range(1, depth + 1):
        if q[s] > max_orbit:
            skipped_big.append(s)
            continue
        for g in range(grid):
            if badly_approx_count(Fraction(2 * g + 1, 2 * grid), cf, s) > 1:
                bad.append(s)
                break
    return DiophantineVerdict(class_name, depth, not bad, witness=bad or None,
                              skipped=tuple(skipped_big))


def make_D_alpha(seed: int, depth: int, boost: float = 1.0) -> ContinuedFraction:
    """Quotients 1 except at sparse indices n_k, where a_{n_k+1} is large.

    Index n is sparse once log^{7/8} q_n >= k^2 (k = sparse count so far, plus
    one) and n has the seed's parity phase; there
    a_{n+1} = ceil(boost * log q_n loglog q_n), which puts n in the D3
    subsequence while keeping q_{n+1} <= C q_n log^{3/2} q_n. ``boost`` > 1
    reaches large ratios q_{n+1}/q_n at moderate q_n.
    """
    if depth < 3:
        raise DomainError("make_D_alpha needs depth >= 3")
    phase = seed % 2
    quotients: list[int] = []
    q_prev, q_cur = 0, 1
    k = 1
    last_sparse = -10
    for n in range(0, depth):
        # choose a_{n+1} knowing q_n = q_cur
        a = 1
        if (q_cur > math.e ** math.e and n % 2 == phase and n - last_sparse >= 3
                and math.log(q_cur) ** 0.875 >= k * k):
            loglog = math.log(math.log(q_cur))
            a = math.ceil(boost * math.log(q_cur) * loglog)
            k += 1
            last_sparse = n
        quotients.append(a)
        q_prev, q_cur = q_cur, a * q_cur + q_prev
    return ContinuedFraction(tuple(quotients), tail=1, label=f"D_alpha(seed={seed},depth={depth},boost={boost:g})")
