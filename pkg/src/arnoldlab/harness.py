"""Verification suites, pair sampling and reports.

Every suite is registered with its tier split: checks named in ``hard`` carry
an exact pass/fail verdict, everything else is a reported statistic. The
registry refuses records that cross the split.

Randomness comes from numpy's PCG64 (``numpy.random.default_rng``), seeded per
suite from ``(seed, crc32(suite name))`` so reports reproduce across platforms.
"""
from __future__ import annotations

import json
import math
import os
import time
import zlib
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import circle, flow as flowmod, numeration, roof, shear
from .circle import CirclePoint, TernaryOrder, WindowIndex, certain, e_window, log_radius
from .errors import BudgetError, DomainError, PreconditionError, PrecisionError
from .numeration import ContinuedFraction
from .roof import RHO_0

# --- fixtures ----------------------------------------------------------------------------


def _kv(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        k, _, v = part.partition("=")
        out[k.strip()] = float(v) if "." in v else int(v)
    return out


def random_cf(seed: int, depth: int = 25, max_quotient: int = 10) -> ContinuedFraction:
    rng = np.random.default_rng(seed)
    qs = rng.integers(1, max_quotient + 1, size=depth).tolist()
    return numeration.cf_from_quotients(qs, tail=1, label=f"random(seed={seed},depth={depth},max={max_quotient})")


def resolve_alpha(spec) -> ContinuedFraction:
    """Fixture names, ``name:k=v,...`` specs, CF JSON objects or a path to one.

    golden[:depth], silver[:depth], D_alpha:seed=,depth=,boost=,
    random:seed=,depth=,max=, cf:a1,a2,... (tail 1), value:<decimal> (exact, rational).
    """
    if isinstance(spec, ContinuedFraction):
        return spec
    if isinstance(spec, dict):
        return ContinuedFraction.from_json(json.dumps(spec))
    spec = str(spec).strip()
    if spec.startswith("{"):
        return ContinuedFraction.from_json(spec)
    if os.path.exists(spec):
        with open(spec) as fh:
            return ContinuedFraction.from_json(fh.read())
    name, _, rest = spec.partition(":")
    if name == "golden":
        return numeration.golden(int(rest) if rest else 40)
    if name == "silver":
        return numeration.silver(int(rest) if rest else 30)
    if name == "D_alpha":
        kw = _kv(rest)
        return numeration.make_D_alpha(int(kw.get("seed", 0)), int(kw.get("depth", 40)), float(kw.get("boost", 1.0)))
    if name == "random":
        kw = _kv(rest)
        return random_cf(int(kw.get("seed", 0)), int(kw.get("depth", 25)), int(kw.get("max", 10)))
    if name == "cf":
        return numeration.cf_from_quotients([int(a) for a in rest.split(",")], tail=1, label=spec)
    if name == "value":
        return numeration.cf_expand(Fraction(rest), 200, label=spec)
    raise DomainError(f"unknown alpha fixture {spec!r}")


SHEAR_ROOF = {"A_minus": 2.0, "A_plus": 1.0, "g": {"type": "constant", "c": 1.0}, "normalize": False}
FLOW_ROOF = {"A_minus": 0.5, "A_plus": 0.25, "normalize": True}


def resolve_roof(spec) -> roof.RoofFunction:
    if spec is None:
        spec = SHEAR_ROOF
    if isinstance(spec, roof.RoofFunction):
        return spec
    if isinstance(spec, str):
        if os.path.exists(spec):
            with open(spec) as fh:
                spec = fh.read()
        return roof.roof_from_json(spec)
    return roof.roof_from_json(json.dumps(spec))


# --- config and reports ---------------------------------------------------------------------


@dataclass
class SuiteConfig:
    alpha: object = "golden"
    roof: object = None
    precision_bits: int = 64
    max_precision_bits: int = circle.MAX_BITS
    rho_0: float = RHO_0
    suites: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)
    n_min: int = 1
    n_max: int = 20
    seed: int = 0
    params: dict = field(default_factory=dict)
    json_out: Optional[str] = None
    csv_out: Optional[str] = None

    def __post_init__(self):
        for name in ("precision_bits", "max_precision_bits", "rho_0", "n_max"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.n_min < 0 or self.n_min > self.n_max:
            raise DomainError("need 0 <= n_min <= n_max")
        if self.seed < 0 or self.seed >= 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        unknown = [s for s in self.suites if s not in REGISTRY]
        if unknown:
            raise DomainError(f"unknown suite(s): {', '.join(unknown)}")
        if any(int(v) <= 0 for v in self.samples.values()):
            raise DomainError("sample counts must be positive")

    @classmethod
    def from_json(cls, text: str) -> "SuiteConfig":
        data = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def count(self, suite: str, default: int) -> int:
        return int(self.samples.get(suite, default))

    def param(self, suite: str, key: str, default=None):
        return self.params.get(suite, {}).get(key, default)


@dataclass
class CheckRecord:
    suite: str
    name: str
    verdict: str  # pass | fail | reported
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    bound: Optional[object] = None
    margin: Optional[float] = None
    sample_size: Optional[int] = None


@dataclass
class SuiteReport:
    suites: list
    checks: list
    aggregate: dict
    environment: dict
    wall_time: float = 0.0

    @property
    def hard_failures(self) -> int:
        return sum(c.verdict == "fail" for c in self.checks)

    @property
    def ok(self) -> bool:
        return self.hard_failures == 0

    def records(self, suite: str, name: Optional[str] = None) -> list:
        return [c for c in self.checks if c.suite == suite and (name is None or c.name == name)]

    def to_dict(self, with_time: bool = True) -> dict:
        out = {"suites": self.suites, "checks": [asdict(c) for c in self.checks],
               "aggregate": self.aggregate, "environment": self.environment}
        if with_time:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, with_time: bool = True) -> str:
        return json.dumps(_jsonable(self.to_dict(with_time)), sort_keys=True, indent=1)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


@dataclass(frozen=True)
class Suite:
    fn: Callable
    hard: frozenset
    doc: str


REGISTRY: dict[str, Suite] = {}


def register(name: str, hard=(), doc: str = ""):
    def deco(fn):
        REGISTRY[name] = Suite(fn, frozenset(hard), doc or (fn.__doc__ or "").strip().splitlines()[0])
        return fn
    return deco


def suite_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def run_suite(config: SuiteConfig) -> SuiteReport:
    """Run the configured suites in order; precision exhaustion becomes a failed check."""
    t0 = time.perf_counter()
    before = dict(circle.retry_stats)
    checks: list[CheckRecord] = []
    for name in config.suites:
        suite = REGISTRY[name]
        rng = suite_rng(config.seed, name)
        try:
            records = list(suite.fn(config, rng))
        except PrecisionError as exc:
            records = [CheckRecord(name, "precision", "fail" if suite.hard else "reported",
                                   outputs={"error": str(exc)}, sample_size=0)]
        for rec in records:
            rec.suite = name
            hard = rec.name in suite.hard or (rec.name == "precision" and bool(suite.hard))
            if hard and rec.verdict not in ("pass", "fail"):
                raise RuntimeError(f"{name}/{rec.name}: hard check without a verdict")
            if not hard and rec.verdict != "reported":
                raise RuntimeError(f"{name}/{rec.name}: reported check carries a verdict")
            if not hard and rec.sample_size is None:
                raise RuntimeError(f"{name}/{rec.name}: reported check without a sample size")
        checks.extend(records)
    agg = {
        "checks": len(checks),
        "hard_pass": sum(c.verdict == "pass" for c in checks),
        "hard_fail": sum(c.verdict == "fail" for c in checks),
        "reported": sum(c.verdict == "reported" for c in checks),
    }
    env = {"precision_bits": config.precision_bits, "max_precision_bits": config.max_precision_bits,
           "rho_0": config.rho_0, "seed": config.seed,
           "retries": circle.retry_stats["retries"] - before["retries"],
           "max_bits_used": max(circle.retry_stats["max_bits"], config.precision_bits)}
    report = SuiteReport(list(config.suites), checks, agg, env, time.perf_counter() - t0)
    if config.json_out:
        with open(config.json_out, "w") as fh:
            fh.write(report.to_json())
    return report


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def _fixtures(config: SuiteConfig, suite: str) -> list[ContinuedFraction]:
    specs = config.param(suite, "fixtures")
    return [resolve_alpha(s) for s in specs] if specs else [resolve_alpha(config.alpha)]


# --- pair sampling --------------------------------------------------------------------------


def class_range(cf: ContinuedFraction, n_k: int, cls: str) -> tuple[float, float]:
    """Float proposal range for the orbit distance of a class (the classifier decides)."""
    q, Q = cf.q[n_k], cf.q[n_k + 1]
    if cls == "small":
        hi = 1 / (Q * math.log(Q))
        return hi / 8, hi
    if cls == "close":
        lo, hi = 5 / (6 * Q), 1 / (q * math.log(q))
        if lo >= hi:
            raise PreconditionError(f"close class is empty at order {n_k}: q_(n+1) < 5/6 q_n log q_n")
        return lo, hi
    if cls == "type_I":
        return 1 / (q * math.log(q)), 5 / (6 * q)
    if cls == "type_II":
        return 1 / (Q * math.log(Q)), 5 / (6 * Q)
    raise DomainError(f"no distance range for class {cls!r}")


def _window_for(set_id: str, cf: ContinuedFraction, n: int, params: Optional[dict]) -> WindowIndex:
    params = params or {}
    q = cf.q[n]
    v = log_radius(params.get("radius_scale", 1), 0.875, q)
    if set_id == "E_n":
        W = e_window(q, params.get("window_scale", 4))
        return WindowIndex(cf, -W, W, v)
    if set_id == "B_n":
        return WindowIndex(cf, -q, q - 1, v)
    raise DomainError(f"no window index for {set_id}")


def sample_pairs(alpha, n_k: int, class_filter: str, count: int, seed: int, *,
                 x_sets=(), y_sets=(), delta_range: Optional[tuple] = None,
                 max_proposals: Optional[int] = None, return_stats: bool = False):
    """Pairs (x, y) whose classification at order n_k matches ``class_filter``.

    ``class_filter`` is a pair class, ``good`` (small and close alternately)
    or ``off_orbit`` (any class but same_orbit, y drawn independently of x).
    ``x_sets``/``y_sets`` list ``(set_id, order, params)`` requirements; x is
    drawn directly from the clear part of the first window requirement.
    """
    if count < 1:
        raise PreconditionError("count must be at least 1")
    cf = resolve_alpha(alpha)
    cf.require(n_k + 1)
    rng = np.random.default_rng(seed)
    max_proposals = max_proposals or max(2000, 400 * count)
    x_idx = [(_window_for(s, cf, n, p), s, n, p) for s, n, p in x_sets if s in ("E_n", "B_n")]
    y_idx = [(_window_for(s, cf, n, p), s, n, p) for s, n, p in y_sets if s in ("E_n", "B_n")]
    x_exact = [t for t in x_sets if t[0] not in ("E_n", "B_n")]
    y_exact = [t for t in y_sets if t[0] not in ("E_n", "B_n")]
    q = cf.q[n_k]
    out: list[tuple[CirclePoint, CirclePoint]] = []
    proposals = 0

    def member(pt, reqs, idx):
        v = np.array([pt.value], dtype=np.uint64)
        for wi, s, n, p in idx:
            c = wi.clear(v)[0]
            if c is False:
                return False
            if c is None and not circle.set_membership(pt, s, cf, n, p):
                return False
        return all(circle.set_membership(pt, s, cf, n, p) for s, n, p in reqs)

    while len(out) < count:
        if proposals >= max_proposals:
            raise BudgetError(f"class {class_filter} at order {n_k}: {len(out)}/{count} pairs found",
                              len(out) / max(proposals, 1))
        proposals += 1
        if x_idx:
            x = CirclePoint(int(x_idx[0][0].sample_clear(rng, 1)[0]), 0, 64)
        else:
            x = CirclePoint.random(rng)
        if not member(x, x_exact, x_idx[1:] if x_idx else []):
            continue
        want = class_filter
        if class_filter == "good":
            want = GOOD_CYCLE[len(out) % 2]
        if want == "same_orbit":
            y = circle.rotate(x, int(rng.integers(-(q - 1), q)), cf)
        elif want == "off_orbit":
            y = CirclePoint.random(rng)
        else:
            lo, hi = delta_range or class_range(cf, n_k, want)
            delta = math.exp(rng.uniform(math.log(lo), math.log(hi)))
            step = int(delta * 2.0**64) * (1 if rng.random() < 0.5 else -1)
            y = CirclePoint((x.value + step) % (1 << 64), 0, 64)
        if not member(y, y_exact, y_idx):
            continue
        rep = shear.classify_pair(x, y, cf, n_k)
        if want == "off_orbit":
            if rep.pair_class == "same_orbit":
                continue
        elif rep.pair_class != want:
            continue
        out.append((x, y))
    if return_stats:
        return out, {"proposals": proposals, "acceptance_rate": count / proposals}
    return out


GOOD_CYCLE = ("small", "close")


# --- hard suites ---------------------------------------------------------------------------


def convergent_inequality(cf: ContinuedFraction, n: int) -> tuple[bool, float]:
    """1/(q_n + q_{n+1}) < ||q_n alpha|| < 1/q_{n+1}; returns (holds, relative margin)."""
    q, Q = cf.q[n], cf.q[n + 1]
    bits = 64
    while True:
        d = convergent_norm_at(cf, n, bits)
        lo = d.compare(Fraction(1, q + Q))
        hi = d.compare(Fraction(1, Q))
        if TernaryOrder.INDETERMINATE not in (lo, hi):
            break
        if bits >= circle.MAX_BITS:
            certain(TernaryOrder.INDETERMINATE, "convergent inequality")
        bits *= 2
    ok = lo is TernaryOrder.GREATER and hi is TernaryOrder.LESS
    v = d.fraction()
    margin = float(min(v - Fraction(1, q + Q), Fraction(1, Q) - v) * Q)
    return ok, margin


def convergent_norm_at(cf: ContinuedFraction, n: int, bits: int) -> circle.Fixed:
    q = cf.q[n]
    while (1 << (bits // 2)) < q or q >= 1 << (bits - circle.ERR_CAP_BITS - 1):
        bits *= 2
    x = circle.rotate(CirclePoint(0, 0, bits), q, cf, bits)
    return circle.circle_norm(x)


@register("convergent-inequality", hard={"convergent-inequality"})
def _suite_convergent(config, rng):
    """1/(q_n+q_{n+1}) < ||q_n alpha|| < 1/q_{n+1} for every n in range."""
    for cf in _fixtures(config, "convergent-inequality"):
        top = min(config.n_max, cf.depth - 1)
        lo_n = max(config.n_min, 1)
        results = [convergent_inequality(cf, n) for n in range(lo_n, top + 1)]
        bad = [n for n, (ok, _) in zip(range(lo_n, top + 1), results) if not ok]
        yield CheckRecord("", "convergent-inequality", _verdict(not bad),
                          inputs={"alpha": cf.label or str(cf.quotients[:8]), "n": [lo_n, top]},
                          outputs={"violations": bad, "checked": len(results)},
                          bound="1/(q_n+q_{n+1}) < ||q_n alpha|| < 1/q_{n+1}",
                          margin=min((m for _, m in results), default=None))


def legal_digit_strings(cf: ContinuedFraction, limit: int) -> list[tuple[int, tuple]]:
    """Every legal Ostrowski digit string of value <= limit, by depth-first search."""
    N = 0
    while cf.q[N + 1] <= limit:
        N += 1
    out = []

    def dfs(n, value, digits, next_digit):
        # digits for q_N ... q_{n+1} fixed; next_digit is the digit on q_{n+1}
        if n < 0:
            out.append((value, tuple(reversed(digits))))
            return
        cap = cf.a(n + 1) if n > 0 else cf.a(1) - 1
        for b in range(cap + 1):
            if next_digit == cf.a(n + 2) and b > 0:
                break
            v = value + b * cf.q[n]
            if v > limit:
                break
            dfs(n - 1, v, digits + [b], b)

    dfs(N, 0, [], 0)
    return out


def _trim(digits) -> tuple:
    out = tuple(digits)
    while out and out[-1] == 0:
        out = out[:-1]
    return out


@register("ostrowski", hard={"round-trip", "uniqueness"})
def _suite_ostrowski(config, rng):
    """Ostrowski expansions: exact round trip and brute-force uniqueness."""
    m_max = int(config.param("ostrowski", "m_max", 10**5))
    m_brute = int(config.param("ostrowski", "m_brute", 10**4))
    fixtures = _fixtures(config, "ostrowski")
    for cf in fixtures:
        while cf.q[cf.depth] <= m_max:
            cf = cf.extend(cf.depth + 10)
        bad = []
        for m in range(m_max + 1):
            d = numeration.ostrowski_expand(m, cf)
            if numeration.ostrowski_evaluate(d.digits, cf) != m or not numeration.ostrowski_is_legal(d.digits, cf):
                bad.append(m)
                if len(bad) > 10:
                    break
        yield CheckRecord("", "round-trip", _verdict(not bad), inputs={"alpha": cf.label, "m_max": m_max},
                          outputs={"failures": bad}, bound="evaluate(expand(m)) == m", margin=0.0)
    cf = fixtures[0]
    strings = legal_digit_strings(cf, m_brute)
    seen: dict[int, tuple] = {}
    dup = []
    for value, digits in strings:
        if value in seen:
            dup.append(value)
        seen[value] = digits
    missing = [m for m in range(m_brute + 1) if m not in seen]
    mismatch = []
    for m, digits in seen.items():
        if _trim(numeration.ostrowski_expand(m, cf).digits) != _trim(digits):
            mismatch.append(m)
    ok = not dup and not missing and not mismatch
    yield CheckRecord("", "uniqueness", _verdict(ok), inputs={"alpha": cf.label, "m_max": m_brute},
                      outputs={"legal_strings": len(strings), "duplicates": dup[:10], "missing": missing[:10],
                               "mismatch": mismatch[:10]},
                      bound="one legal digit string per m", margin=0.0)


STAIRCASE = ((Fraction(0), Fraction(1, 3)), (Fraction(1, 3), Fraction(1)), (Fraction(2, 3), Fraction(1, 2)))


def staircase_variation(steps=STAIRCASE) -> Fraction:
    """Variation on the circle: jumps between consecutive steps, including the wrap."""
    vals = [c for _, c in steps]
    return sum(abs(b - a) for a, b in zip(vals, vals[1:] + vals[:1]))


def _uint_sum(arr: np.ndarray) -> int:
    hi = (arr >> np.uint64(32)).sum(dtype=np.uint64)
    lo = (arr & np.uint64(0xFFFFFFFF)).sum(dtype=np.uint64)
    return (int(hi) << 32) + int(lo)


def dk_classical(x: CirclePoint, cf: ContinuedFraction, n: int, phi: str) -> tuple[Fraction, int, int]:
    """(|phi^(q_n)(x) - q_n int phi| as an exact rational, uncertainty in 2**-64 units, q_n).

    ``phi`` is ``identity`` or ``staircase``. Raises Indeterminate when an
    orbit point sits within its error of a discontinuity.
    """
    q = cf.q[n]
    vals, errs = circle.orbit(x, np.arange(q, dtype=np.int64), cf, 64)
    emax = int(errs.max()) if q else 0
    if phi == "identity":
        nrm = circle.norm_array(vals, 64)
        if int(nrm.min()) <= emax:
            raise circle.IndeterminateError("orbit point within error of the jump at 0")
        S = _uint_sum(vals)
        dev = abs(Fraction(S, 1 << 64) - Fraction(q, 2))
        return dev, _uint_sum(errs), q
    if phi == "staircase":
        cuts = [int(s * (1 << 64)) for s, _ in STAIRCASE[1:]]
        for c in cuts:
            if np.any(circle.norm_array(vals - np.uint64(c), 64) <= np.uint64(emax + 1)):
                raise circle.IndeterminateError("orbit point within error of a step")
        if np.any(circle.norm_array(vals, 64) <= np.uint64(emax)):
            raise circle.IndeterminateError("orbit point within error of the step at 0")
        idx = np.searchsorted(np.array(cuts, dtype=np.uint64), vals, side="right")
        counts = np.bincount(idx, minlength=len(STAIRCASE))
        total = sum(int(k) * c for k, (_, c) in zip(counts, STAIRCASE))
        mean = sum((end - start) * c for (start, c), end in
                   zip(STAIRCASE, [s for s, _ in STAIRCASE[1:]] + [Fraction(1)]))
        return abs(total - q * mean), 0, q
    raise DomainError(f"unknown test function {phi!r}")


@register("denjoy-koksma", hard={"identity", "staircase"})
def _suite_dk(config, rng):
    """|phi^(q_n)(x) - q_n int phi| <= Var(phi) for two bounded-variation phi."""
    count = config.count("denjoy-koksma", 100)
    bounds = {"identity": Fraction(1), "staircase": staircase_variation()}
    for cf in _fixtures(config, "denjoy-koksma"):
        top = min(config.n_max, cf.depth)
        xs = [CirclePoint.random(rng) for _ in range(count)]
        for phi, var in bounds.items():
            worst, bad, checked = Fraction(0), [], 0
            for n in range(max(config.n_min, 1), top + 1):
                for x in xs:
                    try:
                        dev, err, _ = dk_classical(x, cf, n, phi)
                    except circle.IndeterminateError:
                        continue
                    checked += 1
                    slack = Fraction(err, 1 << 64)
                    if dev + slack > var:
                        bad.append((n, float(dev)))
                    worst = max(worst, dev)
            yield CheckRecord("", phi, _verdict(not bad), inputs={"alpha": cf.label, "n_max": top, "x": count},
                              outputs={"worst": float(worst), "violations": bad[:10], "checked": checked},
                              bound=float(var), margin=float(var - worst))


@register("three-distance", hard={"spacing"})
def _suite_three_distance(config, rng):
    """Orbit segments of length q_n: min gap >= 1/(2q_n), max gap <= 2/q_n."""
    count = config.count("three-distance", 100)
    for cf in _fixtures(config, "three-distance"):
        top = min(config.n_max, cf.depth)
        bad, worst_min, worst_max = [], math.inf, 0.0
        xs = [CirclePoint.random(rng) for _ in range(count)]
        for n in range(max(config.n_min, 1), top + 1):
            q = cf.q[n]
            for x in xs:
                rep = circle.orbit_spacing_check(x, cf, n)
                if not rep.ok:
                    bad.append(n)
                if rep.min_gap is not None:
                    worst_min = min(worst_min, float(rep.min_gap) * 2 * q)
                worst_max = max(worst_max, float(rep.max_gap) * q / 2)
        yield CheckRecord("", "spacing", _verdict(not bad), inputs={"alpha": cf.label, "n_max": top, "x": count},
                          outputs={"violations": sorted(set(bad)), "min_gap_ratio": worst_min,
                                   "max_gap_ratio": worst_max},
                          bound="2 q_n min_gap >= 1, q_n max_gap / 2 <= 1",
                          margin=min(worst_min - 1, 1 - worst_max))


@register("distance-estimate", hard={"distance-estimate"})
def _suite_distance_estimate(config, rng):
    """d_k < 5/(6 q_{n_k}) for independently drawn off-orbit pairs."""
    count = config.count("distance-estimate", 1000)
    for cf in _fixtures(config, "distance-estimate"):
        orders = config.param("distance-estimate", "orders") or [max(config.n_min, 2), (config.n_min + config.n_max) // 2, config.n_max]
        for n in orders:
            n = min(n, cf.depth - 1)
            q = cf.q[n]
            bad, worst = 0, 0.0
            pairs = sample_pairs(cf, n, "off_orbit", count, int(rng.integers(2**63)))
            for x, y in pairs:
                rep = shear.classify_pair(x, y, cf, n)
                if not shear.distance_estimate_holds(rep, cf):
                    bad += 1
                worst = max(worst, rep.d_k * 6 * q / 5)
            yield CheckRecord("", "distance-estimate", _verdict(bad == 0),
                              inputs={"alpha": cf.label, "order": n, "q": q, "pairs": count},
                              outputs={"violations": bad, "worst_ratio": worst},
                              bound="d_k < 5/(6 q_n)", margin=1 - worst)


@register("flow", hard={"identity", "flow-property", "special-return"})
def _suite_flow(config, rng):
    """T_0 = id, T_t T_s = T_{s+t}, and special returns at t = f^(q_n)(x)."""
    f = resolve_roof(config.param("flow", "roof", FLOW_ROOF))
    cf = resolve_alpha(config.alpha)
    count = config.count("flow", 100)
    pts, _ = flowmod.sample_flow_space(f, count, rng, config.rho_0)
    ident = True
    for p in pts:
        st = flowmod.flow(f, p, 0.0, cf)
        ident &= st.m == 0 and st.target.x.value == p.x.value and st.target.s == p.s
    yield CheckRecord("", "identity", _verdict(ident), inputs={"points": count}, bound="T_0 p == p", margin=0.0)
    bad, worst = 0, 0.0
    for p in pts:
        s, t = rng.uniform(-50, 50, size=2)
        a = flowmod.flow(f, flowmod.flow(f, p, s, cf).target, t, cf)
        b = flowmod.flow(f, p, s + t, cf)
        d = flowmod.flow_distance(a.target, b.target)
        if d.value > d.err:
            bad += 1
        worst = max(worst, d.value - d.err)
    yield CheckRecord("", "flow-property", _verdict(bad == 0), inputs={"points": count, "range": [-50, 50]},
                      outputs={"violations": bad}, bound="d(T_t T_s p, T_{s+t} p) <= err", margin=-worst)
    n_top = min(config.param("flow", "special_n_max", 15), cf.depth)
    fails, overflow, done = 0, 0, 0
    while done < count:
        x = CirclePoint.random(rng)
        n = int(rng.integers(1, n_top + 1))
        s = float(rng.uniform(0, f.a))
        r = flowmod.special_return(f, x, cf, n, s)
        if r.step is None:
            overflow += 1
            continue
        done += 1
        fails += not r.check
    yield CheckRecord("", "special-return", _verdict(fails == 0), inputs={"samples": count, "n_max": n_top},
                      outputs={"mismatches": fails, "height_overflow": overflow},
                      bound="T_{f^(q_n)(x)}(x,s) == (x+q_n alpha, s)", margin=0.0)


@register("shear-constants", hard={"constants"})
def _suite_constants(config, rng):
    """H, P, d1, d2 by substitution for the configured roof."""
    f = resolve_roof(config.roof)
    c = shear.shear_constants(f, resolve_alpha(config.alpha))
    expect = config.param("shear-constants", "expect")
    ok = True
    if expect:
        got = c.to_dict()
        ok = all(abs(got[k] - v) <= 1e-12 if not isinstance(v, list) else True for k, v in expect.items())
    yield CheckRecord("", "constants", _verdict(ok), outputs=c.to_dict(), bound=expect, margin=0.0)


@register("diophantine", hard={"golden-D3", "D_alpha-D2", "D_alpha-D3", "D_alpha-D1"})
def _suite_diophantine(config, rng):
    """Finite-depth class checks on the golden and D_alpha fixtures."""
    depth = int(config.param("diophantine", "depth", 40))
    g = numeration.golden(depth + 2)
    passes = [d for d in range(1, depth + 1) if numeration.classify_alpha(g, "D3", d).passed]
    yield CheckRecord("", "golden-D3", _verdict(not passes), inputs={"depth": depth},
                      outputs={"depths_passing": passes}, bound="fails D3 at every depth", margin=0.0)
    spec = config.param("diophantine", "D_alpha", {"seed": 0, "boost": 1.0})
    cf = numeration.make_D_alpha(int(spec.get("seed", 0)), depth + 2, float(spec.get("boost", 1.0)))
    for cls, name in (("D2", "D_alpha-D2"), ("D3", "D_alpha-D3"), ("D1", "D_alpha-D1")):
        v = numeration.classify_alpha(cf, cls, depth)
        yield CheckRecord("", name, _verdict(v.passed), inputs={"alpha": cf.label, "depth": depth},
                          outputs=v.to_dict(), bound=cls, margin=0.0)


# --- reported suites ----------------------------------------------------------------------


@register("measure-preservation")
def _suite_measure(config, rng):
    """KS and chi-square checks on flow-space samples pushed by t = pi e."""
    f = resolve_roof(config.param("measure-preservation", "roof", FLOW_ROOF))
    cf = resolve_alpha(config.alpha)
    count = config.count("measure-preservation", 10_000)
    t = float(config.param("measure-preservation", "t", math.pi * math.e))
    pts, info = flowmod.sample_flow_space(f, count, rng, config.rho_0)
    moved = [flowmod.flow(f, p, t, cf).target for p in pts]
    xs = np.array([float(p.x) for p in moved])
    hs = np.array([p.s / roof_eval_float(f, p.x) for p in moved])
    ks = stats.kstest(f.marginal_cdf(xs), "uniform")
    counts = np.histogram(np.clip(hs, 0, 1 - 1e-16), bins=20, range=(0, 1))[0]
    chi = stats.chisquare(counts)
    sig = float(config.param("measure-preservation", "significance", 0.01))
    yield CheckRecord("", "measure-preservation", "reported", inputs={"t": t, "samples": count},
                      outputs={"ks_p": float(ks.pvalue), "chi2_p": float(chi.pvalue), "significance": sig,
                               "meets_criterion": bool(ks.pvalue >= sig and chi.pvalue >= sig),
                               "mass_defect": info["mass_defect"], "proposals": info["proposals"]},
                      sample_size=count)


def roof_eval_float(f, x: CirclePoint) -> float:
    return roof.roof_eval(f, x).value


@register("denjoy-koksma-singular")
def _suite_dk_singular(config, rng):
    """C_emp = max |f^(q_n)(x) - q_n| / (log q_n + |log I_{n,x}|) over two half-samples."""
    f = resolve_roof(config.param("denjoy-koksma-singular", "roof", FLOW_ROOF))
    cf = resolve_alpha(config.alpha)
    count = config.count("denjoy-koksma-singular", 500)
    top = min(config.param("denjoy-koksma-singular", "n_max", 18), cf.depth)
    ns = [n for n in range(1, top + 1) if cf.q[n] >= 3]
    ratios = []
    for _ in range(count):
        x = CirclePoint.random(rng)
        n = int(rng.choice(ns))
        q = cf.q[n]
        b = roof.birkhoff_sum(f, x, q, cf, rho_0=config.rho_0)
        I = roof.I_n_x(x, cf, n)
        ratios.append(abs(b.value - q * f.integral) / (math.log(q) + abs(math.log(I.value))))
    half = count // 2
    c1, c2 = max(ratios[:half]), max(ratios[half:])
    spread = abs(c1 - c2) / max(c1, c2)
    yield CheckRecord("", "C_emp", "reported", inputs={"samples": count, "n_max": top},
                      outputs={"C_emp": max(c1, c2), "half_1": c1, "half_2": c2, "relative_spread": spread,
                               "meets_criterion": spread <= 0.2},
                      sample_size=count)


@register("derivative-window")
def _suite_derivative(config, rng):
    """|f'^(m)(x)| / (m log m) near A_minus - A_plus for x off Sigma_n(M)."""
    f = resolve_roof(config.roof)
    cf = resolve_alpha(config.alpha)
    eps = float(config.param("derivative-window", "eps", 0.1))
    M = Fraction(config.param("derivative-window", "M", "1/8"))
    n = int(config.param("derivative-window", "order", 20))
    count = config.count("derivative-window", 300)
    cf.require(n + 1)
    q, Q = cf.q[n], cf.q[n + 1]
    lo, hi = max(2, math.ceil(eps**4 * q)), max(2, Q // 8)
    target = f.A_minus - f.A_plus
    hits, ratios, signs, skipped = 0, [], 0, 0
    while len(ratios) < count:
        x = CirclePoint.random(rng)
        if circle.set_membership(x, "Sigma_n", cf, n, {"M": M}):
            skipped += 1
            continue
        m = int(rng.integers(lo, hi + 1))
        d = roof.birkhoff_derivative_sum(f, x, m, cf, rho_0=config.rho_0)
        r = d.value / (m * math.log(m))
        ratios.append(r)
        signs += r < 0
        hits += abs(abs(r) - target) <= eps**2
    frac = hits / count
    yield CheckRecord("", "derivative-window", "reported",
                      inputs={"order": n, "q": q, "m_range": [lo, hi], "eps": eps, "M": float(M)},
                      outputs={"fraction_in_window": frac, "meets_criterion": frac >= 0.9,
                               "negative_fraction": signs / count, "median_ratio": float(np.median(ratios)),
                               "sigma_rejected": skipped},
                      sample_size=count)


def reference_difference(f, x: CirclePoint, y: CirclePoint, cf: ContinuedFraction, N: int) -> float:
    """f^(N)(x) - f^(N)(y) by a plain loop over the orbit, one term at a time."""
    alpha, _ = cf.fixed_point(64)
    mod = 1 << 64
    A, B = f.A_minus, f.A_plus
    if N >= 0:
        idx, sgn = range(N), 1.0
    else:
        idx, sgn = range(N, 0), -1.0
    terms = []
    for i in idx:
        for base, s in ((x.value, 1.0), (y.value, -1.0)):
            v = (base + i * alpha) % mod
            u, w = v / mod, (mod - v) / mod
            g = float(f.g(np.array([u]))[0]) if f.g_nodes is not None else f.g_const
            terms.append(s * (-A * math.log(u) - B * math.log(w) + g))
    return sgn * math.fsum(terms)


@register("small-shearing", hard={"oracle"})
def _suite_small(config, rng):
    """Small-shearing search on synthesized good pairs, with direct re-summation."""
    f = resolve_roof(config.roof)
    cf = resolve_alpha(config.param("small-shearing", "alpha", "D_alpha:seed=0,depth=40,boost=4"))
    n_k = int(config.param("small-shearing", "order", 12))
    zeta = float(config.param("small-shearing", "zeta", 0.05))
    count = config.count("small-shearing", 100)
    oracle_check = bool(config.param("small-shearing", "oracle", True))
    pairs = sample_pairs(cf, n_k, "good", count, int(rng.integers(2**63)),
                         y_sets=[("E_n", n_k, None)])
    consts = shear.shear_constants(f, cf)
    rows, oracle_bad, oracle_gap = [], 0, 0.0
    for x, y in pairs:
        rep = shear.classify_pair(x, y, cf, n_k)
        out = shear.small_shearing_search(f, x, y, cf, n_k, zeta)
        ok_p = out.success and consts.P_distance(out.p) == 0 and abs(out.ell0) <= out.ell_cap
        gap = None
        if out.success and oracle_check:
            ref = reference_difference(f, x, y, cf, out.ell0 * cf.q[out.m])
            gap = abs(ref - out.difference)
            oracle_gap = max(oracle_gap, gap / max(out.err, 1e-300))
            oracle_bad += gap > 2 * out.err
        rows.append({"class": rep.pair_class, "success": ok_p, "ell0": out.ell0, "m": out.m,
                     "p": out.p, "residual": out.residual, "direction": out.direction,
                     "x_in_B_m": out.x_in_B_m, "oracle_gap": gap})
    rate = sum(r["success"] for r in rows) / len(rows)
    yield CheckRecord("", "success-rate", "reported",
                      inputs={"alpha": cf.label, "order": n_k, "q": cf.q[n_k], "Q": cf.q[n_k + 1], "zeta": zeta},
                      outputs={"success_rate": rate, "meets_criterion": rate >= 0.8,
                               "by_class": {c: sum(r["success"] for r in rows if r["class"] == c) for c in GOOD_CYCLE},
                               "pairs": rows},
                      sample_size=len(rows))
    if oracle_check:
        yield CheckRecord("", "oracle", _verdict(oracle_bad == 0), inputs={"pairs": len(rows)},
                          outputs={"mismatches": oracle_bad, "worst_gap_over_err": oracle_gap},
                          bound="|direct - search| <= 2 err", margin=2 - oracle_gap)


@register("large-shearing", hard={"straddle", "two-way"})
def _suite_large(config, rng):
    """Large shearing on type-I pairs with the E-window preconditions."""
    f = resolve_roof(config.roof)
    cf = resolve_alpha(config.param("large-shearing", "alpha", "D_alpha:seed=0,depth=40,boost=4"))
    n_k = int(config.param("large-shearing", "order", 13))
    cls = config.param("large-shearing", "class", "type_I")
    count = config.count("large-shearing", 100)
    pairs = sample_pairs(cf, n_k, cls, count, int(rng.integers(2**63)),
                         x_sets=[("E_n", n_k, None), ("E_n", n_k + 1, None)], y_sets=[("E_n", n_k, None)])
    outs = [shear.large_shearing_check(f, x, y, cf, n_k) for x, y in pairs]
    n = len(outs)
    upper = sum(o.upper_ok for o in outs) / n
    lower = sum(o.lower_ok for o in outs) / n
    yield CheckRecord("", "bounds", "reported", inputs={"alpha": cf.label, "order": n_k, "q": cf.q[n_k], "class": cls},
                      outputs={"upper_fraction": upper, "lower_fraction": lower,
                               "meets_criterion": upper == 1.0 and lower >= 0.9,
                               "d1": outs[0].d1, "d2_log_q": outs[0].d2_log_q,
                               "delta_min": min(o.delta for o in outs), "delta_max": max(o.delta for o in outs)},
                      sample_size=n)
    worst = max(len(o.straddle) for o in outs)
    yield CheckRecord("", "straddle", _verdict(worst <= 2), inputs={"pairs": n},
                      outputs={"max_straddle": worst,
                               "histogram": {k: sum(len(o.straddle) == k for o in outs) for k in range(worst + 1)}},
                      bound=2, margin=2 - worst)
    gap = max(abs(o.delta - o.delta_split) - (o.delta_err + o.split_err) for o in outs)
    yield CheckRecord("", "two-way", _verdict(gap <= 0), inputs={"pairs": n},
                      outputs={"worst_excess": gap}, bound="direct vs I1+J1 within err", margin=-gap)


def summary_rows(report: SuiteReport) -> list[dict]:
    """CSV summary rows: order_k, class, count, success_rate, mean_residual."""
    rows = []
    for rec in report.records("small-shearing", "success-rate"):
        pairs = rec.outputs["pairs"]
        for cls in GOOD_CYCLE:
            sel = [p for p in pairs if p["class"] == cls]
            if sel:
                res = [p["residual"] for p in sel if p["success"]]
                rows.append({"order_k": rec.inputs["order"], "class": cls, "count": len(sel),
                             "success_rate": sum(p["success"] for p in sel) / len(sel),
                             "mean_residual": float(np.mean(res)) if res else math.nan})
    for rec in report.records("large-shearing", "bounds"):
        rows.append({"order_k": rec.inputs["order"], "class": rec.inputs["class"], "count": rec.sample_size,
                     "success_rate": rec.outputs["lower_fraction"], "mean_residual": math.nan})
    return rows
