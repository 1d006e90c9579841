import csv

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arnoldlab import flow as fl
from arnoldlab.circle import CirclePoint, rotate
from arnoldlab.errors import DomainError
from arnoldlab.numeration import golden, silver
from arnoldlab.roof import birkhoff_sum, make_roof, roof_eval

F = make_roof(0.5, 0.25)
CF = golden(40)
PREC = 200


def mp_alpha(cf):
    cf = cf.extend(cf.depth + 150)
    with mpmath.workprec(PREC):
        x = mpmath.mpf(0)
        for a in reversed(cf.quotients):
            x = 1 / (a + x)
        return x


def naive_flow(f, p, t, cf):
    """Walk the orbit one roof at a time in high precision."""
    alpha = mp_alpha(cf)
    with mpmath.workprec(PREC):
        x = mpmath.mpf(p.x.value) / 2**64
        s = mpmath.mpf(p.s) + t
        m = 0

        def roof_at(k):
            u = (x + k * alpha) % 1
            return -f.A_minus * mpmath.log(u) - f.A_plus * mpmath.log(1 - u) + f.g_const

        while s >= roof_at(m):
            s -= roof_at(m)
            m += 1
        while s < 0:
            m -= 1
            s += roof_at(m)
        return m, float(s)


def sample(count, seed):
    pts, _ = fl.sample_flow_space(F, count, np.random.default_rng(seed))
    return pts


def test_zero_time_is_identity():
    for p in sample(50, 0):
        step = fl.flow(F, p, 0.0, CF)
        assert step.m == 0 and step.target.x == p.x and step.target.s == p.s


@pytest.mark.parametrize("t", [0.3, 7.5, 49.0, -0.2, -12.0, -50.0])
def test_flow_matches_naive_walk(t):
    for p in sample(15, 1):
        step = fl.flow(F, p, t, CF)
        m, s = naive_flow(F, p, t, CF)
        if step.residual == 0.0 and step.m == m + 1:
            # snapped to the later representative of the same point
            continue
        assert step.m == m
        assert abs(step.target.s - s) <= step.err + 1e-12


def test_flow_lands_on_rotated_base():
    p = sample(1, 2)[0]
    step = fl.flow(F, p, 20.0, CF)
    assert step.target.x.value == rotate(p.x, step.m, CF).value
    assert step.target.check(F)


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.integers(0, 10**6))
def test_flow_property(s, t, seed):
    p = sample(1, seed)[0]
    a = fl.flow(F, fl.flow(F, p, s, CF).target, t, CF)
    b = fl.flow(F, p, s + t, CF)
    d = fl.flow_distance(a.target, b.target)
    assert d.value <= d.err


@pytest.mark.parametrize("cf", [golden(40), silver(30)])
def test_special_return(cf):
    rng = np.random.default_rng(3)
    done = 0
    while done < 20:
        x = CirclePoint.random(rng)
        n = int(rng.integers(1, 14))
        r = fl.special_return(F, x, cf, n, float(rng.uniform(0, F.a)))
        if r.step is None:
            continue
        done += 1
        assert r.check
        assert r.t == pytest.approx(birkhoff_sum(F, x, cf.q[n], cf).value)


def test_swr_statistic_on_identical_points():
    p = sample(1, 4)[0]
    out = fl.swr_statistic(F, p, p, 1.0, 0.0, 0, 9, 1e-6, "forward", CF)
    assert out == {"fraction": 1.0, "count": 10, "close": 10, "indeterminate": 0}
    with pytest.raises(DomainError):
        fl.swr_statistic(F, p, p, 1.0, 0.0, 0, 9, 1e-6, "sideways", CF)


def test_flow_space_samples_lie_under_roof():
    pts, info = fl.sample_flow_space(F, 500, np.random.default_rng(5))
    assert len(pts) == 500
    assert all(0 <= p.s < roof_eval(F, p.x).value for p in pts)
    assert 0 < info["mass_defect"] < 1e-15


def test_trajectory_csv(tmp_path):
    p = sample(1, 6)[0]
    steps = [(k, 0.5 * k, fl.flow(F, p, 0.5 * k, CF)) for k in range(4)]
    path = tmp_path / "traj.csv"
    fl.write_trajectory_csv(path, steps)
    rows = list(csv.DictReader(open(path)))
    assert [int(r["n"]) for r in rows] == [0, 1, 2, 3]
    assert float(rows[0]["s"]) == p.s
