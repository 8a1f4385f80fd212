import json

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from setbarrier.dynsys import (BENCHMARK_NAMES, benchmark, expr_eval, expr_range, flow_enclose,
                               load_system, parse_expr, sin, system_from_dict, variables)
from setbarrier.dynsys.benchmarks import PERUFFO_WEIGHTS
from setbarrier.errors import DimensionError, InvalidInputError, NumericDomainError
from setbarrier.setcore import IntervalVector, Zonotope, zono_from_interval, zono_interval_hull

from oracles import sample_box

ALL = [("three-sets", None), ("two-barriers", None), ("peruffo", 4), ("peruffo", 6),
       ("peruffo", 8), ("darboux", None), ("polynomial", None), ("lyapunov", None),
       ("exponential", None), ("ratschan", 3), ("ratschan", 5), ("ratschan", 7), ("ratschan", 9)]


def test_eval_examples():
    darboux = benchmark("darboux")
    assert expr_eval(darboux.dynamics[0], [1.0, 1.0]) == 3.0
    expo = benchmark("exponential")
    assert expr_eval(expo.dynamics[0], [0.0, 1.0]) == 1.0
    assert expr_eval(parse_expr("0"), [5.0]) == 0.0


def test_division_by_zero():
    e = parse_expr("1 / x1")
    with pytest.raises(NumericDomainError):
        expr_eval(e, [0.0])
    with pytest.raises(NumericDomainError):
        expr_range(e, IntervalVector([-1], [1]))


def test_range_examples():
    (x1,) = variables(1)
    r = expr_range(sin(x1), IntervalVector([0], [np.pi]))
    assert r.lo == pytest.approx(0.0, abs=1e-15) and r.hi == 1.0
    a, b = variables(2)
    r = expr_range(a * b, IntervalVector([-1, -1], [1, 1]))
    assert (r.lo, r.hi) == (-1.0, 1.0)


def test_random_cubic_range(rng):
    e = parse_expr("x1^3 - 2*x1*x2 + 0.5*x2^2 - x1")
    for _ in range(20):
        lo = rng.uniform(-3, 1, 2)
        hi = lo + rng.uniform(0, 2, 2)
        r = expr_range(e, IntervalVector(lo, hi))
        v = expr_eval(e, sample_box(rng, lo, hi, 500))
        assert np.all((v >= r.lo - 1e-12) & (v <= r.hi + 1e-12))


@pytest.mark.parametrize("name,size", ALL)
def test_benchmark_range_soundness(name, size, rng):
    sys_ = benchmark(name, size)
    X = sys_.state_space
    bad = 0
    for _ in range(100):
        a = sample_box(rng, X.lo, X.hi, 2)
        lo, hi = a.min(0), a.max(0)
        x = sample_box(rng, lo, hi, 1000)
        flo, fhi = sys_.f_range(lo, hi)
        fx = sys_.f(x)
        bad += int(np.sum((fx < flo - 1e-12) | (fx > fhi + 1e-12)))
    assert bad == 0


@pytest.mark.parametrize("name,size", [("darboux", None), ("exponential", None), ("ratschan", 3),
                                       ("lyapunov", None)])
def test_flow_monotone_in_subsplits(name, size, rng):
    sys_ = benchmark(name, size)
    X = sys_.state_space
    for _ in range(10):
        a = sample_box(rng, X.lo, X.hi, 2)
        Z = zono_from_interval(IntervalVector(a.min(0), a.max(0)))
        prev = zono_interval_hull(flow_enclose(sys_, Z, 0))
        for k in range(1, 4):
            cur = zono_interval_hull(flow_enclose(sys_, Z, k))
            assert cur.is_subset(prev, tol=1e-12)
            prev = cur


@pytest.mark.parametrize("name,size", [("two-barriers", None), ("peruffo", 4), ("three-sets", None)])
def test_linear_exactness(name, size, rng):
    sys_ = benchmark(name, size)
    assert sys_.is_linear and sys_.default_subsplits == 0
    Z = Zonotope(sys_.state_space.center, rng.normal(size=(sys_.dim, 3)) * 0.1)
    F = flow_enclose(sys_, Z)
    beta = rng.uniform(-1, 1, (200, 3))
    np.testing.assert_allclose(F.expand(beta), sys_.f(Z.expand(beta)), rtol=1e-12, atol=1e-12)


def test_flow_examples():
    tb = benchmark("two-barriers")
    F = flow_enclose(tb, Zonotope([1, 1], np.diag([0.3, 0.3])))
    np.testing.assert_array_equal(F.center, [-1, -1])
    np.testing.assert_array_equal(np.abs(F.generators), np.diag([0.3, 0.3]))
    ts = benchmark("three-sets")
    h = zono_interval_hull(flow_enclose(ts, Zonotope([2, 3], np.diag([0.3, 0.3]))))
    assert h.lo[0] == 0.0 and h.hi[0] == 0.0


def test_benchmark_examples():
    p = benchmark("polynomial")
    assert p.state_space == IntervalVector([-3.5, -2], [2, 1])
    assert zono_interval_hull(p.initial_sets[0]) == IntervalVector([1, -0.5], [2, 0.5])
    h = zono_interval_hull(p.unsafe_sets[0])
    np.testing.assert_allclose(h.lo, [-1.4, -1.4], atol=1e-15)
    np.testing.assert_allclose(h.hi, [-0.6, -0.6], atol=1e-15)
    t = benchmark("three-sets")
    assert len(t.unsafe_sets) == 2
    h = zono_interval_hull(t.initial_sets[0])
    np.testing.assert_allclose(h.lo, [1.7, 2.7], atol=1e-15)
    np.testing.assert_allclose(h.hi, [2.3, 3.3], atol=1e-15)
    r = benchmark("ratschan", 3)
    assert r.state_space == IntervalVector([-0.3] * 3, [0.3] * 3)
    h = zono_interval_hull(r.unsafe_sets[0])
    np.testing.assert_allclose(h.lo, [-0.2, -0.3, -0.3], atol=1e-15)
    np.testing.assert_allclose(h.hi, [-0.15, -0.25, -0.25], atol=1e-15)


def test_printed_constants():
    np.testing.assert_array_equal(PERUFFO_WEIGHTS, -np.array([576, 2400, 4180, 3980, 2273, 800, 170, 20]))
    d = benchmark("darboux").unsafe_sets[0]
    np.testing.assert_array_equal(d.center, [-2, 0])
    assert d.generators.shape == (2, 5)
    P = benchmark("peruffo", 4)
    np.testing.assert_array_equal(P.A[-1], PERUFFO_WEIGHTS[:4])
    np.testing.assert_array_equal(P.A[:3, 1:], np.eye(3))


def test_benchmark_registry_errors():
    assert set(BENCHMARK_NAMES) >= {"three-sets", "peruffo", "ratschan", "exponential"}
    with pytest.raises(InvalidInputError):
        benchmark("nope")
    with pytest.raises(InvalidInputError):
        benchmark("ratschan", 4)
    with pytest.raises(InvalidInputError):
        benchmark("peruffo", 9)
    with pytest.raises(InvalidInputError):
        benchmark("polynomial", 3)


def test_parse_grammar():
    e = parse_expr("-x1^2 + 3*sin(x2) / 2 - exp(x1) + cos(x2)")
    x = np.array([0.3, -1.2])
    want = -x[0] ** 2 + 3 * np.sin(x[1]) / 2 - np.exp(x[0]) + np.cos(x[1])
    assert expr_eval(e, x) == pytest.approx(want, rel=1e-15)
    with pytest.raises(InvalidInputError):
        parse_expr("x3 + 1", dim=2)
    with pytest.raises(InvalidInputError):
        parse_expr("import os")
    with pytest.raises(InvalidInputError):
        parse_expr("tan(x1)")


def test_json_round_trip(tmp_path):
    doc = {"name": "toy", "dim": 2, "dynamics": ["-x1 + x2", "-x2"],
           "state_space": [[-2, 2], [-2, 2]],
           "initial_sets": [[[-0.5, 0.5], [-0.5, 0.5]]],
           "unsafe_sets": [{"center": [1.5, 1.5], "generators": [[0.2, 0], [0, 0.2]]}]}
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(doc))
    s = load_system(path)
    assert s.dim == 2 and s.is_linear
    np.testing.assert_array_equal(s.A, [[-1, 1], [0, -1]])
    with pytest.raises(InvalidInputError):
        system_from_dict({"dim": 2})
    with pytest.raises(DimensionError):
        system_from_dict({**doc, "dynamics": ["x1"]})


@given(st.floats(-2, 2), st.floats(0, 1.5), st.floats(-2, 2), st.floats(0, 1.5))
def test_torch_and_numpy_ranges_agree(a, wa, b, wb):
    sys_ = benchmark("exponential")
    lo, hi = np.array([a, b]), np.array([a + wa, b + wb])
    for e in sys_.dynamics:
        n_lo, n_hi = e.range(lo, hi)
        t_lo, t_hi = e.range(torch.tensor(lo), torch.tensor(hi))
        assert abs(float(t_lo) - float(n_lo)) <= 1e-14 and abs(float(t_hi) - float(n_hi)) <= 1e-14
