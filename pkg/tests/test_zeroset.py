import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from setbarrier.dynsys import benchmark
from setbarrier.errors import InvalidInputError, ResourceLimitError
from setbarrier.neural import Network, nn_init, resolve_arch
from setbarrier.setcore import IntervalVector, Zonotope, factor_feasible
from setbarrier.trainer import config_for, pretrain
from setbarrier.zeroset import (ZeroParams, _constrain_and_contract, canonical_order, contract_boxes_t,
                                enclose_zero_set, iter_zero_cover, preimage_constrain, split_boxes)

from oracles import chord_roots, in_any_box, net_forward


def _random_net(rng, n, arch="N2", scale=0.5):
    net = nn_init(resolve_arch(arch, n), int(rng.integers(1 << 30)))
    return net.with_theta(net.theta + scale * rng.normal(size=net.n_params))


def _const(n, value):
    return Network((np.zeros((1, n)),), (np.array([value]),))


# ---------------------------------------------------------------- params

def test_params_parse():
    assert ZeroParams.parse("1-8-n") == ZeroParams(1, 8, None)
    assert ZeroParams.parse("2,4,2") == ZeroParams(2, 4, 2)
    assert str(ZeroParams(2, 9, None)) == "2-9-n"
    assert ZeroParams.parse("2-4-n").refined(1) == ZeroParams(3, 4, None)
    assert ZeroParams(2, 4, 2).dims_for(8) == 2 and ZeroParams(2, 4, None).dims_for(3) == 3
    for bad in ["1-8", "a-2-n", "0-2-n", "1-0-n", "1-2-0"]:
        with pytest.raises(InvalidInputError):
            ZeroParams.parse(bad)


def test_peruffo_preset_honoured():
    p = config_for(benchmark("peruffo", 4)).zero
    assert (p.iterations, p.splits, p.dims_for(4)) == (1, 8, 4)


# ---------------------------------------------------------------- preimage constraint

def test_constant_net_has_empty_constraint():
    con = preimage_constrain(_const(2, 5.0), Zonotope([0, 0], np.eye(2)))
    assert (con.lo, con.hi) == (-5.0, -5.0)
    assert not factor_feasible(con)


def test_identity_net_pins_zero():
    net = Network((np.array([[1.0]]),), (np.zeros(1),))
    con = preimage_constrain(net, Zonotope([0.0], [[1.0]]))
    assert (float(con.coeffs[0]), con.lo, con.hi) == (1.0, 0.0, 0.0)
    cov = enclose_zero_set(net, IntervalVector([-1], [1]), ZeroParams(1, 1))
    # pinned to zero up to the outward rounding slack of the band
    assert len(cov) == 1 and abs(cov.lo[0, 0]) <= 1e-11 and abs(cov.hi[0, 0]) <= 1e-11


def test_roots_satisfy_constraint(rng):
    for _ in range(10):
        net = _random_net(rng, 2)
        lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
        con = preimage_constrain(net, Zonotope([0, 0], np.eye(2)))
        roots = chord_roots(lambda x: net_forward(net.weights, net.biases, x), lo, hi, rng, 100)
        assert np.all(con.satisfied(roots, tol=1e-9))


# ---------------------------------------------------------------- cover

def test_positive_net_gives_empty_cover():
    cov = enclose_zero_set(_const(2, 1.0), IntervalVector([0, 0], [1, 1]), ZeroParams(2, 4))
    assert len(cov) == 0 and cov.volume() == 0.0


@pytest.mark.parametrize("arch", ["N1", "N2", "N3"])
def test_cover_soundness_random(arch, rng):
    X = IntervalVector([-2, -1], [1, 2])
    for _ in range(5):
        net = _random_net(rng, 2, arch)
        cov = enclose_zero_set(net, X, ZeroParams(2, 4))
        roots = chord_roots(lambda x: net_forward(net.weights, net.biases, x), X.lo, X.hi, rng, 200)
        assert in_any_box(roots, cov.lo, cov.hi).all()
        assert np.all(cov.lo >= X.lo) and np.all(cov.hi <= X.hi)


def test_cover_soundness_trained(rng):
    sys_ = benchmark("polynomial")
    cfg = config_for(sys_, seed=1)
    net = pretrain(nn_init(resolve_arch(cfg.arch, 2), 1), sys_, cfg)
    X = sys_.state_space
    cov = enclose_zero_set(net, X, ZeroParams(4, 2, 2))
    roots = chord_roots(lambda x: net_forward(net.weights, net.biases, x), X.lo, X.hi, rng, 1000)
    assert len(roots) == 1000
    assert in_any_box(roots, cov.lo, cov.hi).all()


def test_no_zero_outside_cover(rng):
    # pruning correctness: dense samples outside the cover never sit on the zero level
    net = _random_net(rng, 2)
    X = IntervalVector([-1, -1], [1, 1])
    cov = enclose_zero_set(net, X, ZeroParams(3, 2))
    x = X.sample(rng, 20_000)
    out = x[~in_any_box(x, cov.lo, cov.hi)]
    assert np.all(np.abs(net_forward(net.weights, net.biases, out)) > 1e-9)


def test_refinement_monotone(rng):
    X = IntervalVector([-2, -2, -2], [2, 2, 2])
    for _ in range(5):
        net = _random_net(rng, 3)
        vols = [enclose_zero_set(net, X, ZeroParams(k, 2)).volume() for k in (1, 2, 3)]
        assert vols[1] <= vols[0] + 1e-12 and vols[2] <= vols[1] + 1e-12


def test_box_cap_error(rng):
    net = _random_net(rng, 3)
    with pytest.raises(ResourceLimitError, match=r"iota=2, s=8, s_dim=n"):
        enclose_zero_set(net, IntervalVector([-2] * 3, [2] * 3), ZeroParams(2, 8), cap=100)


def test_dimension_check(rng):
    with pytest.raises(InvalidInputError):
        enclose_zero_set(_random_net(rng, 2), IntervalVector([0], [1]), ZeroParams(1, 2))


def test_deterministic_canonical_order(rng):
    net = _random_net(rng, 2)
    X = IntervalVector([-1, -1], [1, 1])
    a = enclose_zero_set(net, X, ZeroParams(2, 3))
    b = enclose_zero_set(net, X, ZeroParams(2, 3))
    assert np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)
    c = 0.5 * (a.lo + a.hi)
    keys = [tuple(r) for r in c]
    assert keys == sorted(keys)


# ---------------------------------------------------------------- splitting

def test_split_widest_dims_ties_low_index():
    lo, hi = np.array([[0.0, 0.0, 0.0]]), np.array([[1.0, 2.0, 2.0]])
    L, H = split_boxes(lo, hi, 2, 1)
    assert len(L) == 2 and np.array_equal(L[:, 1], [0, 1]) and np.all(L[:, 2] == 0)
    L, H = split_boxes(lo, hi, 3, 3)
    assert len(L) == 27
    L, H = split_boxes(np.array([[0.0, 1.0]]), np.array([[1.0, 1.0]]), 4, 2)
    assert len(L) == 4  # zero-width axis is not split


@given(st.integers(1, 4), st.integers(1, 3))
def test_split_partition_volume(s, d):
    lo, hi = np.zeros((1, 3)), np.array([[1.0, 2.0, 0.5]])
    L, H = split_boxes(lo, hi, s, d)
    assert len(L) == s ** d
    assert np.prod(H - L, axis=1).sum() == pytest.approx(1.0)
    L2, H2 = canonical_order(L, H)
    assert len(L2) == len(L)


# ---------------------------------------------------------------- differentiable contraction

def test_torch_contraction_matches_numpy(rng):
    net = _random_net(rng, 2, "N3")
    a = rng.uniform(-1, 1, (50, 2))
    lo, hi = a, a + rng.uniform(0.01, 0.5, (50, 2))
    keep_n, lo_n, hi_n = _constrain_and_contract(net.torch_params(), lo, hi, 1e-12)
    with torch.no_grad():
        keep_t, lo_t, hi_t = contract_boxes_t(net.torch_params(), lo, hi)
    assert np.array_equal(keep_n, keep_t)
    np.testing.assert_allclose(lo_t.numpy(), lo_n[keep_n], atol=1e-12)
    np.testing.assert_allclose(hi_t.numpy(), hi_n[keep_n], atol=1e-12)


def test_parent_boxes_reproduce_cover(rng):
    for arch in ["N1", "N2"]:
        net = _random_net(rng, 2, arch)
        X = IntervalVector([-1, -1], [1, 1])
        cov = enclose_zero_set(net, X, ZeroParams(2, 4))
        assert cov.parent_lo.shape == cov.lo.shape
        assert np.all(cov.parent_lo <= cov.lo) and np.all(cov.hi <= cov.parent_hi)
        with torch.no_grad():
            keep, lo, hi = contract_boxes_t(net.torch_params(), cov.parent_lo, cov.parent_hi)
        assert keep.all()
        np.testing.assert_allclose(lo.numpy(), cov.lo, atol=1e-12)
        np.testing.assert_allclose(hi.numpy(), cov.hi, atol=1e-12)


@pytest.mark.parametrize("chunk", [27, 100, 500])
def test_streamed_pieces_reproduce_cover(chunk):
    net = nn_init([3, 5, 1], 4)
    X = IntervalVector(np.full(3, -1.0), np.ones(3))
    p = ZeroParams(2, 3)
    full = enclose_zero_set(net, X, p)
    pieces = list(iter_zero_cover(net, X, p, chunk=chunk))
    assert all(len(c) <= chunk for c in pieces)
    lo, hi = canonical_order(np.concatenate([c.lo for c in pieces]), np.concatenate([c.hi for c in pieces]))
    # batch size changes BLAS blocking, hence ulps rather than bitwise equality
    assert lo.shape == full.lo.shape
    np.testing.assert_allclose(lo, full.lo, rtol=0, atol=1e-15)
    np.testing.assert_allclose(hi, full.hi, rtol=0, atol=1e-15)


def test_stream_rejects_oversized_split():
    net = nn_init([3, 5, 1], 4)
    X = IntervalVector(np.full(3, -1.0), np.ones(3))
    with pytest.raises(ResourceLimitError, match="chunk 8"):
        list(iter_zero_cover(net, X, ZeroParams(1, 3), chunk=8))
