import numpy as np
import pytest

from setbarrier.certloss import (DEFAULT_EPS, LossBreakdown, lie_enclose, loss_init, loss_unsafe,
                                 loss_zero, total_loss)
from setbarrier.dynsys import benchmark, system_from_dict
from setbarrier.errors import DimensionError, InvalidInputError
from setbarrier.neural import Network, nn_init, resolve_arch
from setbarrier.setcore import IntervalVector, Zonotope, zono_from_interval
from setbarrier.trainer import config_for, train
from setbarrier.zeroset import ZeroCover, ZeroParams, enclose_zero_set

from oracles import net_forward, net_input_grad, sample_box

IDENT = Network((np.array([[1.0]]),), (np.zeros(1),))


def _box(lo, hi):
    return zono_from_interval(IntervalVector(lo, hi))


def _line_system(rate=1.0):
    return system_from_dict({"dim": 1, "dynamics": [f"{rate}*x1"], "state_space": [[-3, 3]],
                             "initial_sets": [[[-1, 0]]]}, name="line")


def _cover(lo, hi):
    return ZeroCover(np.atleast_2d(lo).astype(float), np.atleast_2d(hi).astype(float), 1, 0)


# ---------------------------------------------------------------- hinge examples

def test_unsafe_examples():
    assert loss_unsafe(IDENT, [_box([-0.5], [2])], 1e-3) == pytest.approx(0.501, abs=1e-15)
    assert loss_unsafe(IDENT, [_box([0.002], [3])], 1e-3) == 0.0
    assert loss_unsafe(IDENT, []) == 0.0
    with pytest.raises(InvalidInputError):
        loss_unsafe(IDENT, [_box([0], [1])], 0.0)


def test_init_examples():
    assert loss_init(IDENT, [_box([-2], [-0.1])]) == 0.0
    assert loss_init(IDENT, [_box([-2], [0.3])]) == pytest.approx(0.3, abs=1e-15)
    one = Network((np.zeros((1, 2)),), (np.ones(1),))
    assert loss_init(one, benchmark("polynomial").initial_sets) == 1.0


def test_zero_examples():
    sys_ = _line_system()
    assert loss_zero(IDENT, sys_, ZeroCover.empty(1)) == 0.0
    assert loss_zero(IDENT, sys_, _cover([-3], [-0.5]), 1e-3) == 0.0
    assert loss_zero(IDENT, sys_, _cover([-3], [0.2]), 1e-3) == pytest.approx(0.201, abs=1e-15)


def test_total_examples():
    bd = LossBreakdown(0.501, 0.0, 0.201, DEFAULT_EPS)
    assert bd.total == pytest.approx(0.702, abs=1e-15) and not bd.verified
    assert LossBreakdown(0.0, 0.0, 0.0, DEFAULT_EPS).verified
    with pytest.raises(InvalidInputError):
        LossBreakdown(-1.0, 0.0, 0.0, DEFAULT_EPS)
    d = bd.to_dict()
    assert set(d) >= {"lU", "lI", "l0", "total", "epsilon", "coverN", "verified"}


def test_constant_one_not_verified():
    sys_ = benchmark("darboux")
    one = Network((np.zeros((1, 2)),), (np.ones(1),))
    bd = total_loss(one, sys_, enclose_zero_set(one, sys_.state_space, ZeroParams(2, 4)))
    assert bd.l_init == 1.0 and bd.cover_size == 0 and not bd.verified


def test_total_dimension_mismatch():
    with pytest.raises(DimensionError):
        total_loss(IDENT, benchmark("darboux"), ZeroCover.empty(2))


# ---------------------------------------------------------------- Lie enclosure

def test_lie_linear_point(rng):
    sys_ = benchmark("peruffo", 4)
    w, b = rng.normal(size=(1, 4)), rng.normal(size=1)
    net = Network((w,), (b,))
    x = rng.normal(size=4)
    iv = lie_enclose(net, sys_, Zonotope(x))
    want = float(w[0] @ sys_.A @ x)
    assert iv.lo == pytest.approx(want, rel=1e-12) and iv.hi == pytest.approx(want, rel=1e-12)


def test_lie_zero_dynamics(rng):
    sys_ = system_from_dict({"dim": 2, "dynamics": ["0", "0"], "state_space": [[-1, 1], [-1, 1]],
                             "initial_sets": [[[-0.1, 0.1], [-0.1, 0.1]]]})
    net = nn_init([2, 8, 1], 3)
    iv = lie_enclose(net, sys_, _box([-1, -1], [1, 1]))
    assert (iv.lo, iv.hi) == (0.0, 0.0)


@pytest.mark.parametrize("name,arch", [("darboux", "N2"), ("exponential", "N3"), ("lyapunov", "N2")])
def test_lie_containment(name, arch, rng):
    sys_ = benchmark(name)
    X = sys_.state_space
    bad = 0
    for _ in range(20):
        net = nn_init(resolve_arch(arch, sys_.dim), int(rng.integers(1 << 30)))
        net = net.with_theta(net.theta + 0.3 * rng.normal(size=net.n_params))
        a = sample_box(rng, X.lo, X.hi, 2)
        lo, hi = a.min(0), a.max(0)
        iv = lie_enclose(net, sys_, _box(lo, hi))
        x = sample_box(rng, lo, hi, 500)
        lie = np.sum(net_input_grad(net.weights, net.biases, x) * sys_.f(x), axis=1)
        bad += int(np.sum((lie < iv.lo - 1e-12) | (lie > iv.hi + 1e-12)))
    assert bad == 0


def test_shrinking_never_increases_hinge(rng):
    sys_ = benchmark("polynomial")
    net = nn_init([2, 8, 1], 5)
    net = net.with_theta(net.theta + 0.5 * rng.normal(size=net.n_params))
    X = sys_.state_space
    for _ in range(100):
        a = sample_box(rng, X.lo, X.hi, 2)
        lo, hi = a.min(0), a.max(0)
        t = rng.random((2, 2))
        slo = lo + (hi - lo) * t.min(0)
        shi = lo + (hi - lo) * t.max(0)
        big, small = _box(lo, hi), _box(slo, shi)
        assert loss_unsafe(net, [small]) <= loss_unsafe(net, [big]) + 1e-12
        assert loss_init(net, [small]) <= loss_init(net, [big]) + 1e-12
        assert lie_enclose(net, sys_, small).hi <= lie_enclose(net, sys_, big).hi + 1e-12


# ---------------------------------------------------------------- soundness of a zero loss

@pytest.fixture(scope="module")
def three_sets_cert():
    sys_ = benchmark("three-sets")
    cfg = config_for(sys_, seed=0)
    net, rep = train(sys_, cfg)
    assert rep.verified
    return sys_, cfg, net


def test_zero_loss_implies_sampled_conditions(three_sets_cert, rng):
    sys_, cfg, net = three_sets_cert
    for U in sys_.unsafe_sets:
        assert np.all(net_forward(net.weights, net.biases, U.sample(rng, 100_000)) > 0)
    for I in sys_.initial_sets:
        assert np.all(net_forward(net.weights, net.biases, I.sample(rng, 100_000)) <= 0)


def test_zero_loss_survives_doubled_refinement(three_sets_cert):
    sys_, cfg, net = three_sets_cert
    z = cfg.zero
    fine = ZeroParams(2 * z.iterations, 2 * z.splits, z.split_dims)
    cover = enclose_zero_set(net, sys_.state_space, fine)
    bd = total_loss(net, sys_, cover, contract=False)
    assert bd.verified
    assert all(hi <= -cfg.eps for _, hi, _ in bd.zero_terms)


def test_contracted_loss_matches_detached(rng):
    sys_ = benchmark("peruffo", 4)
    net = nn_init([4, 1], 0)
    net = net.with_theta(net.theta + 0.3 * rng.normal(size=net.n_params))
    cover = enclose_zero_set(net, sys_.state_space, ZeroParams(1, 4))
    a = total_loss(net, sys_, cover, contract=True).total
    b = total_loss(net, sys_, cover, contract=False).total
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)
