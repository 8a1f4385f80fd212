"""Built-in benchmark systems."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from ..setcore import IntervalVector, Zonotope
from .expr import Const, exp, sin, variables
from .systems import SystemSpec, box

PERUFFO_WEIGHTS = -np.array([576.0, 2400.0, 4180.0, 3980.0, 2273.0, 800.0, 170.0, 20.0])

DARBOUX_UNSAFE = Zonotope(
    [-2.0, 0.0],
    [[0.0, 0.75, 0.75, 0.25, 0.25],
     [0.25, -0.375, 0.375, -0.25, 0.25]],
)


def three_sets() -> SystemSpec:
    x1, x2 = variables(2)
    return SystemSpec(
        name="three-sets", dim=2,
        dynamics=[Const(0.0), x2],
        state_space=IntervalVector([0, 0], [4, 4]),
        initial_sets=[box([1.7, 2.7], [2.3, 3.3])],
        unsafe_sets=[box([0.7, 0.7], [2.3, 2.3]), box([2.7, 1.7], [3.3, 2.3])],
    )


def two_barriers() -> SystemSpec:
    x1, x2 = variables(2)
    return SystemSpec(
        name="two-barriers", dim=2,
        dynamics=[-x1, -x2],
        state_space=IntervalVector([0, 0], [4, 4]),
        initial_sets=[box([0.7, 0.7], [1.3, 1.3]), box([2.7, 2.7], [3.3, 3.3])],
        unsafe_sets=[box([0.3, 3.3], [0.7, 3.7]), box([3.3, 0.3], [3.7, 0.7])],
    )


def peruffo(n: int = 4) -> SystemSpec:
    """Integrator chain closed by the printed feedback weights (first ``n`` used)."""
    if not 2 <= n <= len(PERUFFO_WEIGHTS):
        raise InvalidInputError(f"peruffo supports sizes 2..{len(PERUFFO_WEIGHTS)}, got {n}")
    xs = variables(n)
    last = Const(0.0)
    for w, x in zip(PERUFFO_WEIGHTS[:n], xs):
        last = last + w * x
    A = np.zeros((n, n))
    A[np.arange(n - 1), np.arange(1, n)] = 1.0
    A[-1] = PERUFFO_WEIGHTS[:n]
    return SystemSpec(
        name=f"peruffo-{n}d", dim=n,
        dynamics=list(xs[1:]) + [last],
        state_space=IntervalVector(np.full(n, -2.2), np.full(n, 2.2)),
        initial_sets=[box(np.full(n, 0.9), np.full(n, 1.1))],
        unsafe_sets=[box(np.full(n, -2.2), np.full(n, -1.8))],
        A=A,
    )


def darboux() -> SystemSpec:
    x1, x2 = variables(2)
    return SystemSpec(
        name="darboux", dim=2,
        dynamics=[x2 + 2 * x1 * x2, -x1 + 2 * x1 ** 2 - x2 ** 2],
        state_space=IntervalVector([-2, -2], [2, 2]),
        initial_sets=[box([0, 1], [1, 2])],
        unsafe_sets=[DARBOUX_UNSAFE],
    )


def polynomial() -> SystemSpec:
    x1, x2 = variables(2)
    return SystemSpec(
        name="polynomial", dim=2,
        dynamics=[x2, -x1 + (1.0 / 3.0) * x1 ** 3 - x2],
        state_space=IntervalVector([-3.5, -2], [2, 1]),
        initial_sets=[box([1, -0.5], [2, 0.5])],
        unsafe_sets=[box([-1.4, -1.4], [-0.6, -0.6])],
    )


def lyapunov() -> SystemSpec:
    x1, x2, x3 = variables(3)
    return SystemSpec(
        name="lyapunov", dim=3,
        dynamics=[-x2, -x3, -x1 - 2 * x2 - x3 + x1 ** 3],
        state_space=IntervalVector([-2, -2, -2], [2, 2, 2]),
        initial_sets=[box([-0.25, -0.25, -0.75], [0.75, 0.75, 0.25])],
        unsafe_sets=[box([1, -2, -2], [2, -1, -1])],
    )


def exponential() -> SystemSpec:
    x1, x2 = variables(2)
    return SystemSpec(
        name="exponential", dim=2,
        dynamics=[exp(-x1) + x2 - 1, -(sin(x1) ** 2)],
        state_space=IntervalVector([-2, -2], [2, 2]),
        initial_sets=[box([-0.9, -0.9], [-0.1, -0.1])],
        unsafe_sets=[box([0.4, 0.4], [1, 1])],
    )


def ratschan(n: int = 3) -> SystemSpec:
    """``n = 2l + 1`` states: a drift coordinate plus ``l`` undamped pendula."""
    if n < 3 or n % 2 == 0:
        raise InvalidInputError(f"ratschan needs an odd size >= 3, got {n}")
    l = (n - 1) // 2
    xs = variables(n)
    total = Const(0.0)
    for i in range(1, l + 1):
        # one-based x_(i+1) + x_(i+2), taken literally
        total = total + (xs[i] + xs[i + 1])
    dyn = [1 + total / 100]
    for i in range(1, l + 1):
        xa, xb = xs[2 * i - 1], xs[2 * i]  # one-based x_(2i), x_(2i+1)
        dyn += [xb, -10 * sin(xa) - xa]
    lo_i = np.r_[-0.3, np.full(2 * l, -0.2)]
    hi_i = np.r_[0.0, np.full(2 * l, 0.3)]
    lo_u = np.r_[-0.2, np.full(2 * l, -0.3)]
    hi_u = np.r_[-0.15, np.full(2 * l, -0.25)]
    return SystemSpec(
        name=f"ratschan-{n}d", dim=n,
        dynamics=dyn,
        state_space=IntervalVector(np.full(n, -0.3), np.full(n, 0.3)),
        initial_sets=[box(lo_i, hi_i)],
        unsafe_sets=[box(lo_u, hi_u)],
    )


_FIXED = {
    "three-sets": three_sets,
    "two-barriers": two_barriers,
    "darboux": darboux,
    "polynomial": polynomial,
    "lyapunov": lyapunov,
    "exponential": exponential,
}
_SIZED = {"peruffo": (peruffo, 4), "ratschan": (ratschan, 3)}

BENCHMARK_NAMES = tuple(sorted([*_FIXED, *_SIZED]))


def benchmark(name: str, size: int | None = None) -> SystemSpec:
    """Return a built-in system by name; ``size`` picks ``n`` for peruffo/ratschan."""
    key = name.lower().replace("_", "-")
    if key in _FIXED:
        if size is not None and size != _FIXED[key]().dim:
            raise InvalidInputError(f"benchmark {name!r} has fixed size")
        return _FIXED[key]()
    if key in _SIZED:
        fn, default = _SIZED[key]
        return fn(default if size is None else int(size))
    raise InvalidInputError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARK_NAMES)}")
