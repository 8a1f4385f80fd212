"""Expression trees for vector fields.

Expressions support pointwise evaluation on stacks of states and range
bounding with interval arithmetic.  Both work elementwise on numpy arrays, so
a whole batch of boxes is bounded in one call.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import InvalidInputError, NumericDomainError

TWO_PI = 2.0 * math.pi


def _xp(a):
    """Array namespace of ``a``: torch for tensors, numpy otherwise.

    Range bounding only uses functions both libraries share, so the same
    trees bound numpy batches and differentiable torch batches.
    """
    if type(a).__module__.startswith("torch"):
        import torch
        return torch
    return np


class Expr:
    """Base node.  Arithmetic operators build new trees."""

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on points ``x`` of shape ``(..., n)``."""
        raise NotImplementedError

    def range(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bounds over boxes ``[lo, hi]`` of shape ``(..., n)``."""
        raise NotImplementedError

    def max_var(self) -> int:
        return -1

    def children(self) -> tuple["Expr", ...]:
        return ()

    # operator sugar, used by the built-in benchmark definitions
    def __add__(self, o):
        return Add(self, _lift(o))

    def __radd__(self, o):
        return Add(_lift(o), self)

    def __sub__(self, o):
        return Sub(self, _lift(o))

    def __rsub__(self, o):
        return Sub(_lift(o), self)

    def __mul__(self, o):
        return Mul(self, _lift(o))

    def __rmul__(self, o):
        return Mul(_lift(o), self)

    def __truediv__(self, o):
        return Div(self, _lift(o))

    def __rtruediv__(self, o):
        return Div(_lift(o), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k):
        return Pow(self, int(k))


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return Const(float(v))


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.value)

    def range(self, lo, hi):
        v = _xp(lo).zeros_like(lo[..., 0]) + self.value
        return v, v + 0.0

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise InvalidInputError("variable index must be non-negative")

    def eval(self, x):
        return np.asarray(x, dtype=float)[..., self.index]

    def range(self, lo, hi):
        return lo[..., self.index], hi[..., self.index]

    def max_var(self):
        return self.index

    def __str__(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    def eval(self, x):
        return -self.arg.eval(x)

    def range(self, lo, hi):
        a, b = self.arg.range(lo, hi)
        return -b, -a

    def max_var(self):
        return self.arg.max_var()

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True, eq=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    def max_var(self):
        return max(self.left.max_var(), self.right.max_var())

    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    def eval(self, x):
        return self.left.eval(x) + self.right.eval(x)

    def range(self, lo, hi):
        a, b = self.left.range(lo, hi)
        c, d = self.right.range(lo, hi)
        return a + c, b + d

    def __str__(self):
        return f"({self.left} + {self.right})"


class Sub(_Binary):
    def eval(self, x):
        return self.left.eval(x) - self.right.eval(x)

    def range(self, lo, hi):
        a, b = self.left.range(lo, hi)
        c, d = self.right.range(lo, hi)
        return a - d, b - c

    def __str__(self):
        return f"({self.left} - {self.right})"


def _imul(a, b, c, d):
    xp = _xp(a)
    p1, p2, p3, p4 = a * c, a * d, b * c, b * d
    return (xp.minimum(xp.minimum(p1, p2), xp.minimum(p3, p4)),
            xp.maximum(xp.maximum(p1, p2), xp.maximum(p3, p4)))


class Mul(_Binary):
    def eval(self, x):
        return self.left.eval(x) * self.right.eval(x)

    def range(self, lo, hi):
        a, b = self.left.range(lo, hi)
        c, d = self.right.range(lo, hi)
        return _imul(a, b, c, d)

    def __str__(self):
        return f"({self.left} * {self.right})"


class Div(_Binary):
    def eval(self, x):
        den = self.right.eval(x)
        if np.any(den == 0.0):
            raise NumericDomainError(f"division by zero in {self}")
        return self.left.eval(x) / den

    def range(self, lo, hi):
        a, b = self.left.range(lo, hi)
        c, d = self.right.range(lo, hi)
        if bool(((c <= 0.0) & (d >= 0.0)).any()):
            raise NumericDomainError(f"denominator range contains 0 in {self}")
        return _imul(a, b, 1.0 / d, 1.0 / c)

    def __str__(self):
        return f"({self.left} / {self.right})"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    arg: Expr
    exponent: int

    def __post_init__(self):
        if int(self.exponent) != self.exponent or self.exponent < 0:
            raise InvalidInputError("exponent must be a non-negative integer")

    def eval(self, x):
        return self.arg.eval(x) ** self.exponent

    def range(self, lo, hi):
        a, b = self.arg.range(lo, hi)
        k = self.exponent
        xp = _xp(a)
        if k == 0:
            one = xp.ones_like(a)
            return one, one + 0.0
        pa, pb = a ** k, b ** k
        if k % 2 == 1:
            return pa, pb
        lo_out = xp.where(a >= 0.0, pa, xp.where(b <= 0.0, pb, xp.zeros_like(pa)))
        hi_out = xp.maximum(pa, pb)
        return lo_out, hi_out

    def max_var(self):
        return self.arg.max_var()

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"({self.arg} ^ {self.exponent})"


def _has_point(a, b, offset):
    """Whether some ``offset + 2*pi*k`` lies in ``[a, b]``."""
    k = _xp(a).ceil((a - offset) / TWO_PI)
    return offset + TWO_PI * k <= b


@dataclass(frozen=True, eq=True)
class _Unary(Expr):
    arg: Expr

    def max_var(self):
        return self.arg.max_var()

    def children(self):
        return (self.arg,)


class Sin(_Unary):
    def eval(self, x):
        return np.sin(self.arg.eval(x))

    def range(self, lo, hi):
        a, b = self.arg.range(lo, hi)
        xp = _xp(a)
        sa, sb = xp.sin(a), xp.sin(b)
        full = (b - a) >= TWO_PI
        top = full | _has_point(a, b, 0.5 * math.pi)
        bot = full | _has_point(a, b, 1.5 * math.pi)
        one = xp.ones_like(sa)
        return xp.where(bot, -one, xp.minimum(sa, sb)), xp.where(top, one, xp.maximum(sa, sb))

    def __str__(self):
        return f"sin({self.arg})"


class Cos(_Unary):
    def eval(self, x):
        return np.cos(self.arg.eval(x))

    def range(self, lo, hi):
        a, b = self.arg.range(lo, hi)
        xp = _xp(a)
        ca, cb = xp.cos(a), xp.cos(b)
        full = (b - a) >= TWO_PI
        top = full | _has_point(a, b, 0.0)
        bot = full | _has_point(a, b, math.pi)
        one = xp.ones_like(ca)
        return xp.where(bot, -one, xp.minimum(ca, cb)), xp.where(top, one, xp.maximum(ca, cb))

    def __str__(self):
        return f"cos({self.arg})"


class Exp(_Unary):
    def eval(self, x):
        return np.exp(self.arg.eval(x))

    def range(self, lo, hi):
        a, b = self.arg.range(lo, hi)
        xp = _xp(a)
        return xp.exp(a), xp.exp(b)

    def __str__(self):
        return f"exp({self.arg})"


def sin(e) -> Expr:
    return Sin(_lift(e))


def cos(e) -> Expr:
    return Cos(_lift(e))


def exp(e) -> Expr:
    return Exp(_lift(e))


def variables(n: int) -> list[Var]:
    return [Var(i) for i in range(n)]


def expr_eval(e: Expr, x) -> float | np.ndarray:
    out = e.eval(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def expr_range(e: Expr, box) -> "Interval":
    """Interval enclosure of ``e`` over a single box."""
    from ..setcore import Interval

    a, b = e.range(np.asarray(box.lo, dtype=float), np.asarray(box.hi, dtype=float))
    return Interval(float(a), float(b))


def affine_coefficients(e: Expr, n: int) -> tuple[np.ndarray, float] | None:
    """Return ``(row, offset)`` if ``e`` is affine in ``x``, else ``None``."""
    if isinstance(e, Const):
        return np.zeros(n), e.value
    if isinstance(e, Var):
        row = np.zeros(n)
        row[e.index] = 1.0
        return row, 0.0
    if isinstance(e, Neg):
        r = affine_coefficients(e.arg, n)
        return None if r is None else (-r[0], -r[1])
    if isinstance(e, (Add, Sub)):
        l, r = affine_coefficients(e.left, n), affine_coefficients(e.right, n)
        if l is None or r is None:
            return None
        sign = 1.0 if isinstance(e, Add) else -1.0
        return l[0] + sign * r[0], l[1] + sign * r[1]
    if isinstance(e, Mul):
        l, r = affine_coefficients(e.left, n), affine_coefficients(e.right, n)
        if l is None or r is None:
            return None
        if not np.any(l[0]):
            return l[1] * r[0], l[1] * r[1]
        if not np.any(r[0]):
            return r[1] * l[0], r[1] * l[1]
        return None
    if isinstance(e, Div):
        l, r = affine_coefficients(e.left, n), affine_coefficients(e.right, n)
        if l is None or r is None or np.any(r[0]) or r[1] == 0.0:
            return None
        return l[0] / r[1], l[1] / r[1]
    if isinstance(e, Pow):
        if e.exponent == 0:
            return np.zeros(n), 1.0
        if e.exponent == 1:
            return affine_coefficients(e.arg, n)
        inner = affine_coefficients(e.arg, n)
        if inner is not None and not np.any(inner[0]):
            return np.zeros(n), inner[1] ** e.exponent
        return None
    return None


# ---------------------------------------------------------------- parsing

_FUNCS: dict[str, Callable[[Expr], Expr]] = {"sin": sin, "cos": cos, "exp": exp}


def parse_expr(text: str, dim: int | None = None) -> Expr:
    """Parse ``x1*x2 - sin(x1)^2 + 3`` style strings.

    Identifiers are ``x1`` .. ``xn`` (one-based), numeric literals, the binary
    operators ``+ - * / ^`` (``**`` is accepted as well), unary minus, and the
    functions ``sin``, ``cos`` and ``exp``.
    """
    try:
        # '^' must bind like '**', not like Python's xor
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InvalidInputError(f"cannot parse expression {text!r}: {exc.msg}") from None
    e = _convert(tree.body, text)
    if dim is not None and e.max_var() >= dim:
        raise InvalidInputError(f"expression {text!r} uses x{e.max_var() + 1} but dim is {dim}")
    return e


def _convert(node: ast.AST, text: str) -> Expr:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return Const(float(node.value))
    if isinstance(node, ast.Name):
        name = node.id
        if name.startswith("x") and name[1:].isdigit() and int(name[1:]) >= 1:
            return Var(int(name[1:]) - 1)
        raise InvalidInputError(f"unknown identifier {name!r} in {text!r}")
    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return Neg(_convert(node.operand, text))
        if isinstance(node.op, ast.UAdd):
            return _convert(node.operand, text)
    if isinstance(node, ast.BinOp):
        left = _convert(node.left, text)
        if isinstance(node.op, ast.Pow):
            right = _convert(node.right, text)
            if not isinstance(right, Const) or right.value != int(right.value) or right.value < 0:
                raise InvalidInputError(f"exponent must be a non-negative integer literal in {text!r}")
            return Pow(left, int(right.value))
        right = _convert(node.right, text)
        ops = {ast.Add: Add, ast.Sub: Sub, ast.Mult: Mul, ast.Div: Div}
        for op_type, cls in ops.items():
            if isinstance(node.op, op_type):
                return cls(left, right)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        return _FUNCS[node.func.id](_convert(node.args[0], text))
    raise InvalidInputError(f"unsupported construct in {text!r}")
