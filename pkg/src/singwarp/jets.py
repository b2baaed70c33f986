"""Second-order forward-mode jets.

A ``Jet2`` carries the value, gradient and Hessian of a scalar at a chart
point; evaluating an expression tree in jet arithmetic yields Taylor data
exact to roundoff, which is what the curvature formulas need (second metric
derivatives).  Finite differences exist only as an independent test oracle.

Hessians stay symmetric to exact bit equality because every constructor
builds them from symmetric parts: entrywise sums, scaled symmetric matrices,
and x (x) y + y (x) x cross terms whose (i, j) and (j, i) entries are the
same two IEEE products added in either order."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError
from .expr import Expr


@dataclass(frozen=True)
class Jet2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def dim(self) -> int:
        return self.gradient.shape[0]

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value,
                    self.gradient + other.gradient,
                    self.hessian + other.hessian)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value,
                    self.gradient - other.gradient,
                    self.hessian - other.hessian)

    def __mul__(self, other: "Jet2") -> "Jet2":
        cross = np.outer(self.gradient, other.gradient)
        return Jet2(self.value * other.value,
                    self.value * other.gradient + other.value * self.gradient,
                    self.value * other.hessian + other.value * self.hessian
                    + cross + cross.T)

    def __truediv__(self, other: "Jet2") -> "Jet2":
        if other.value == 0.0:
            raise DomainError("division by zero")
        return self * _chain(other, 1.0 / other.value,
                             -1.0 / other.value ** 2,
                             2.0 / other.value ** 3)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.gradient, -self.hessian)

    def scaled(self, c: float) -> "Jet2":
        return Jet2(c * self.value, c * self.gradient, c * self.hessian)


def jet2(value: float, gradient, hessian) -> Jet2:
    """Public constructor: mirrors the upper triangle so the symmetry
    invariant holds regardless of how the inputs were produced."""
    h = np.asarray(hessian, dtype=float)
    h = np.triu(h) + np.triu(h, 1).T
    return Jet2(float(value), np.asarray(gradient, dtype=float), h)


_ZERO_VEC: dict[int, np.ndarray] = {}
_ZERO_MAT: dict[int, np.ndarray] = {}
_BASIS: dict[tuple[int, int], np.ndarray] = {}


def _zeros(n: int):
    z = _ZERO_VEC.get(n)
    if z is None:
        z = np.zeros(n)
        z.setflags(write=False)
        _ZERO_VEC[n] = z
        m = np.zeros((n, n))
        m.setflags(write=False)
        _ZERO_MAT[n] = m
    return z, _ZERO_MAT[n]


def _basis(n: int, i: int) -> np.ndarray:
    e = _BASIS.get((n, i))
    if e is None:
        e = np.zeros(n)
        e[i] = 1.0
        e.setflags(write=False)
        _BASIS[(n, i)] = e
    return e


def jet_const(c: float, n: int) -> Jet2:
    z, m = _zeros(n)
    return Jet2(float(c), z, m)


def jet_coord(i: int, p: np.ndarray) -> Jet2:
    n = p.shape[0]
    z, m = _zeros(n)
    return Jet2(float(p[i]), _basis(n, i), m)


def _chain(j: Jet2, f: float, df: float, d2f: float) -> Jet2:
    outer = np.outer(j.gradient, j.gradient)
    return Jet2(f, df * j.gradient, df * j.hessian + d2f * outer)


def _jet_pow(j: Jet2, k: int) -> Jet2:
    if k == 0:
        return jet_const(1.0, j.dim)
    if j.value == 0.0 and k < 0:
        raise DomainError("zero base with negative exponent")
    v = j.value
    f = v ** k
    df = k * v ** (k - 1)
    d2f = k * (k - 1) * v ** (k - 2) if k != 1 else 0.0
    return _chain(j, f, df, d2f)


def _jet_sin(j: Jet2) -> Jet2:
    return _chain(j, math.sin(j.value), math.cos(j.value), -math.sin(j.value))


def _jet_cos(j: Jet2) -> Jet2:
    return _chain(j, math.cos(j.value), -math.sin(j.value), -math.cos(j.value))


def _jet_exp(j: Jet2) -> Jet2:
    e = math.exp(j.value)
    return _chain(j, e, e, e)


def _jet_log(j: Jet2) -> Jet2:
    if j.value <= 0.0:
        raise DomainError(f"log of non-positive value {j.value}")
    return _chain(j, math.log(j.value), 1.0 / j.value, -1.0 / j.value ** 2)


def _jet_sqrt(j: Jet2) -> Jet2:
    if j.value <= 0.0:
        raise DomainError(f"sqrt of non-positive value {j.value}")
    s = math.sqrt(j.value)
    return _chain(j, s, 0.5 / s, -0.25 / (j.value * s))


def eval_jet2(e: Expr, p, memo: dict | None = None) -> Jet2:
    """Value, gradient and Hessian of ``e`` at chart point ``p``.

    ``memo`` (optional) caches subtree jets by node identity; passing one
    dict for many evaluations at the same point lets derived expressions
    reuse the jets of shared subexpressions."""
    pt = np.asarray(p, dtype=float)
    if pt.ndim != 1:
        raise DimensionMismatch("evaluation point must be a flat coordinate tuple")
    if memo is None:
        return _eval(e, pt, {})
    return _eval(e, pt, memo)


def _eval(e: Expr, p: np.ndarray, memo: dict) -> Jet2:
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    op = e.op
    if op == "const":
        out = jet_const(e.data, p.shape[0])
    elif op == "coord":
        if e.data >= p.shape[0]:
            raise DimensionMismatch(
                f"coordinate {e.data} out of range for dimension {p.shape[0]}")
        out = jet_coord(e.data, p)
    elif op == "add":
        out = _eval(e.args[0], p, memo) + _eval(e.args[1], p, memo)
    elif op == "sub":
        out = _eval(e.args[0], p, memo) - _eval(e.args[1], p, memo)
    elif op == "mul":
        out = _eval(e.args[0], p, memo) * _eval(e.args[1], p, memo)
    elif op == "div":
        out = _eval(e.args[0], p, memo) / _eval(e.args[1], p, memo)
    elif op == "neg":
        out = -_eval(e.args[0], p, memo)
    elif op == "pow":
        out = _jet_pow(_eval(e.args[0], p, memo), e.data)
    elif op == "sin":
        out = _jet_sin(_eval(e.args[0], p, memo))
    elif op == "cos":
        out = _jet_cos(_eval(e.args[0], p, memo))
    elif op == "exp":
        out = _jet_exp(_eval(e.args[0], p, memo))
    elif op == "log":
        out = _jet_log(_eval(e.args[0], p, memo))
    elif op == "sqrt":
        out = _jet_sqrt(_eval(e.args[0], p, memo))
    else:
        raise ValueError(f"unknown op {op!r}")
    memo[key] = (e, out)
    return out


def directional_derivative(e: Expr, v, p) -> float:
    """Gradient of ``e`` at ``p`` contracted with the direction ``v``."""
    vv = np.asarray(v, dtype=float)
    j = eval_jet2(e, p)
    if vv.shape != j.gradient.shape:
        raise DimensionMismatch("direction and point dimensions disagree")
    return float(j.gradient @ vv)
