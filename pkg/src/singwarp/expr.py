"""Scalar expression trees over chart coordinates.

Expressions are immutable and hashable; fixtures and derived fields build
them once and evaluation never mutates them.  The wire format is a prefix
s-expression, e.g. ``(mul (coord 0) (coord 0))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DimensionMismatch

_UNARY = ("sin", "cos", "exp", "log", "sqrt", "neg")
_BINARY = ("add", "sub", "mul", "div")
_OPS = _UNARY + _BINARY + ("coord", "const", "pow")


@dataclass(frozen=True)
class Expr:
    """One node of an expression tree.

    ``data`` holds the coordinate index for ``coord``, the value for
    ``const`` and the integer exponent for ``pow``; it is None otherwise.
    """

    op: str
    args: tuple["Expr", ...] = ()
    data: float | int | None = None

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown expression op {self.op!r}")
        if self.op == "pow" and not isinstance(self.data, int):
            raise ValueError("pow exponent must be an integer")
        if self.op == "coord" and (not isinstance(self.data, int) or self.data < 0):
            raise ValueError("coordinate index must be a nonnegative integer")

    # Arithmetic sugar so fixtures read naturally.
    def __add__(self, other):
        return Expr("add", (self, as_expr(other)))

    def __radd__(self, other):
        return Expr("add", (as_expr(other), self))

    def __sub__(self, other):
        return Expr("sub", (self, as_expr(other)))

    def __rsub__(self, other):
        return Expr("sub", (as_expr(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, as_expr(other)))

    def __rmul__(self, other):
        return Expr("mul", (as_expr(other), self))

    def __truediv__(self, other):
        return Expr("div", (self, as_expr(other)))

    def __rtruediv__(self, other):
        return Expr("div", (as_expr(other), self))

    def __pow__(self, k: int):
        return Expr("pow", (self,), int(k))

    def __neg__(self):
        return Expr("neg", (self,))

    def __str__(self):
        return serialize(self)


def coord(i: int) -> Expr:
    return Expr("coord", (), int(i))


def const(c: float) -> Expr:
    return Expr("const", (), float(c))


ZERO = const(0.0)
ONE = const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return const(float(x))
    raise TypeError(f"cannot coerce {type(x).__name__} to Expr")


def sin(e: Expr) -> Expr:
    return Expr("sin", (as_expr(e),))


def cos(e: Expr) -> Expr:
    return Expr("cos", (as_expr(e),))


def exp(e: Expr) -> Expr:
    return Expr("exp", (as_expr(e),))


def log(e: Expr) -> Expr:
    return Expr("log", (as_expr(e),))


def sqrt(e: Expr) -> Expr:
    return Expr("sqrt", (as_expr(e),))


def max_coord_index(e: Expr) -> int:
    """Largest coordinate index appearing in ``e``, or -1 for constants."""
    if e.op == "coord":
        return e.data
    if not e.args:
        return -1
    return max(max_coord_index(a) for a in e.args)


def check_well_formed(e: Expr, dim: int) -> None:
    if max_coord_index(e) >= dim:
        raise DimensionMismatch(
            f"expression uses coordinate {max_coord_index(e)} on a chart of dimension {dim}"
        )


def shift_coords(e: Expr, offset: int) -> Expr:
    """Re-index every coordinate by ``offset`` (used when embedding factor
    expressions into a product chart)."""
    if offset == 0:
        return e
    if e.op == "coord":
        return coord(e.data + offset)
    if not e.args:
        return e
    return Expr(e.op, tuple(shift_coords(a, offset) for a in e.args), e.data)


def is_zero(e: Expr) -> bool:
    return e.op == "const" and e.data == 0.0


# ---------------------------------------------------------------------------
# s-expression wire format


def serialize(e: Expr) -> str:
    if e.op == "coord":
        return f"(coord {e.data})"
    if e.op == "const":
        return f"(const {e.data!r})"
    if e.op == "pow":
        return f"(pow {serialize(e.args[0])} {e.data})"
    inner = " ".join(serialize(a) for a in e.args)
    return f"({e.op} {inner})"


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def parse(text: str) -> Expr:
    """Parse a prefix s-expression.  ``add``/``mul`` accept two or more
    operands (folded left); bare numeric tokens are constant sugar."""
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty expression")
    e, rest = _parse_tokens(tokens)
    if rest:
        raise ValueError(f"trailing tokens after expression: {' '.join(rest)}")
    return e


def _parse_atom(tok: str) -> Expr:
    try:
        return const(float(tok))
    except ValueError:
        raise ValueError(f"unexpected token {tok!r}") from None


def _parse_tokens(tokens: list[str]) -> tuple[Expr, list[str]]:
    tok, rest = tokens[0], tokens[1:]
    if tok != "(":
        return _parse_atom(tok), rest
    if not rest:
        raise ValueError("unbalanced parenthesis")
    op, rest = rest[0], rest[1:]
    if op == "coord":
        idx, rest = rest[0], rest[1:]
        e = coord(int(idx))
    elif op == "const":
        val, rest = rest[0], rest[1:]
        e = const(float(val))
    elif op == "pow":
        base, rest = _parse_tokens(rest)
        k, rest = rest[0], rest[1:]
        e = Expr("pow", (base,), int(k))
    elif op in _UNARY:
        arg, rest = _parse_tokens(rest)
        e = Expr(op, (arg,))
    elif op in _BINARY:
        operands = []
        while rest and rest[0] != ")":
            a, rest = _parse_tokens(rest)
            operands.append(a)
        if len(operands) < 2:
            raise ValueError(f"{op} needs at least two operands")
        e = operands[0]
        for a in operands[1:]:
            e = Expr(op, (e, a))
        if not rest:
            raise ValueError("unbalanced parenthesis")
        return e, rest[1:]
    else:
        raise ValueError(f"unknown operator {op!r}")
    if not rest or rest[0] != ")":
        raise ValueError("unbalanced parenthesis")
    return e, rest[1:]
