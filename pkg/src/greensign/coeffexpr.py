"""Parse, evaluate and symbolically differentiate coefficient expressions.

Expressions are functions of the single variable ``t`` built from real
literals, ``pi``, the binary operators ``+ - * / ^`` (with ``^``
right-associative and binding tightest), unary minus, and the functions
sin, cos, tan, sinh, cosh, tanh, exp, log, sqrt, abs.  Multiplication is
always explicit: ``2*t``, never ``2t``.

Expression trees are immutable; evaluation is pure and accepts either a
scalar or a numpy array of sample points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "CoefficientExpr",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "DomainError",
    "parse_expr",
    "eval_expr",
    "differentiate",
    "unparse",
    "is_zero",
]


class ExprError(ValueError):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    """Malformed input text; carries the 0-based offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownIdentifierError(ExprSyntaxError):
    pass


class DomainError(ExprError):
    """Evaluation left the real domain (log of non-positive, x/0, ...)."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    """The variable t."""


@dataclass(frozen=True)
class Pi:
    """The literal pi."""


@dataclass(frozen=True)
class Neg:
    operand: "CoefficientExpr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "CoefficientExpr"
    right: "CoefficientExpr"


@dataclass(frozen=True)
class Fun:
    name: str
    arg: "CoefficientExpr"


CoefficientExpr = Union[Const, Var, Pi, Neg, Bin, Fun]

_FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "abs")

ZERO = Const(0.0)
ONE = Const(1.0)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(text: str):
    """Yield (kind, value, position) triples; kinds: num, name, op, end."""
    tokens = []
    i, size = 0, len(text)
    while i < size:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c in _OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < size and text[i + 1].isdigit()):
            j = i
            while j < size and text[j].isdigit():
                j += 1
            if j < size and text[j] == ".":
                j += 1
                while j < size and text[j].isdigit():
                    j += 1
            if j < size and text[j] in "eE":
                k = j + 1
                if k < size and text[k] in "+-":
                    k += 1
                if k < size and text[k].isdigit():
                    j = k
                    while j < size and text[j].isdigit():
                        j += 1
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < size and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", size))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, where = self.peek()
        if kind != "op" or value != op:
            raise ExprSyntaxError(f"expected {op!r}", where)
        self.advance()

    # expr := term (('+'|'-') term)*
    def expr(self) -> CoefficientExpr:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                node = Bin(value, node, rhs)
            else:
                return node

    # term := unary (('*'|'/') unary)*
    def term(self) -> CoefficientExpr:
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                rhs = self.unary()
                node = Bin(value, node, rhs)
            else:
                return node

    # unary := '-' unary | power
    def unary(self) -> CoefficientExpr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    # power := atom ('^' unary)?   -- right associative, binds above unary minus
    def power(self) -> CoefficientExpr:
        node = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return Bin("^", node, self.unary())
        return node

    def atom(self) -> CoefficientExpr:
        kind, value, where = self.advance()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value == "t":
                return Var()
            if value == "pi":
                return Pi()
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Fun(value, arg)
            raise UnknownIdentifierError(f"unknown identifier {value!r}", where)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected {value!r}" if value else "unexpected end of input", where)


def parse_expr(text: str) -> CoefficientExpr:
    """Parse an expression string into a CoefficientExpr tree.

    Raises ExprSyntaxError (with a character offset) on malformed input,
    UnknownIdentifierError for names outside the fixed grammar.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    if not text.isascii():
        raise ExprSyntaxError("non-ASCII input", 0)
    parser = _Parser(_tokenize(text))
    node = parser.expr()
    kind, value, where = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing {value!r}", where)
    return node


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _check_finite(values: np.ndarray, what: str):
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{what} produced a non-finite value")


def _eval(node: CoefficientExpr, t: np.ndarray) -> np.ndarray:
    if isinstance(node, Const):
        return np.full_like(t, node.value)
    if isinstance(node, Pi):
        return np.full_like(t, math.pi)
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval(node.operand, t)
    if isinstance(node, Bin):
        left = _eval(node.left, t)
        right = _eval(node.right, t)
        if node.op == "+":
            out = left + right
        elif node.op == "-":
            out = left - right
        elif node.op == "*":
            out = left * right
        elif node.op == "/":
            if np.any(right == 0.0):
                raise DomainError("division by zero")
            out = left / right
        else:  # ^
            with np.errstate(all="ignore"):
                out = np.power(left, right)
            # negative base with non-integer exponent, 0^negative, overflow
            _check_finite(out, "power")
        _check_finite(out, f"operator {node.op!r}")
        return out
    if isinstance(node, Fun):
        arg = _eval(node.arg, t)
        name = node.name
        if name == "log":
            if np.any(arg <= 0.0):
                raise DomainError("log of a non-positive value")
        elif name == "sqrt":
            if np.any(arg < 0.0):
                raise DomainError("sqrt of a negative value")
        with np.errstate(all="ignore"):
            if name == "abs":
                out = np.abs(arg)
            else:
                out = getattr(np, name)(arg)
        _check_finite(out, name)
        return out
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr(e: CoefficientExpr, t):
    """Evaluate at a point or numpy array of points.

    Returns a float for scalar input, an ndarray otherwise.  Raises
    DomainError whenever the real-valued result would be undefined or
    non-finite at any requested point (never returns inf/nan silently).
    """
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("evaluation point is not finite")
    out = _eval(e, arr)
    if arr.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Constructors with constant folding
# ---------------------------------------------------------------------------


def is_zero(e: CoefficientExpr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_const(e: CoefficientExpr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def _add(l, r):
    if isinstance(l, Const) and isinstance(r, Const):
        return Const(l.value + r.value)
    if is_zero(l):
        return r
    if is_zero(r):
        return l
    return Bin("+", l, r)


def _sub(l, r):
    if isinstance(l, Const) and isinstance(r, Const):
        return Const(l.value - r.value)
    if is_zero(r):
        return l
    if is_zero(l):
        return _neg(r)
    return Bin("-", l, r)


def _neg(e):
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.operand
    return Neg(e)


def _mul(l, r):
    if isinstance(l, Const) and isinstance(r, Const):
        return Const(l.value * r.value)
    if is_zero(l) or is_zero(r):
        return ZERO
    if _is_const(l, 1.0):
        return r
    if _is_const(r, 1.0):
        return l
    return Bin("*", l, r)


def _div(l, r):
    if is_zero(l) and not is_zero(r):
        return ZERO
    if _is_const(r, 1.0):
        return l
    if isinstance(l, Const) and isinstance(r, Const) and r.value != 0.0:
        return Const(l.value / r.value)
    return Bin("/", l, r)


def _pow(l, r):
    if _is_const(r, 1.0):
        return l
    if _is_const(r, 0.0):
        return ONE
    return Bin("^", l, r)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def differentiate(e: CoefficientExpr) -> CoefficientExpr:
    """Return the symbolic derivative d/dt as a new expression tree.

    Closed on the grammar.  abs differentiates to arg*arg'/abs(arg), which
    raises a DomainError when evaluated where the argument vanishes.
    """
    if isinstance(e, (Const, Pi)):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return _neg(differentiate(e.operand))
    if isinstance(e, Bin):
        l, r = e.left, e.right
        dl, dr = differentiate(l), differentiate(r)
        if e.op == "+":
            return _add(dl, dr)
        if e.op == "-":
            return _sub(dl, dr)
        if e.op == "*":
            return _add(_mul(dl, r), _mul(l, dr))
        if e.op == "/":
            return _div(_sub(_mul(dl, r), _mul(l, dr)), _pow(r, Const(2.0)))
        # power: constant exponent gets the plain power rule (valid for
        # negative bases with integer exponents); otherwise the general
        # l^r * (r' log l + r l'/l) form.
        if isinstance(r, Const):
            return _mul(_mul(r, _pow(l, Const(r.value - 1.0))), dl)
        return _mul(
            _pow(l, r),
            _add(_mul(dr, Fun("log", l)), _mul(r, _div(dl, l))),
        )
    if isinstance(e, Fun):
        arg, darg = e.arg, differentiate(e.arg)
        name = e.name
        if name == "sin":
            return _mul(Fun("cos", arg), darg)
        if name == "cos":
            return _neg(_mul(Fun("sin", arg), darg))
        if name == "tan":
            return _div(darg, _pow(Fun("cos", arg), Const(2.0)))
        if name == "sinh":
            return _mul(Fun("cosh", arg), darg)
        if name == "cosh":
            return _mul(Fun("sinh", arg), darg)
        if name == "tanh":
            return _div(darg, _pow(Fun("cosh", arg), Const(2.0)))
        if name == "exp":
            return _mul(e, darg)
        if name == "log":
            return _div(darg, arg)
        if name == "sqrt":
            return _div(darg, _mul(Const(2.0), e))
        if name == "abs":
            return _div(_mul(arg, darg), e)
    raise TypeError(f"not an expression node: {e!r}")


def derivatives(e: CoefficientExpr, order: int) -> list[CoefficientExpr]:
    """[e, e', ..., e^(order)] by repeated differentiation."""
    chain = [e]
    for _ in range(order):
        chain.append(differentiate(chain[-1]))
    return chain


# ---------------------------------------------------------------------------
# Unparsing
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _unparse(e: CoefficientExpr) -> tuple[str, int]:
    if isinstance(e, Const):
        if e.value < 0 or (e.value == 0.0 and math.copysign(1.0, e.value) < 0):
            return f"-{_wrap(repr(-e.value), _PREC_ATOM, _PREC_POW)}", _PREC_UNARY
        return repr(e.value), _PREC_ATOM
    if isinstance(e, Pi):
        return "pi", _PREC_ATOM
    if isinstance(e, Var):
        return "t", _PREC_ATOM
    if isinstance(e, Neg):
        inner, prec = _unparse(e.operand)
        return f"-{_wrap(inner, prec, _PREC_POW)}", _PREC_UNARY
    if isinstance(e, Fun):
        inner, _ = _unparse(e.arg)
        return f"{e.name}({inner})", _PREC_ATOM
    if isinstance(e, Bin):
        ls, lp = _unparse(e.left)
        rs, rp = _unparse(e.right)
        if e.op in "+-":
            left = _wrap(ls, lp, _PREC_ADD)
            right = _wrap(rs, rp, _PREC_ADD + 1 if e.op == "-" else _PREC_ADD)
            return f"{left} {e.op} {right}", _PREC_ADD
        if e.op in "*/":
            left = _wrap(ls, lp, _PREC_MUL)
            right = _wrap(rs, rp, _PREC_MUL + 1 if e.op == "/" else _PREC_MUL)
            return f"{left}{e.op}{right}", _PREC_MUL
        # ^ is right-associative and binds above unary minus, so the left
        # operand needs parens unless it is an atom.
        left = _wrap(ls, lp, _PREC_ATOM)
        right = _wrap(rs, rp, _PREC_UNARY)
        return f"{left}^{right}", _PREC_POW
    raise TypeError(f"not an expression node: {e!r}")


def _wrap(text: str, prec: int, needed: int) -> str:
    return f"({text})" if prec < needed else text


def unparse(e: CoefficientExpr) -> str:
    """Render a tree back to source text that re-parses equivalently."""
    return _unparse(e)[0]
