"""A small, closed math-expression language.

Every equation the agent recalls or extracts is compiled into this DSL
instead of into host-language code, so LLM output can never execute
anything beyond arithmetic.

Grammar (whitespace-insensitive)::

    expr      := term (("+" | "-") term)*
    term      := unary (("*" | "/") unary)*
    unary     := "-" unary | power
    power     := atom ("^" exponent)?          # right-associative
    exponent  := "-" exponent | power
    atom      := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
               | "piecewise" "(" (cond ":" expr ";")+ expr ")"
    cond      := expr ("<" | "<=" | ">" | ">=") expr

Identifiers listed in the caller-supplied ``variables`` set become
:class:`Var` nodes; every other identifier is a fit :class:`Param`.
"""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Union

import numpy as np

FUNCTIONS = ("sqrt", "exp", "log", "log10", "abs")
BINARY_OPS = ("+", "-", "*", "/", "^")
COMPARISONS = ("<", "<=", ">", ">=")


class DSLError(ValueError):
    """Base class for parse and evaluation failures."""


class ParseError(DSLError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownFunctionError(ParseError):
    pass


class EmptyInputError(DSLError):
    pass


class UnboundNameError(DSLError):
    pass


class DomainError(DSLError):
    """A sub-expression produced a non-finite value."""

    def __init__(self, message: str, node: "Expr", index: int | None = None):
        super().__init__(message)
        self.node = node
        self.index = index


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"number literal must be finite and non-negative: {self.value}")


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be nonempty")


@dataclass(frozen=True)
class Param:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("parameter name must be nonempty")


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")


@dataclass(frozen=True)
class Cond:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class Piecewise:
    branches: tuple[tuple[Cond, "Expr"], ...]
    default: "Expr"

    def __post_init__(self):
        if not self.branches:
            raise ValueError("piecewise needs at least one conditional branch")


Expr = Union[Num, Var, Param, Neg, BinOp, Call, Piecewise]


def Add(a, b):
    return BinOp("+", a, b)


def Sub(a, b):
    return BinOp("-", a, b)


def Mul(a, b):
    return BinOp("*", a, b)


def Div(a, b):
    return BinOp("/", a, b)


def Pow(a, b):
    return BinOp("^", a, b)


# --------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|[-+*/^()<>:;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, variables: frozenset[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.variables = variables

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def _expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind != "op":
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return self._advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self._advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self._advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self._advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self._advance()
            return BinOp("^", base, self.exponent())
        return base

    def exponent(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self._advance()
            return Neg(self.exponent())
        return self.power()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self._advance()
            return Num(float(t.text))
        if t.kind == "name":
            self._advance()
            nxt = self.tok
            if t.text == "piecewise":
                return self.piecewise()
            if nxt.kind == "op" and nxt.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {t.text!r}", t.pos)
                self._advance()
                arg = self.expr()
                self._expect(")")
                return Call(t.text, arg)
            return Var(t.text) if t.text in self.variables else Param(t.text)
        if t.kind == "op" and t.text == "(":
            self._advance()
            e = self.expr()
            self._expect(")")
            return e
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", t.pos)

    def piecewise(self) -> Piecewise:
        self._expect("(")
        branches = []
        while True:
            e = self.expr()
            if self.tok.kind == "op" and self.tok.text in COMPARISONS:
                op = self._advance().text
                cond = Cond(op, e, self.expr())
                self._expect(":")
                branches.append((cond, self.expr()))
                self._expect(";")
                continue
            # an expression without a comparison is the default branch
            if not branches:
                raise ParseError("piecewise needs a conditional branch before the default", self.tok.pos)
            self._expect(")")
            return Piecewise(tuple(branches), e)


def parse(text: str, variables: Iterable[str] = ()) -> Expr:
    """Parse DSL source into an :class:`Expr` tree."""
    if text is None or not text.strip():
        raise EmptyInputError("empty expression")
    return _Parser(text, frozenset(variables)).parse()


# --------------------------------------------------------------------------
# Printing


def _fmt_num(v: float) -> str:
    if v.is_integer() and v < 1e16:
        return str(int(v))
    return repr(v)


def _pow_operand(e: Expr) -> str:
    s = print_canonical(e)
    if isinstance(e, BinOp) and e.op == "^":
        return f"({s})"
    return s


def print_canonical(e: Expr) -> str:
    """Deterministic, fully parenthesized rendering that re-parses to ``e``."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_pow_operand(e.operand)})"
    if isinstance(e, BinOp):
        if e.op == "^":
            return f"{_pow_operand(e.left)}^{_pow_operand(e.right)}"
        return f"({print_canonical(e.left)} {e.op} {print_canonical(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({print_canonical(e.arg)})"
    if isinstance(e, Cond):
        return f"{print_canonical(e.left)} {e.op} {print_canonical(e.right)}"
    if isinstance(e, Piecewise):
        parts = [f"{print_canonical(c)} : {print_canonical(b)}" for c, b in e.branches]
        parts.append(print_canonical(e.default))
        return "piecewise(" + " ; ".join(parts) + ")"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Names


def walk(e):
    """Pre-order traversal of every node."""
    yield e
    if isinstance(e, Neg):
        yield from walk(e.operand)
    elif isinstance(e, (BinOp, Cond)):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Call):
        yield from walk(e.arg)
    elif isinstance(e, Piecewise):
        for c, b in e.branches:
            yield from walk(c)
            yield from walk(b)
        yield from walk(e.default)


def free_names(e: Expr) -> tuple[frozenset[str], frozenset[str]]:
    """Return ``(variable names, parameter names)`` referenced by ``e``."""
    vs = {n.name for n in walk(e) if isinstance(n, Var)}
    ps = {n.name for n in walk(e) if isinstance(n, Param)}
    return frozenset(vs), frozenset(ps)


def param_order(e: Expr) -> tuple[str, ...]:
    """Parameter names in order of first appearance (left to right)."""
    seen: dict[str, None] = {}
    for n in walk(e):
        if isinstance(n, Param):
            seen.setdefault(n.name, None)
    return tuple(seen)


# --------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class Bindings:
    variables: Mapping[str, float] = field(default_factory=dict)
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        overlap = set(self.variables) & set(self.parameters)
        if overlap:
            raise ValueError(f"names bound as both variable and parameter: {sorted(overlap)}")
        for name, v in {**self.variables, **self.parameters}.items():
            if not np.all(np.isfinite(v)):
                raise ValueError(f"binding {name!r} is not finite")
        object.__setattr__(self, "variables", dict(self.variables))
        object.__setattr__(self, "parameters", dict(self.parameters))


def evaluate(e: Expr, b: Bindings) -> float:
    """Evaluate ``e`` at a single point."""
    return float(evaluate_array(e, b.variables, b.parameters, n=1)[0])


def evaluate_array(
    e: Expr,
    variables: Mapping[str, "np.ndarray | float"],
    parameters: Mapping[str, float],
    n: int | None = None,
) -> np.ndarray:
    """Evaluate ``e`` over ``n`` points at once.

    Variable values may be scalars or length-``n`` arrays. Piecewise
    branches are only evaluated on the points that select them, so a branch
    that is undefined elsewhere does not raise.
    """
    arrays = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in variables.items()}
    if n is None:
        n = max((a.size for a in arrays.values()), default=1)
    env = {}
    for k, a in arrays.items():
        if a.size == 1:
            a = np.full(n, a[0])
        elif a.size != n:
            raise ValueError(f"variable {k!r} has {a.size} values, expected {n}")
        env[k] = a
    params = {k: float(v) for k, v in parameters.items()}
    for k in set(env) & set(params):
        raise ValueError(f"name {k!r} bound as both variable and parameter")
    idx = np.arange(n)
    return _eval(e, env, params, idx)


def _domain(node, values, idx, what="non-finite result"):
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(idx[np.argmax(bad)])
        raise DomainError(f"{what} in {print_canonical(node)} (point {i})", node, i)
    return values


def _eval(e, env, params, idx) -> np.ndarray:
    if isinstance(e, Num):
        return np.full(idx.size, e.value)
    if isinstance(e, Var):
        if e.name not in env:
            raise UnboundNameError(f"unbound variable {e.name!r}")
        return env[e.name][idx]
    if isinstance(e, Param):
        if e.name not in params:
            raise UnboundNameError(f"unbound parameter {e.name!r}")
        return np.full(idx.size, params[e.name])
    if isinstance(e, Neg):
        return -_eval(e.operand, env, params, idx)
    if isinstance(e, BinOp):
        a = _eval(e.left, env, params, idx)
        b = _eval(e.right, env, params, idx)
        with np.errstate(all="ignore"):
            if e.op == "+":
                return _domain(e, a + b, idx)
            if e.op == "-":
                return _domain(e, a - b, idx)
            if e.op == "*":
                return _domain(e, a * b, idx)
            if e.op == "/":
                if np.any(b == 0):
                    _domain(e, np.where(b == 0, np.nan, 0.0), idx, "division by zero")
                return _domain(e, a / b, idx)
            if np.any((a == 0) & (b < 0)):
                _domain(e, np.where((a == 0) & (b < 0), np.nan, 0.0), idx, "zero to a negative power")
            return _domain(e, np.power(a, b), idx)
    if isinstance(e, Call):
        a = _eval(e.arg, env, params, idx)
        with np.errstate(all="ignore"):
            if e.func in ("log", "log10"):
                if np.any(a <= 0):
                    _domain(e, np.where(a <= 0, np.nan, 0.0), idx, "logarithm of a non-positive value")
                return np.log(a) if e.func == "log" else np.log10(a)
            if e.func == "sqrt":
                if np.any(a < 0):
                    _domain(e, np.where(a < 0, np.nan, 0.0), idx, "square root of a negative value")
                return np.sqrt(a)
            if e.func == "exp":
                return _domain(e, np.exp(a), idx)
            return np.abs(a)
    if isinstance(e, Piecewise):
        out = np.empty(idx.size)
        remaining = np.arange(idx.size)
        for cond, branch in e.branches:
            if remaining.size == 0:
                break
            sub = idx[remaining]
            hit = _cond(cond, env, params, sub)
            if hit.any():
                out[remaining[hit]] = _eval(branch, env, params, sub[hit])
            remaining = remaining[~hit]
        if remaining.size:
            out[remaining] = _eval(e.default, env, params, idx[remaining])
        return out
    raise TypeError(f"not an expression node: {e!r}")


def _cond(c: Cond, env, params, idx) -> np.ndarray:
    a = _eval(c.left, env, params, idx)
    b = _eval(c.right, env, params, idx)
    if c.op == "<":
        return a < b
    if c.op == "<=":
        return a <= b
    if c.op == ">":
        return a > b
    return a >= b
