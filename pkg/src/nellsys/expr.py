"""Expression DSL for nonlinearities, coefficients and functionals.

Grammar (standard precedence, ``^`` right-associative and binding
tighter than unary minus, which binds tighter than ``*``/``/``)::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?
    atom    := NUMBER | variable | func '(' expr (',' expr)* ')' | '(' expr ')'

Pointwise expressions know the variables ``x1``, ``x2``, ``u1..un`` and
``w`` and the functions ``exp sin cos sqrt abs min max``.  Functional
expressions have no bare variables; their atoms are ``INT(integrand)``
(integral over the domain of a pointwise expression of ``x`` and ``u``),
``EVAL(k, [p1, p2])`` (point evaluation of component ``k``) and number
literals, combined with arithmetic and ``exp sqrt abs inv``.

Evaluation is plain IEEE double arithmetic over scalars or numpy
arrays.  Domain violations (square root of a negative, division by
zero, NaN results) raise instead of propagating silently; negative
bases of fractional powers within 1e-12 of zero are clamped to absorb
round-off on nonnegative iterates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from .errors import EvaluationError, ParseError

_NEG_CLAMP = 1e-12

POINTWISE_FUNCTIONS = ("exp", "sin", "cos", "sqrt", "abs", "min", "max")
FUNCTIONAL_FUNCTIONS = ("exp", "sqrt", "abs", "inv")

#: variable sets admitted by each evaluation context
CONTEXT_VARIABLES = {
    "pointwise": ("x1", "x2", "w", "u*"),
    "integrand": ("x1", "x2", "u*"),
    "spatial": ("x1", "x2"),
}

_VAR_RE = re.compile(r"^(x1|x2|w|u[1-9][0-9]*)$")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Integral:
    """INT(integrand): integral of a pointwise expression over the domain."""

    integrand: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class PointEval:
    """EVAL(k, [p1, p2]): value of component ``k`` at a fixed point."""

    component: int
    point: tuple[float, float]
    pos: int = field(default=-1, compare=False)


Expr = Union[Num, Var, Neg, BinOp, Call, Integral, PointEval]


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),\[\]])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, context: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.context = context

    # token helpers ---------------------------------------------------------
    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if kind == "op" and text == value:
            return self.advance()
        shown = text or "end of input"
        raise ParseError(f"expected {value!r}, found {shown!r}", pos)

    def at_op(self, *values) -> bool:
        kind, text, _ = self.peek()
        return kind == "op" and text in values

    # grammar ---------------------------------------------------------------
    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {text!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.at_op("+", "-"):
            _, op, pos = self.advance()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.at_op("*", "/"):
            _, op, pos = self.advance()
            node = BinOp(op, node, self.factor(), pos)
        return node

    def factor(self) -> Expr:
        if self.at_op("-"):
            _, _, pos = self.advance()
            return Neg(self.factor(), pos)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at_op("^"):
            _, _, pos = self.advance()
            return BinOp("^", base, self.factor(), pos)
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text), pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            return self.ident_atom(text, pos)
        shown = text or "end of input"
        raise ParseError(f"expected a value, found {shown!r}", pos)

    def ident_atom(self, name: str, pos: int) -> Expr:
        if self.at_op("("):
            if self.context == "functional" and name == "INT":
                return self.int_atom(pos)
            if self.context == "functional" and name == "EVAL":
                return self.eval_atom(pos)
            return self.call(name, pos)
        if self.context == "functional":
            raise ParseError(
                f"bare variable {name!r} is not allowed in a functional expression "
                f"(use INT(...) or EVAL(k,[p1,p2]))", pos)
        allowed = CONTEXT_VARIABLES[self.context]
        if not _VAR_RE.match(name):
            raise ParseError(f"unknown identifier {name!r}", pos)
        base = "u*" if name.startswith("u") else name
        if base not in allowed:
            raise ParseError(
                f"variable {name!r} is not available in a {self.context} expression", pos)
        return Var(name, pos)

    def call(self, name: str, pos: int) -> Expr:
        table = FUNCTIONAL_FUNCTIONS if self.context == "functional" else POINTWISE_FUNCTIONS
        if name not in table:
            raise ParseError(f"unknown function {name!r}", pos)
        self.expect("(")
        args = [self.expr()]
        while self.at_op(","):
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity_ok = len(args) >= 2 if name in ("min", "max") else len(args) == 1
        if not arity_ok:
            want = "at least 2 arguments" if name in ("min", "max") else "1 argument"
            raise ParseError(f"{name} takes {want}, got {len(args)}", pos)
        return Call(name, tuple(args), pos)

    def int_atom(self, pos: int) -> Expr:
        self.expect("(")
        saved, self.context = self.context, "integrand"
        try:
            integrand = self.expr()
        finally:
            self.context = saved
        self.expect(")")
        return Integral(integrand, pos)

    def eval_atom(self, pos: int) -> Expr:
        self.expect("(")
        kind, text, kpos = self.advance()
        if kind != "num" or not float(text).is_integer() or float(text) < 1:
            raise ParseError("EVAL needs a positive integer component index", kpos)
        component = int(float(text))
        self.expect(",")
        self.expect("[")
        p1 = self.signed_number()
        self.expect(",")
        p2 = self.signed_number()
        self.expect("]")
        self.expect(")")
        return PointEval(component, (p1, p2), pos)

    def signed_number(self) -> float:
        sign = 1.0
        while self.at_op("-"):
            self.advance()
            sign = -sign
        kind, text, pos = self.advance()
        if kind != "num":
            raise ParseError("expected a number literal", pos)
        return sign * float(text)


def parse_expression(text: str, context: str = "pointwise") -> Expr:
    """Parse a pointwise expression (contexts: pointwise, integrand, spatial)."""
    if context not in CONTEXT_VARIABLES:
        raise ValueError(f"unknown context {context!r}")
    return _Parser(text, context).parse()


def parse_functional_expression(text: str) -> Expr:
    """Parse a functional expression built from INT/EVAL atoms and literals."""
    return _Parser(text, "functional").parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _check_pow(base, exponent, pos):
    b = np.asarray(base, dtype=float)
    e = np.asarray(exponent, dtype=float)
    if np.any((b == 0.0) & (e < 0.0)):
        raise EvaluationError("zero raised to a negative power", pos)
    if np.all(b >= 0.0):
        return b ** e
    integral_exponent = e.ndim == 0 and float(e) == int(e)
    if integral_exponent:
        return b ** e
    if np.all(b >= -_NEG_CLAMP):
        return np.clip(b, 0.0, None) ** e
    raise EvaluationError("fractional power of a negative base", pos)


def _safe_sqrt(x, pos):
    a = np.asarray(x, dtype=float)
    if np.all(a >= 0.0):
        return np.sqrt(a)
    if np.all(a >= -_NEG_CLAMP):
        return np.sqrt(np.clip(a, 0.0, None))
    raise EvaluationError("square root of a negative value", pos)


def _safe_div(num, den, pos):
    d = np.asarray(den, dtype=float)
    if np.any(d == 0.0):
        raise EvaluationError("division by zero", pos)
    return np.asarray(num, dtype=float) / d


def _safe_inv(x, pos):
    return _safe_div(1.0, x, pos)


AtomResolver = Callable[[Expr], float]


def eval_expr(expr: Expr, env: Mapping[str, object],
              atom_resolver: AtomResolver | None = None):
    """Evaluate an expression under ``env`` (values: scalars or arrays).

    ``atom_resolver`` supplies values for Integral/PointEval atoms; without
    one, functional atoms are an error.  NaN results raise.
    """
    result = _eval(expr, env, atom_resolver)
    if np.any(np.isnan(result)):
        raise EvaluationError("evaluation produced NaN", getattr(expr, "pos", -1))
    return result


def _eval(expr: Expr, env, resolver):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {expr.name!r}", expr.pos) from None
    if isinstance(expr, Neg):
        return -np.asarray(_eval(expr.operand, env, resolver), dtype=float)
    if isinstance(expr, BinOp):
        left = _eval(expr.left, env, resolver)
        right = _eval(expr.right, env, resolver)
        if expr.op == "+":
            return np.asarray(left, dtype=float) + right
        if expr.op == "-":
            return np.asarray(left, dtype=float) - right
        if expr.op == "*":
            return np.asarray(left, dtype=float) * right
        if expr.op == "/":
            return _safe_div(left, right, expr.pos)
        return _check_pow(left, right, expr.pos)
    if isinstance(expr, Call):
        args = [_eval(a, env, resolver) for a in expr.args]
        if expr.func == "exp":
            return np.exp(args[0])
        if expr.func == "sin":
            return np.sin(args[0])
        if expr.func == "cos":
            return np.cos(args[0])
        if expr.func == "abs":
            return np.abs(args[0])
        if expr.func == "sqrt":
            return _safe_sqrt(args[0], expr.pos)
        if expr.func == "inv":
            return _safe_inv(args[0], expr.pos)
        if expr.func == "min":
            return reduce(np.minimum, args)
        return reduce(np.maximum, args)
    if resolver is None:
        raise EvaluationError("functional atom outside a functional evaluation",
                              expr.pos)
    return resolver(expr)


def free_variables(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Neg):
        return free_variables(expr.operand)
    if isinstance(expr, BinOp):
        return free_variables(expr.left) | free_variables(expr.right)
    if isinstance(expr, Call):
        return set().union(*(free_variables(a) for a in expr.args))
    if isinstance(expr, Integral):
        return free_variables(expr.integrand)
    return set()


def walk(expr: Expr) -> Iterable[Expr]:
    yield expr
    if isinstance(expr, Neg):
        yield from walk(expr.operand)
    elif isinstance(expr, BinOp):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Call):
        for a in expr.args:
            yield from walk(a)
    elif isinstance(expr, Integral):
        yield from walk(expr.integrand)


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM_PREC = 5


def _prec(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _PREC[expr.op]
    if isinstance(expr, Neg):
        return _PREC["neg"]
    return _ATOM_PREC


def to_source(expr: Expr) -> str:
    """Render an expression; parsing the result reproduces the tree."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        inner = to_source(expr.operand)
        if _prec(expr.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, BinOp):
        p = _PREC[expr.op]
        left = to_source(expr.left)
        right = to_source(expr.right)
        if expr.op == "^":
            if _prec(expr.left) <= p:
                left = f"({left})"
            if _prec(expr.right) < p:
                right = f"({right})"
        else:
            if _prec(expr.left) < p:
                left = f"({left})"
            if _prec(expr.right) <= p:
                right = f"({right})"
        return f"{left}{expr.op}{right}"
    if isinstance(expr, Call):
        return f"{expr.func}({','.join(to_source(a) for a in expr.args)})"
    if isinstance(expr, Integral):
        return f"INT({to_source(expr.integrand)})"
    return f"EVAL({expr.component},[{expr.point[0]!r},{expr.point[1]!r}])"
