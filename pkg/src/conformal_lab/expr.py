"""Rational expression trees for maps of the unit interval.

Expressions are parsed from the small grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-'? atom ('^' uint)?
    atom   := number | identifier | '(' expr ')'

and can be evaluated pointwise, expanded into truncated Taylor series
(jets), and bounded over intervals.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import config, kernels
from .errors import (
    BasePointMismatch,
    BudgetExceeded,
    DivisionNearZero,
    ExprSyntaxError,
    UnknownIdentifier,
)
from .interval import DIV_GUARD, EPS, Interval

MAX_JET_ORDER = 32


# --------------------------------------------------------------------------
# tree

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "x"


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Div:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Union[Const, Var, Add, Sub, Mul, Div, Neg, Pow]
_BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def to_text(node):
    """Fully parenthesized canonical form; re-parses to the same tree."""
    if isinstance(node, Const):
        v = node.value
        return repr(v) if v >= 0 else f"(-{repr(-v)})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)}^{node.exponent})"
    return f"({to_text(node.left)} {_BINARY[type(node)]} {to_text(node.right)})"


def variables(node):
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, (Neg,)):
        return variables(node.arg)
    if isinstance(node, Pow):
        return variables(node.base)
    return variables(node.left) | variables(node.right)


def substitute(node, name, replacement):
    """Replace every ``Var(name)`` by the node ``replacement``."""
    if isinstance(node, Var):
        return replacement if node.name == name else node
    if isinstance(node, Const):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, name, replacement))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, name, replacement), node.exponent)
    return type(node)(substitute(node.left, name, replacement),
                      substitute(node.right, name, replacement))


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


class _Parser:
    def __init__(self, text, allowed):
        self.text = text
        self.allowed = allowed
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                self.fail(f"unexpected character {text[pos]!r}", pos)
            if m.lastgroup != "ws":
                self.tokens.append((m.lastgroup, m.group(), pos))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def byte_offset(self, pos):
        return len(self.text[:pos].encode("utf-8"))

    def fail(self, msg, pos, cls=ExprSyntaxError):
        raise cls(msg, self.text, self.byte_offset(pos))

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            self.fail(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            self.fail(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self):
        negate = False
        if self.peek()[1] == "-":
            self.take()
            negate = True
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                self.fail("exponent must be a non-negative integer literal", pos)
            node = Pow(node, int(text))
        return Neg(node) if negate else node

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "ident":
            if text not in self.allowed:
                self.fail(f"unknown identifier {text!r}", pos, UnknownIdentifier)
            return Var(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {text or 'end of input'!r}", pos)


def parse_tree(text, allowed=("x",)):
    return _Parser(text, frozenset(allowed)).parse()


# --------------------------------------------------------------------------
# pointwise evaluation

def _check_den(b):
    if np.any(np.abs(b) < DIV_GUARD):
        raise DivisionNearZero("denominator magnitude below 1e-12")


def _power(a, k):
    # repeated multiplication, same operation order as the compiled kernels
    if k == 0:
        return np.ones_like(a) if isinstance(a, np.ndarray) else 1.0
    p = a
    for _ in range(k - 1):
        p = p * a
    return p


def evaluate_tree(node, env):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate_tree(node.arg, env)
    if isinstance(node, Pow):
        return _power(evaluate_tree(node.base, env), node.exponent)
    a = evaluate_tree(node.left, env)
    b = evaluate_tree(node.right, env)
    if isinstance(node, Add):
        return a + b
    if isinstance(node, Sub):
        return a - b
    if isinstance(node, Mul):
        return a * b
    _check_den(b)
    return a / b


def _interval_tree(node, env):
    """Interval enclosure of the value; ``env`` maps names to Intervals."""
    if isinstance(node, Const):
        return Interval.point(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_interval_tree(node.arg, env)
    if isinstance(node, Pow):
        return _interval_tree(node.base, env) ** node.exponent
    a = _interval_tree(node.left, env)
    b = _interval_tree(node.right, env)
    if isinstance(node, Add):
        return a + b
    if isinstance(node, Sub):
        return a - b
    if isinstance(node, Mul):
        return a * b
    return a / b


# --------------------------------------------------------------------------
# truncated series arithmetic, shared by float and Interval coefficients

def _ser_mul(a, b, k):
    return [sum((a[i] * b[j - i] for i in range(1, j + 1)), a[0] * b[j])
            for j in range(k + 1)]


def _ser_div(a, b, k):
    if isinstance(b[0], Interval):
        inv0 = b[0].reciprocal()
    else:
        if abs(b[0]) < DIV_GUARD:
            raise DivisionNearZero("jet denominator magnitude below 1e-12")
        inv0 = None
    q = []
    for j in range(k + 1):
        s = a[j]
        for i in range(j):
            s = s - q[i] * b[j - i]
        q.append(s * inv0 if inv0 is not None else s / b[0])
    return q


def _ser_pow(a, e, k, one):
    out = [one] + [one * 0.0] * k
    for _ in range(e):
        out = _ser_mul(out, a, k)
    return out


def _series(node, base, k, one, zero, env=None):
    """Taylor coefficients of ``node`` around the base value ``base`` of x."""
    if isinstance(node, Const):
        return [one * node.value] + [zero] * k
    if isinstance(node, Var):
        if node.name != "x":
            v = env[node.name]
            return [v] + [zero] * k
        out = [base] + [zero] * k
        if k >= 1:
            out[1] = one
        return out
    if isinstance(node, Neg):
        return [-c for c in _series(node.arg, base, k, one, zero, env)]
    if isinstance(node, Pow):
        return _ser_pow(_series(node.base, base, k, one, zero, env), node.exponent, k, one)
    a = _series(node.left, base, k, one, zero, env)
    b = _series(node.right, base, k, one, zero, env)
    if isinstance(node, Add):
        return [x + y for x, y in zip(a, b)]
    if isinstance(node, Sub):
        return [x - y for x, y in zip(a, b)]
    if isinstance(node, Mul):
        return _ser_mul(a, b, k)
    return _ser_div(a, b, k)


# --------------------------------------------------------------------------
# public types

@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion: ``coeffs[j] = f^(j)(base_point) / j!``."""

    base_point: float
    coeffs: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if not c:
            raise ValueError("a jet needs at least one coefficient")
        if not all(math.isfinite(v) for v in c):
            raise ValueError("jet coefficients must be finite")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "base_point", float(self.base_point))

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def value(self):
        return self.coeffs[0]

    @classmethod
    def identity(cls, a, k):
        c = [float(a), 1.0] + [0.0] * (k - 1)
        return cls(a, tuple(c[: k + 1]))

    def __call__(self, x):
        """Evaluate the Taylor polynomial at ``x`` (in powers of ``x - base_point``)."""
        h = np.asarray(x, dtype=float) - self.base_point
        out = np.zeros_like(h) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            out = out * h + c
        return out if out.ndim else float(out)


class AnalyticExpr:
    """A parsed map expression together with its compiled kernel program."""

    __slots__ = ("root", "_program")

    def __init__(self, root):
        self.root = root
        self._program = None

    @classmethod
    def parse(cls, text, allowed=("x",)):
        return cls(parse_tree(text, allowed))

    @property
    def free_variables(self):
        return variables(self.root)

    @property
    def program(self):
        if self._program is None:
            self._program = kernels.compile_tree(self.root)
        return self._program

    def substitute(self, name, value):
        return AnalyticExpr(substitute(self.root, name, Const(float(value))))

    def __call__(self, x):
        return evaluate(self, x)

    def jet(self, a, k):
        return eval_jet(self, a, k)

    def __eq__(self, other):
        return isinstance(other, AnalyticExpr) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __str__(self):
        return to_text(self.root)

    def __repr__(self):
        return f"AnalyticExpr({to_text(self.root)!r})"

    def __sub__(self, other):
        return AnalyticExpr(Sub(self.root, other.root))

    # hooks used by sup_norm_diff
    def grid_values(self, xs):
        return np.asarray(evaluate(self, np.asarray(xs, dtype=float)), dtype=float) + np.zeros(len(xs))

    def grid_enclosure(self, xs):
        """Certified enclosures of the values at the points ``xs``."""
        xs = np.asarray(xs, dtype=float)
        vlo, vhi, _, _ = kernels.interval_chain_words(
            self.program, np.zeros((len(xs), 1), dtype=np.int64),
            np.ones(len(xs), dtype=np.int64), xs, xs)
        return vlo, vhi

    def derivative_pieces(self, los, his):
        _, _, dlo, dhi = kernels.interval_chain_words(
            self.program, np.zeros((len(los), 1), dtype=np.int64),
            np.ones(len(los), dtype=np.int64), los, his)
        return dlo, dhi

    @property
    def op_count(self):
        return len(self.program.ops)


def _as_expr(e):
    if isinstance(e, AnalyticExpr):
        return e
    if isinstance(e, str):
        return AnalyticExpr.parse(e)
    return AnalyticExpr(e)


def parse(text):
    """Parse map text in the variable ``x``."""
    return AnalyticExpr.parse(text)


def evaluate(e, x):
    """Value of ``e`` at ``x`` (scalar or array)."""
    e = _as_expr(e)
    free = e.free_variables - {"x"}
    if free:
        raise UnknownIdentifier(f"unbound variables {sorted(free)}")
    out = evaluate_tree(e.root, {"x": x})
    if isinstance(x, np.ndarray):
        return np.zeros_like(x, dtype=float) + out
    return float(out)


def eval_jet(e, a, k):
    """Jet of order ``k`` of ``e`` at ``a``."""
    e = _as_expr(e)
    if not 0 <= k <= MAX_JET_ORDER:
        raise ValueError(f"jet order must lie in [0, {MAX_JET_ORDER}]")
    coeffs = _series(e.root, float(a), k, 1.0, 0.0)
    return Jet(a, tuple(coeffs))


def compose_jets(outer, inner):
    """Jet of ``outer ∘ inner`` at ``inner.base_point``.

    ``outer`` must be expanded around the value of ``inner``.
    """
    if outer.order != inner.order:
        raise BasePointMismatch(f"jet orders differ ({outer.order} vs {inner.order})")
    if abs(outer.base_point - inner.coeffs[0]) > 1e-9:
        raise BasePointMismatch(
            f"outer jet is based at {outer.base_point}, inner value is {inner.coeffs[0]}")
    k = inner.order
    delta = [0.0] + list(inner.coeffs[1:])
    acc = [outer.coeffs[k]] + [0.0] * k
    for j in range(k - 1, -1, -1):
        acc = _ser_mul(acc, delta, k)
        acc[0] += outer.coeffs[j]
    return Jet(inner.base_point, tuple(acc))


def interval_taylor(e, interval, k, env=None):
    """Enclosures of ``f^(j)(x)/j!`` for ``x`` in ``interval``, ``j = 0..k``.

    ``env`` binds extra variables (e.g. a parameter ``t``) to Intervals.
    """
    e = _as_expr(e)
    iv = interval if isinstance(interval, Interval) else Interval(*interval)
    one = Interval.point(1.0)
    zero = Interval.point(0.0)
    return _series(e.root, iv, k, one, zero, env or {})


def interval_value(e, env):
    """Interval enclosure of the value of ``e`` with variables bound to Intervals."""
    return _interval_tree(_as_expr(e).root, env)


def _pieces(lo, hi, depth):
    edges = np.linspace(lo, hi, 2 ** depth + 1)
    return edges[:-1], edges[1:]


def derivative_enclosure(e, interval, depth=0):
    """Certified enclosure of ``{e'(x) : x in interval}``.

    The interval is cut into ``2**depth`` equal pieces and the hull of the
    per-piece interval derivatives is returned.
    """
    e = _as_expr(e)
    iv = interval if isinstance(interval, Interval) else Interval(*interval)
    los, his = _pieces(iv.lo, iv.hi, depth)
    dlo, dhi = e.derivative_pieces(los, his)
    return Interval(float(dlo.min()), float(dhi.max()))


def range_enclosure(e, interval, depth=0):
    e = _as_expr(e)
    iv = interval if isinstance(interval, Interval) else Interval(*interval)
    los, his = _pieces(iv.lo, iv.hi, depth)
    vlo, vhi, _, _ = kernels.interval_chain_words(
        e.program, np.zeros((len(los), 1), dtype=np.int64),
        np.ones(len(los), dtype=np.int64), los, his)
    return Interval(float(vlo.min()), float(vhi.max()))


LIPSCHITZ_DEPTH = 6


def _pointwise_gap(f, g, xs):
    """Lower and upper bounds of ``|f - g|`` at each point of ``xs``."""
    if hasattr(f, "grid_enclosure") and hasattr(g, "grid_enclosure"):
        flo, fhi = f.grid_enclosure(xs)
        glo, ghi = g.grid_enclosure(xs)
        up = np.maximum(fhi - glo, ghi - flo)
        low = np.maximum(0.0, np.maximum(flo - ghi, glo - fhi))
        return low - np.abs(low) * EPS, up + np.abs(up) * EPS
    # duck-typed maps: point values plus a rounding allowance
    probe = np.abs(f.grid_values(xs)) + np.abs(g.grid_values(xs))
    slack = EPS * (f.op_count + g.op_count + 2) * np.maximum(probe, 1.0)
    d = np.abs(f.grid_values(xs) - g.grid_values(xs))
    return np.maximum(0.0, d - slack), d + slack


def _derivative_gap(f, g, los, his):
    """Bound of ``|(f - g)'|`` on each piece ``[los[i], his[i]]``."""
    if isinstance(f, AnalyticExpr) and isinstance(g, AnalyticExpr):
        dlo, dhi = (f - g).derivative_pieces(los, his)
    else:
        flo, fhi = f.derivative_pieces(los, his)
        glo, ghi = g.derivative_pieces(los, his)
        dlo = flo - ghi - (np.abs(flo) + np.abs(ghi)) * EPS
        dhi = fhi - glo + (np.abs(fhi) + np.abs(glo)) * EPS
    return np.maximum(np.abs(dlo), np.abs(dhi))


def sup_norm_diff(f, g, tol, budget=None):
    """Enclosure of ``sup_{x in [0,1]} |f(x) - g(x)|`` of width at most ``tol``.

    ``f`` and ``g`` are expressions or word maps (anything exposing
    ``derivative_pieces`` and either ``grid_enclosure`` or ``grid_values``
    with ``op_count``).  Branch and bound over subintervals: on a piece of
    half-width ``r`` with midpoint ``m``, ``|f - g| <= |f - g|(m) + L r``
    where ``L`` bounds ``|(f - g)'|`` on the piece.  Pieces that cannot
    beat the best certified point value by more than ``tol`` are retired;
    the rest are halved.  Every midpoint evaluation counts against the
    budget.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(f, str):
        f = parse(f)
    if isinstance(g, str):
        g = parse(g)
    if f == g:
        return Interval(0.0, 0.0)
    budget = config.resolve_budget(budget)

    los, his = _pieces(0.0, 1.0, LIPSCHITZ_DEPTH)
    lo = 0.0
    retired = 0.0
    spent = 0
    while True:
        spent += len(los)
        if spent > budget:
            raise BudgetExceeded(f"sup-norm search exceeded the budget {budget}")
        mids = 0.5 * (los + his)
        low, up = _pointwise_gap(f, g, mids)
        lip = _derivative_gap(f, g, los, his)
        bound = up + lip * (0.5 * (his - los))
        bound = bound + np.abs(bound) * EPS
        lo = max(lo, float(np.max(low)))
        live = bound > lo + tol
        retired = max(retired, float(np.max(bound[~live]))) if np.any(~live) else retired
        if not np.any(live):
            return Interval(lo, max(retired, lo))
        if float(np.max(up[live] - low[live])) > tol:
            raise BudgetExceeded(f"tolerance {tol} is below the rounding floor")
        a, b = los[live], his[live]
        m = 0.5 * (a + b)
        if np.any((m <= a) | (m >= b)):
            raise BudgetExceeded(f"tolerance {tol} is below the rounding floor")
        los = np.concatenate([a, m])
        his = np.concatenate([m, b])
        order = np.argsort(los, kind="stable")
        los, his = los[order], his[order]
