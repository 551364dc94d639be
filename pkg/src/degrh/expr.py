"""Small complex-valued expression language.

Coefficients of the vector field, boundary data and right-hand sides are
given as text such as ``"1+2*i*x*y"`` or ``"exp(i*pi*sin(theta))"``.  The
grammar is a recursive-descent arithmetic grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Evaluation
is vectorised over numpy arrays and always complex.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "EvaluationError",
    "Num",
    "Var",
    "Const",
    "Unary",
    "Binary",
    "Expression",
    "parse",
    "evaluate",
    "pretty",
]


class ExpressionError(ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int, source: str):
        self.position = position
        self.source = source
        super().__init__(f"{message} at position {position} in {source!r}")


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r} at position {position}")


class EvaluationError(ExpressionError):
    def __init__(self, message: str, node):
        self.node = node
        super().__init__(f"{message} in {pretty(node)}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str  # pi, e, i


@dataclass(frozen=True)
class Unary:
    op: str  # neg or a function name
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


CONSTANTS = {"pi": math.pi, "e": math.e, "i": 1j}

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "abs": lambda z: np.abs(z).astype(complex),
    "arg": lambda z: np.angle(z).astype(complex),
    "re": lambda z: np.real(z).astype(complex),
    "im": lambda z: np.imag(z).astype(complex),
    "conj": np.conj,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while True:
        while pos < n and source[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.lastgroup is None:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.variables = set(variables)
        self.tokens = _tokenize(source)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value:
            what = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {what}", pos, self.source)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {text!r}", pos, self.source)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(text, pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text in self.variables:
                return Var(text)
            if text in CONSTANTS:
                return Const(text)
            raise UnknownIdentifierError(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {what}", pos, self.source)


def parse(source: str, variables: Sequence[str] = ()):
    """Parse ``source`` into an immutable AST over the given variable names."""
    if not isinstance(source, str) or not source.strip():
        raise ExpressionSyntaxError("empty expression", 0, str(source))
    return _Parser(source, variables).parse()


def _int_power(base, n: int):
    # exact repeated squaring keeps real inputs real
    if n < 0:
        return 1.0 / _int_power(base, -n)
    result = np.ones_like(base)
    b = base
    while n:
        if n & 1:
            result = result * b
        b = b * b
        n >>= 1
    return result


def _eval(node, env):
    if isinstance(node, Num):
        return np.complex128(node.value)
    if isinstance(node, Const):
        return np.complex128(CONSTANTS[node.name])
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        a = _eval(node.arg, env)
        if node.op == "neg":
            return -a
        with np.errstate(all="ignore"):
            out = FUNCTIONS[node.op](a)
        _check_finite(out, node)
        return out
    if isinstance(node, Binary):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        with np.errstate(all="ignore"):
            if op == "+":
                out = a + b
            elif op == "-":
                out = a - b
            elif op == "*":
                out = a * b
            elif op == "/":
                if np.any(np.asarray(b) == 0):
                    raise EvaluationError("division by zero", node)
                out = a / b
            else:
                bb = np.asarray(b)
                if bb.ndim == 0 and bb.imag == 0 and float(bb.real).is_integer() and abs(bb.real) <= 64:
                    if int(bb.real) < 0 and np.any(np.asarray(a) == 0):
                        raise EvaluationError("division by zero", node)
                    out = _int_power(np.asarray(a, dtype=complex), int(bb.real))
                else:
                    out = np.power(a, b)
        _check_finite(out, node)
        return out
    raise TypeError(f"not an expression node: {node!r}")


def _check_finite(value, node):
    if not np.all(np.isfinite(value)):
        raise EvaluationError("non-finite value", node)


def evaluate(ast, bindings: Mapping[str, object] | None = None):
    """Evaluate ``ast`` with complex semantics.

    Bindings may be scalars or broadcast-compatible arrays; the result is a
    complex scalar or complex ndarray.
    """
    env = {k: np.asarray(v, dtype=complex) for k, v in (bindings or {}).items()}
    missing = free_variables(ast) - env.keys()
    if missing:
        raise EvaluationError(f"unbound variables {sorted(missing)}", ast)
    out = _eval(ast, env)
    if np.ndim(out) == 0:
        return complex(out)
    return np.asarray(out, dtype=complex)


def free_variables(ast) -> set:
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Unary):
        return free_variables(ast.arg)
    if isinstance(ast, Binary):
        return free_variables(ast.left) | free_variables(ast.right)
    return set()


def pretty(ast) -> str:
    """Fully parenthesised text that reparses to an equivalent tree."""
    if isinstance(ast, Num):
        return repr(ast.value)
    if isinstance(ast, (Var, Const)):
        return ast.name
    if isinstance(ast, Unary):
        if ast.op == "neg":
            return f"(-{pretty(ast.arg)})"
        return f"{ast.op}({pretty(ast.arg)})"
    if isinstance(ast, Binary):
        return f"({pretty(ast.left)}{ast.op}{pretty(ast.right)})"
    return str(ast)


class Expression:
    """Parsed expression bound to an ordered variable list, callable positionally."""

    def __init__(self, source: str, variables: Sequence[str] = ()):
        self.source = source
        self.variables = tuple(variables)
        self.ast = parse(source, self.variables)

    def __call__(self, *args):
        if len(args) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} arguments, got {len(args)}")
        bindings = dict(zip(self.variables, args))
        used = free_variables(self.ast)
        shape = np.broadcast(*[np.asarray(a) for a in args]).shape if args else ()
        out = evaluate(self.ast, {k: v for k, v in bindings.items() if k in used})
        if shape and np.ndim(out) == 0:
            out = np.full(shape, out, dtype=complex)
        return out

    def __repr__(self):
        return f"Expression({self.source!r}, {self.variables!r})"
