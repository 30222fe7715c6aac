"""Expression language for scalar potentials on R^n.

A small grammar (arithmetic, powers, elementary functions) with a
tokenizer and recursive-descent parser, exact symbolic differentiation
with conservative simplification, and compiled pointwise evaluation fast
enough for trajectory integration.

Expression trees are immutable and evaluation is pure, so values can be
shared freely between threads.  A :class:`ParsedPotential` prepares all
first and second derivatives (and their compiled forms) eagerly at
construction time; nothing is mutated afterwards.

Grammar notes: ``^`` is the power operator, right-associative and binding
tighter than unary minus (``-x^2`` is ``-(x^2)``); multiplication must be
written explicitly (``2*x``, never ``2x``); ``pi`` and ``e`` are folded to
numeric literals unless shadowed by a declared variable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExprError",
    "ParseError",
    "DomainError",
    "ExprNode",
    "ParsedPotential",
    "const",
    "var",
    "unary",
    "binary",
    "parse",
    "render",
    "simplify",
    "differentiate",
    "evaluate",
    "gradient",
    "hessian",
    "fd_hessian",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt",
             "atan", "asin", "acos", "sinh", "cosh", "tanh")
_UNARY_OPS = frozenset(FUNCTIONS) | {"neg"}
_BINARY_OPS = frozenset({"add", "sub", "mul", "div", "pow"})
_NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ExprError(Exception):
    """Base class for expression-language errors."""


class ParseError(ExprError):
    """Syntax or name error, with the byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class DomainError(ExprError):
    """A partial function (ln, sqrt, asin, ...) was evaluated outside its
    domain; the message names the function and the offending sub-expression."""


# ---------------------------------------------------------------------------
# expression trees


@dataclass(frozen=True)
class ExprNode:
    """Immutable expression-tree node.

    ``op`` is one of ``const``, ``var``, a unary function name, ``neg``, or a
    binary operator tag.  ``value`` is set for constants, ``index`` for
    variables, and ``args`` holds the child nodes otherwise.
    """

    op: str
    value: float | None = None
    index: int | None = None
    args: tuple["ExprNode", ...] = ()

    def is_const(self, v: float | None = None) -> bool:
        if self.op != "const":
            return False
        return v is None or self.value == v

    def int_exponent(self) -> int | None:
        """The exponent as an exact integer if this node is a constant
        integer (enables the exact power rule), else None."""
        if self.op == "const" and float(self.value).is_integer() and abs(self.value) <= 2**31:
            return int(self.value)
        return None


def const(v: float) -> ExprNode:
    return ExprNode("const", value=float(v))


def var(i: int) -> ExprNode:
    if i < 0:
        raise ValueError("variable index must be non-negative")
    return ExprNode("var", index=i)


def unary(op: str, a: ExprNode) -> ExprNode:
    if op not in _UNARY_OPS:
        raise ValueError(f"unknown unary operation {op!r}")
    return ExprNode(op, args=(a,))


def binary(op: str, a: ExprNode, b: ExprNode) -> ExprNode:
    if op not in _BINARY_OPS:
        raise ValueError(f"unknown binary operation {op!r}")
    return ExprNode(op, args=(a, b))


def max_var_index(e: ExprNode) -> int:
    """Largest variable index referenced, or -1 for a constant expression."""
    if e.op == "var":
        return e.index
    if not e.args:
        return -1
    return max(max_var_index(a) for a in e.args)


# ---------------------------------------------------------------------------
# tokenizer / parser

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def _tokenize(source: str):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            m = _NUMBER_RE.match(source, i)
            if m is None:
                raise ParseError(f"malformed number starting with {ch!r}", i)
            tokens.append(("num", m.group(), i, float(m.group())))
            i = m.end()
            continue
        if ch.isalpha() or ch == "_":
            m = _IDENT_RE.match(source, i)
            tokens.append(("ident", m.group(), i, None))
            i = m.end()
            continue
        if ch in "+-*/^(),":
            tokens.append((ch, ch, i, None))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n, None))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: tuple[str, ...]):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.var_index = {name: i for i, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.peek()
        if tok[0] != kind:
            found = repr(tok[1]) if tok[0] != "end" else "end of input"
            raise ParseError(f"expected {kind!r}, found {found}", tok[2])
        return self.advance()

    # expr := term (('+'|'-') term)*
    def parse_expr(self) -> ExprNode:
        node = self.parse_term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            rhs = self.parse_term()
            node = binary("add" if op == "+" else "sub", node, rhs)
        return node

    # term := unary (('*'|'/') unary)*
    def parse_term(self) -> ExprNode:
        node = self.parse_unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            rhs = self.parse_unary()
            node = binary("mul" if op == "*" else "div", node, rhs)
        return node

    # unary := '-' unary | power      (so -x^2 parses as -(x^2))
    def parse_unary(self) -> ExprNode:
        if self.peek()[0] == "-":
            self.advance()
            return unary("neg", self.parse_unary())
        if self.peek()[0] == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    # power := atom ['^' unary]      (right-associative, exponent may be signed)
    def parse_power(self) -> ExprNode:
        base = self.parse_atom()
        if self.peek()[0] == "^":
            self.advance()
            exponent = self.parse_unary()
            return binary("pow", base, exponent)
        return base

    def parse_atom(self) -> ExprNode:
        tok = self.peek()
        kind, text, offset, value = tok
        if kind == "num":
            self.advance()
            return const(value)
        if kind == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        if kind == "ident":
            self.advance()
            if text in self.var_index:
                return var(self.var_index[text])
            if text in FUNCTIONS:
                if self.peek()[0] != "(":
                    raise ParseError(f"function {text!r} requires parenthesized argument", offset)
                self.advance()
                arg = self.parse_expr()
                if self.peek()[0] == ",":
                    raise ParseError(f"function {text!r} takes exactly one argument", self.peek()[2])
                self.expect(")")
                return unary(text, arg)
            if text in _NAMED_CONSTANTS:
                return const(_NAMED_CONSTANTS[text])
            if self.peek()[0] == "(":
                raise ParseError(f"unknown function {text!r}", offset)
            raise ParseError(f"unknown identifier {text!r}", offset)
        found = repr(text) if kind != "end" else "end of input"
        raise ParseError(f"expected a number, name or '(', found {found}", offset)


# ---------------------------------------------------------------------------
# rendering (canonical parenthesized form)

_BINARY_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def render(e: ExprNode, names) -> str:
    """Emit the canonical fully parenthesized source for ``e``."""
    op = e.op
    if op == "const":
        return repr(e.value)
    if op == "var":
        return names[e.index]
    if op == "neg":
        return f"(-{render(e.args[0], names)})"
    if op in _UNARY_OPS:
        return f"{op}({render(e.args[0], names)})"
    a, b = e.args
    return f"({render(a, names)}{_BINARY_SYMBOL[op]}{render(b, names)})"


# ---------------------------------------------------------------------------
# simplification (constant folding plus 0/1 identities, nothing clever)


def _fold_unary(op: str, x: float) -> float | None:
    try:
        if op == "neg":
            return -x
        if op == "ln":
            return math.log(x) if x > 0 else None
        if op == "sqrt":
            return math.sqrt(x) if x >= 0 else None
        if op in ("asin", "acos") and not -1.0 <= x <= 1.0:
            return None
        return getattr(math, op)(x)
    except (ValueError, OverflowError):
        return None


def _neg(a: ExprNode) -> ExprNode:
    if a.op == "const":
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return unary("neg", a)


def _add(a: ExprNode, b: ExprNode) -> ExprNode:
    if a.is_const(0.0):
        return b
    if b.is_const(0.0):
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value + b.value)
    return binary("add", a, b)


def _sub(a: ExprNode, b: ExprNode) -> ExprNode:
    if b.is_const(0.0):
        return a
    if a.is_const(0.0):
        return _neg(b)
    if a.op == "const" and b.op == "const":
        return const(a.value - b.value)
    return binary("sub", a, b)


def _mul(a: ExprNode, b: ExprNode) -> ExprNode:
    if a.is_const(0.0) or b.is_const(0.0):
        return const(0.0)
    if a.is_const(1.0):
        return b
    if b.is_const(1.0):
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value * b.value)
    return binary("mul", a, b)


def _div(a: ExprNode, b: ExprNode) -> ExprNode:
    if b.is_const(1.0):
        return a
    if a.is_const(0.0):
        return const(0.0)
    if a.op == "const" and b.op == "const" and b.value != 0.0:
        return const(a.value / b.value)
    return binary("div", a, b)


def _pow(a: ExprNode, b: ExprNode) -> ExprNode:
    if b.is_const(1.0):
        return a
    if b.is_const(0.0):
        return const(1.0)
    k = b.int_exponent()
    if a.op == "const" and k is not None and not (a.value == 0.0 and k < 0):
        return const(float(a.value) ** k)
    if a.op == "const" and b.op == "const" and a.value > 0:
        return const(math.exp(b.value * math.log(a.value)))
    return binary("pow", a, b)


def _fn(op: str, a: ExprNode) -> ExprNode:
    if op == "neg":
        return _neg(a)
    if a.op == "const":
        folded = _fold_unary(op, a.value)
        if folded is not None:
            return const(folded)
    return unary(op, a)


_SMART_BINARY = {"add": _add, "sub": _sub, "mul": _mul, "div": _div, "pow": _pow}


def simplify(e: ExprNode) -> ExprNode:
    """Bottom-up constant folding and identity cleanup (x+0, x*1, x*0, x^1)."""
    if not e.args:
        return e
    args = tuple(simplify(a) for a in e.args)
    if e.op in _SMART_BINARY:
        return _SMART_BINARY[e.op](*args)
    return _fn(e.op, args[0])


# ---------------------------------------------------------------------------
# differentiation

_TWO = const(2.0)
_ONE = const(1.0)


def differentiate(e: ExprNode, var_index: int) -> ExprNode:
    """Exact derivative of ``e`` with respect to variable ``var_index``.

    Constant-integer exponents use the power rule; a general power a^b is
    treated as exp(b*ln(a)) and therefore assumes a > 0.  The result is
    simplified by constant folding only.
    """
    op = e.op
    if op == "const":
        return const(0.0)
    if op == "var":
        return const(1.0 if e.index == var_index else 0.0)
    if op == "neg":
        return _neg(differentiate(e.args[0], var_index))
    if op == "add":
        return _add(differentiate(e.args[0], var_index), differentiate(e.args[1], var_index))
    if op == "sub":
        return _sub(differentiate(e.args[0], var_index), differentiate(e.args[1], var_index))
    if op == "mul":
        a, b = e.args
        da, db = differentiate(a, var_index), differentiate(b, var_index)
        return _add(_mul(da, b), _mul(a, db))
    if op == "div":
        a, b = e.args
        da, db = differentiate(a, var_index), differentiate(b, var_index)
        return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, _TWO))
    if op == "pow":
        a, b = e.args
        da = differentiate(a, var_index)
        k = b.int_exponent()
        if k is not None:
            if k == 0:
                return const(0.0)
            return _mul(_mul(const(float(k)), _pow(a, const(float(k - 1)))), da)
        db = differentiate(b, var_index)
        # a^b = exp(b ln a):  (a^b)' = a^b (b' ln a + b a'/a)
        bracket = _add(_mul(db, _fn("ln", a)), _mul(b, _div(da, a)))
        return _mul(_pow(a, b), bracket)
    a = e.args[0]
    da = differentiate(a, var_index)
    if op == "sin":
        return _mul(_fn("cos", a), da)
    if op == "cos":
        return _neg(_mul(_fn("sin", a), da))
    if op == "tan":
        return _div(da, _pow(_fn("cos", a), _TWO))
    if op == "exp":
        return _mul(_fn("exp", a), da)
    if op == "ln":
        return _div(da, a)
    if op == "sqrt":
        return _div(da, _mul(_TWO, _fn("sqrt", a)))
    if op == "atan":
        return _div(da, _add(_ONE, _pow(a, _TWO)))
    if op == "asin":
        return _div(da, _fn("sqrt", _sub(_ONE, _pow(a, _TWO))))
    if op == "acos":
        return _neg(_div(da, _fn("sqrt", _sub(_ONE, _pow(a, _TWO)))))
    if op == "sinh":
        return _mul(_fn("cosh", a), da)
    if op == "cosh":
        return _mul(_fn("sinh", a), da)
    if op == "tanh":
        return _div(da, _pow(_fn("cosh", a), _TWO))
    raise ValueError(f"cannot differentiate operation {op!r}")


# ---------------------------------------------------------------------------
# evaluation: compiled fast path with a checked fallback for diagnostics


def _powf(a: float, b: float) -> float:
    if a <= 0.0:
        raise ValueError("power with non-positive base")
    return math.exp(b * math.log(a))


_COMPILE_GLOBALS = {"_m": math, "_powf": _powf, "__builtins__": {}}
_FN_PY = {"ln": "_m.log", **{f: f"_m.{f}" for f in FUNCTIONS if f != "ln"}}


def _pysrc(e: ExprNode) -> str:
    op = e.op
    if op == "const":
        return repr(e.value)
    if op == "var":
        return f"q[{e.index}]"
    if op == "neg":
        return f"(-{_pysrc(e.args[0])})"
    if op in _UNARY_OPS:
        return f"{_FN_PY[op]}({_pysrc(e.args[0])})"
    a, b = e.args
    sa, sb = _pysrc(a), _pysrc(b)
    if op == "pow":
        k = b.int_exponent()
        if k is not None:
            return f"({sa}**({k}))"
        return f"_powf({sa},{sb})"
    return f"({sa}{_BINARY_SYMBOL[op]}{sb})"


def _compile_tuple(nodes) -> callable:
    body = ",".join(_pysrc(e) for e in nodes)
    if len(nodes) == 1:
        body += ","
    return eval(f"lambda q: ({body})", dict(_COMPILE_GLOBALS))


_EVAL_ERRORS = (ValueError, ZeroDivisionError, OverflowError)


def _eval_checked(e: ExprNode, q, names) -> float:
    """Reference evaluator with domain checks; raises DomainError with the
    offending function and sub-expression spelled out."""
    op = e.op
    if op == "const":
        return e.value
    if op == "var":
        return q[e.index]
    if op == "neg":
        return -_eval_checked(e.args[0], q, names)
    if op in ("add", "sub", "mul", "div"):
        a = _eval_checked(e.args[0], q, names)
        b = _eval_checked(e.args[1], q, names)
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if b == 0.0:
            raise DomainError(f"division by zero in {render(e, names)}")
        return a / b
    if op == "pow":
        base = _eval_checked(e.args[0], q, names)
        k = e.args[1].int_exponent()
        if k is not None:
            if base == 0.0 and k < 0:
                raise DomainError(f"zero raised to negative power in {render(e, names)}")
            try:
                return base ** k
            except OverflowError:
                raise DomainError(f"overflow in {render(e, names)}") from None
        exponent = _eval_checked(e.args[1], q, names)
        if base <= 0.0:
            raise DomainError(
                f"non-integer power of non-positive base in {render(e, names)}")
        try:
            return math.exp(exponent * math.log(base))
        except OverflowError:
            raise DomainError(f"overflow in {render(e, names)}") from None
    x = _eval_checked(e.args[0], q, names)
    if op == "ln" and x <= 0.0:
        raise DomainError(f"ln of non-positive value {x!r} in {render(e, names)}")
    if op == "sqrt" and x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r} in {render(e, names)}")
    if op in ("asin", "acos") and not -1.0 <= x <= 1.0:
        raise DomainError(f"{op} argument {x!r} outside [-1, 1] in {render(e, names)}")
    fn = math.log if op == "ln" else getattr(math, op)
    try:
        return fn(x)
    except _EVAL_ERRORS:
        raise DomainError(f"domain error in {op}({render(e.args[0], names)})") from None


# ---------------------------------------------------------------------------
# parsed potential with eager derivative closure


class ParsedPotential:
    """A potential U(q1, ..., qn) with all first and second derivatives
    prepared at construction.

    The instance is immutable after __init__ and safe for concurrent reads;
    every evaluation goes through compiled closures with a checked fallback
    that produces informative :class:`DomainError` diagnostics.
    """

    __slots__ = ("variables", "body", "n", "_grad_nodes", "_hess_nodes",
                 "_value_fn", "_grad_fn", "_hess_fn", "_hess_pairs")

    def __init__(self, variables, body: ExprNode):
        names = tuple(variables)
        if not names:
            raise ValueError("at least one variable is required")
        if len(set(names)) != len(names):
            raise ValueError("variable names must be distinct")
        for name in names:
            if not _IDENT_RE.fullmatch(name):
                raise ValueError(f"invalid variable identifier {name!r}")
        if max_var_index(body) >= len(names):
            raise ValueError("expression references an undeclared variable index")
        self.variables = names
        self.body = body
        self.n = len(names)
        self._grad_nodes = tuple(differentiate(body, i) for i in range(self.n))
        self._hess_pairs = tuple((i, j) for i in range(self.n) for j in range(i, self.n))
        self._hess_nodes = {
            (i, j): differentiate(self._grad_nodes[i], j) for i, j in self._hess_pairs
        }
        self._value_fn = _compile_tuple((body,))
        self._grad_fn = _compile_tuple(self._grad_nodes)
        self._hess_fn = _compile_tuple(tuple(self._hess_nodes[p] for p in self._hess_pairs))

    def __repr__(self):
        return f"ParsedPotential({self.render()!r}, vars={list(self.variables)})"

    def render(self) -> str:
        return render(self.body, self.variables)

    def derivative(self, i: int, j: int | None = None) -> ExprNode:
        """Cached derivative AST: first order for (i,), second for (i, j)."""
        if j is None:
            return self._grad_nodes[i]
        return self._hess_nodes[(i, j) if i <= j else (j, i)]

    def _coords(self, at):
        q = [float(x) for x in at]
        if len(q) != self.n:
            raise ValueError(f"point has dimension {len(q)}, potential has {self.n}")
        return q

    def value(self, at) -> float:
        q = self._coords(at)
        try:
            return self._value_fn(q)[0]
        except _EVAL_ERRORS:
            return _eval_checked(self.body, q, self.variables)

    def gradient(self, at) -> np.ndarray:
        q = self._coords(at)
        try:
            return np.array(self._grad_fn(q))
        except _EVAL_ERRORS:
            return np.array([_eval_checked(g, q, self.variables) for g in self._grad_nodes])

    def hessian(self, at) -> np.ndarray:
        q = self._coords(at)
        try:
            upper = self._hess_fn(q)
        except _EVAL_ERRORS:
            upper = [_eval_checked(self._hess_nodes[p], q, self.variables)
                     for p in self._hess_pairs]
        H = np.empty((self.n, self.n))
        for (i, j), value in zip(self._hess_pairs, upper):
            H[i, j] = value
            H[j, i] = value
        return H

    def fd_hessian(self, at, h: float) -> np.ndarray:
        """Central second differences; exact for quadratics up to roundoff."""
        if h <= 0:
            raise ValueError("step h must be positive")
        q = np.asarray(self._coords(at))
        n = self.n
        H = np.empty((n, n))
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h
            for j in range(i, n):
                ej = np.zeros(n)
                ej[j] = h
                stencil = (self.value(q + ei + ej) - self.value(q + ei - ej)
                           - self.value(q - ei + ej) + self.value(q - ei - ej))
                H[i, j] = stencil / (4.0 * h * h)
                H[j, i] = H[i, j]
        return H


# ---------------------------------------------------------------------------
# module-level operation surface


def parse(source: str, variables) -> ParsedPotential:
    """Parse ``source`` over the declared variable names.

    Raises :class:`ParseError` with a byte offset for syntax problems,
    unknown identifiers and wrong function arity; ValueError for an invalid
    variable declaration.
    """
    names = tuple(variables)
    if not names:
        raise ValueError("at least one variable is required")
    if not source or not source.strip():
        raise ParseError("empty source", 0)
    for name in names:
        if not _IDENT_RE.fullmatch(name):
            raise ValueError(f"invalid variable identifier {name!r}")
    parser = _Parser(source, names)
    body = parser.parse_expr()
    end = parser.peek()
    if end[0] != "end":
        raise ParseError(f"unexpected trailing input {end[1]!r}", end[2])
    return ParsedPotential(names, body)


def evaluate(p: ParsedPotential, at) -> float:
    return p.value(at)


def gradient(p: ParsedPotential, at) -> np.ndarray:
    return p.gradient(at)


def hessian(p: ParsedPotential, at) -> np.ndarray:
    return p.hessian(at)


def fd_hessian(p: ParsedPotential, at, h: float) -> np.ndarray:
    return p.fd_hessian(at, h)
