"""Polynomial expression DAG: the compiler's source language.

Nodes: Var, Const, Add, Mul, Neg, Scale (real factor), Conj.  Expressions
are immutable and compared structurally.  Besides evaluation this module
provides the conservative disk bound used by the composition precondition
(triangle-inequality propagation of per-coordinate disks), monomial
expansion in the variables and their conjugates, and a small parser for the
CLI grammar: variables ``z``, ``w``, ``x1..xN``, ``conj(...)``, ``+ - *``,
parentheses, decimal and ``i`` literals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .core import LinkageError


class ExprError(LinkageError):
    pass


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Add:
    left: "PolyExpr"
    right: "PolyExpr"


@dataclass(frozen=True)
class Mul:
    left: "PolyExpr"
    right: "PolyExpr"


@dataclass(frozen=True)
class Neg:
    arg: "PolyExpr"


@dataclass(frozen=True)
class Scale:
    factor: float
    arg: "PolyExpr"


@dataclass(frozen=True)
class Conj:
    arg: "PolyExpr"


PolyExpr = Union[Var, Const, Add, Mul, Neg, Scale, Conj]


def evaluate(expr: PolyExpr, values) -> complex:
    if isinstance(expr, Var):
        return complex(values[expr.index])
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Add):
        return evaluate(expr.left, values) + evaluate(expr.right, values)
    if isinstance(expr, Mul):
        return evaluate(expr.left, values) * evaluate(expr.right, values)
    if isinstance(expr, Neg):
        return -evaluate(expr.arg, values)
    if isinstance(expr, Scale):
        return expr.factor * evaluate(expr.arg, values)
    if isinstance(expr, Conj):
        return evaluate(expr.arg, values).conjugate()
    raise ExprError(f"unknown node {expr!r}")


def arity(expr: PolyExpr) -> int:
    return 1 + max(_var_indices(expr), default=-1)


def _var_indices(expr: PolyExpr) -> set[int]:
    if isinstance(expr, Var):
        return {expr.index}
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, (Add, Mul)):
        return _var_indices(expr.left) | _var_indices(expr.right)
    return _var_indices(expr.arg)


def substitute(expr: PolyExpr, mapping: dict[int, PolyExpr]) -> PolyExpr:
    """Replace Var(k) by mapping[k]; variables absent from the map are kept."""
    if isinstance(expr, Var):
        return mapping.get(expr.index, expr)
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Add):
        return Add(substitute(expr.left, mapping), substitute(expr.right, mapping))
    if isinstance(expr, Mul):
        return Mul(substitute(expr.left, mapping), substitute(expr.right, mapping))
    if isinstance(expr, Neg):
        return Neg(substitute(expr.arg, mapping))
    if isinstance(expr, Scale):
        return Scale(expr.factor, substitute(expr.arg, mapping))
    if isinstance(expr, Conj):
        return Conj(substitute(expr.arg, mapping))
    raise ExprError(f"unknown node {expr!r}")


def uses_conj(expr: PolyExpr) -> bool:
    if isinstance(expr, Conj):
        return True
    if isinstance(expr, (Add, Mul)):
        return uses_conj(expr.left) or uses_conj(expr.right)
    if isinstance(expr, (Neg, Scale)):
        return uses_conj(expr.arg)
    return False


def range_disk(expr: PolyExpr, disks) -> tuple[complex, float]:
    """Disk guaranteed to contain expr over per-coordinate input disks.

    ``disks`` is a sequence of (center, radius) pairs, one per variable.
    Returns (value at centers, deviation bound) propagated by the triangle
    inequality; for polynomials this coincides with the per-monomial
    coefficient bound and never underestimates.
    """
    if isinstance(expr, Var):
        c, r = disks[expr.index]
        return complex(c), float(r)
    if isinstance(expr, Const):
        return expr.value, 0.0
    if isinstance(expr, Add):
        lc, lr = range_disk(expr.left, disks)
        rc, rr = range_disk(expr.right, disks)
        return lc + rc, lr + rr
    if isinstance(expr, Mul):
        lc, lr = range_disk(expr.left, disks)
        rc, rr = range_disk(expr.right, disks)
        return lc * rc, abs(lc) * rr + abs(rc) * lr + lr * rr
    if isinstance(expr, Neg):
        c, r = range_disk(expr.arg, disks)
        return -c, r
    if isinstance(expr, Scale):
        c, r = range_disk(expr.arg, disks)
        return expr.factor * c, abs(expr.factor) * r
    if isinstance(expr, Conj):
        c, r = range_disk(expr.arg, disks)
        return c.conjugate(), r
    raise ExprError(f"unknown node {expr!r}")


# ---------------------------------------------------------------------------
# Monomial expansion.  Keys are tuples of (plain_power, conj_power) pairs,
# one pair per variable; values are complex coefficients.

Monomials = dict[tuple[tuple[int, int], ...], complex]


def to_monomials(expr: PolyExpr, nvars: int | None = None) -> Monomials:
    if nvars is None:
        nvars = arity(expr)
    one = tuple((0, 0) for _ in range(nvars))

    def mul_keys(k1, k2):
        return tuple((a1 + a2, b1 + b2) for (a1, b1), (a2, b2) in zip(k1, k2))

    def conj_key(k):
        return tuple((b, a) for (a, b) in k)

    def combine(m1: Monomials, m2: Monomials, sign=1) -> Monomials:
        out = dict(m1)
        for k, v in m2.items():
            out[k] = out.get(k, 0) + sign * v
        return {k: v for k, v in out.items() if v != 0}

    def walk(e) -> Monomials:
        if isinstance(e, Var):
            k = list(one)
            k[e.index] = (1, 0)
            return {tuple(k): 1.0 + 0j}
        if isinstance(e, Const):
            return {one: e.value} if e.value != 0 else {}
        if isinstance(e, Add):
            return combine(walk(e.left), walk(e.right))
        if isinstance(e, Neg):
            return {k: -v for k, v in walk(e.arg).items()}
        if isinstance(e, Scale):
            return {k: e.factor * v for k, v in walk(e.arg).items() if e.factor * v != 0}
        if isinstance(e, Mul):
            m1, m2 = walk(e.left), walk(e.right)
            out: Monomials = {}
            for k1, v1 in m1.items():
                for k2, v2 in m2.items():
                    k = mul_keys(k1, k2)
                    out[k] = out.get(k, 0) + v1 * v2
            return {k: v for k, v in out.items() if v != 0}
        if isinstance(e, Conj):
            return {conj_key(k): v.conjugate() for k, v in walk(e.arg).items()}
        raise ExprError(f"unknown node {e!r}")

    return walk(expr)


def total_degree(key: tuple[tuple[int, int], ...]) -> int:
    return sum(a + b for a, b in key)


def homogeneous_parts(expr: PolyExpr, nvars: int | None = None) -> dict[int, Monomials]:
    parts: dict[int, Monomials] = {}
    for k, v in to_monomials(expr, nvars).items():
        parts.setdefault(total_degree(k), {})[k] = v
    return parts


def monomials_to_expr(mono: Monomials, nvars: int) -> PolyExpr:
    """Deterministic expression rebuild: sorted monomials, left-to-right chains."""
    if not mono:
        return Const(0j)
    terms = []
    for key in sorted(mono):
        coeff = mono[key]
        factors: list[PolyExpr] = []
        for j, (a, b) in enumerate(key):
            factors.extend([Var(j)] * a)
            factors.extend([Conj(Var(j))] * b)
        term: PolyExpr
        if not factors:
            term = Const(coeff)
        else:
            term = factors[0]
            for f in factors[1:]:
                term = Mul(term, f)
            if coeff != 1:
                term = Mul(Const(coeff), term)
        terms.append(term)
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


def is_real_valued(expr: PolyExpr, tol: float = 1e-12) -> bool:
    """True when f(z, conj z) takes real values: coeff(a,b) == conj(coeff(b,a))."""
    mono = to_monomials(expr)
    for k, v in mono.items():
        kc = tuple((b, a) for (a, b) in k)
        w = mono.get(kc, 0j)
        if abs(v - w.conjugate()) > tol:
            return False
    return True


def has_real_coefficients(expr: PolyExpr) -> bool:
    if isinstance(expr, Const):
        return expr.value.imag == 0.0
    if isinstance(expr, (Add, Mul)):
        return has_real_coefficients(expr.left) and has_real_coefficients(expr.right)
    if isinstance(expr, (Neg, Scale, Conj)):
        return has_real_coefficients(expr.arg)
    return True


# ---------------------------------------------------------------------------
# Text form: parser and canonical printer.


def to_text(expr: PolyExpr) -> str:
    """Canonical text form; to_text(parse(to_text(e))) == to_text(e)."""

    def prec(e):
        if isinstance(e, Add):
            return 1
        if isinstance(e, Const):
            # two-part or negative constants reparse as sums/negations
            if e.value.real != 0 and e.value.imag != 0:
                return 1
            if e.value.real < 0 or e.value.imag < 0:
                return 3
            return 4
        if isinstance(e, (Mul, Scale)):
            return 2
        if isinstance(e, Neg):
            return 3
        return 4

    def paren(e, outer):
        s = emit(e)
        return f"({s})" if prec(e) < outer else s

    def emit(e) -> str:
        if isinstance(e, Var):
            return f"x{e.index + 1}"
        if isinstance(e, Const):
            return format_complex_literal(e.value)
        if isinstance(e, Add):
            if isinstance(e.right, Neg):
                return f"{paren(e.left, 1)}-{paren(e.right.arg, 2)}"
            if isinstance(e.right, Const) and (
                e.right.value.real < 0
                or (e.right.value.real == 0 and e.right.value.imag < 0)
            ):
                return f"{paren(e.left, 1)}-{paren(Const(-e.right.value), 2)}"
            return f"{paren(e.left, 1)}+{paren(e.right, 1)}"
        if isinstance(e, Mul):
            return f"{paren(e.left, 2)}*{paren(e.right, 2)}"
        if isinstance(e, Neg):
            return f"-{paren(e.arg, 3)}"
        if isinstance(e, Scale):
            return f"{paren(Const(complex(e.factor)), 2)}*{paren(e.arg, 2)}"
        if isinstance(e, Conj):
            return f"conj({emit(e.arg)})"
        raise ExprError(f"unknown node {e!r}")

    return emit(expr)


def _real_literal(x: float) -> str:
    return format(x, ".17g")


def format_complex_literal(z: complex) -> str:
    if z.imag == 0:
        return _real_literal(z.real)
    if z.real == 0:
        if z.imag == 1:
            return "i"
        if z.imag == -1:
            return "-i"
        return _real_literal(z.imag) + "i"
    sign = "+" if z.imag >= 0 else "-"
    im = abs(z.imag)
    imtxt = "i" if im == 1 else _real_literal(im) + "i"
    return f"{_real_literal(z.real)}{sign}{imtxt}"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg):
        raise ExprError(f"{msg} at column {self.pos + 1} in {self.text!r}")

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expr(self):
        node = self.term()
        while True:
            ch = self.peek()
            if ch == "+":
                self.pos += 1
                node = Add(node, self.term())
            elif ch == "-":
                self.pos += 1
                node = Add(node, Neg(self.term()))
            else:
                return node

    def term(self):
        node = self.unary()
        while self.peek() == "*":
            self.pos += 1
            node = Mul(node, self.unary())
        return node

    def unary(self):
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.unary())
        if self.peek() == "+":
            self.pos += 1
            return self.unary()
        return self.atom()

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                self.error("missing ')'")
            self.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha():
            return self.name()
        self.error("expected a value")

    def number(self):
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"
            or (self.text[self.pos] in "+-" and self.text[self.pos - 1] in "eE")
        ):
            self.pos += 1
        value = float(self.text[start : self.pos])
        if self.pos < len(self.text) and self.text[self.pos] == "i":
            self.pos += 1
            return Const(complex(0.0, value))
        return Const(complex(value, 0.0))

    def name(self):
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        word = self.text[start : self.pos]
        if word == "conj":
            if self.peek() != "(":
                self.error("conj requires parentheses")
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                self.error("missing ')' after conj argument")
            self.pos += 1
            return Conj(node)
        if word == "i":
            return Const(1j)
        if word == "z":
            return Var(0)
        if word == "w":
            return Var(1)
        if word == "x" or (word[0] == "x" and word[1:].isdigit()):
            if word == "x":
                self.error("variables are x1, x2, ...")
            k = int(word[1:])
            if k < 1:
                self.error("variables are numbered from x1")
            return Var(k - 1)
        self.error(f"unknown name {word!r}")


def parse(text: str) -> PolyExpr:
    p = _Parser(text)
    node = p.expr()
    if p.peek():
        p.error("trailing input")
    return node


def parse_complex(text: str) -> complex:
    """Complex literal for CLI flags: ``a+bi`` forms, ``i`` suffix."""
    node = parse(text)
    if _var_indices(node):
        raise ExprError(f"{text!r} is not a constant")
    return evaluate(node, ())
