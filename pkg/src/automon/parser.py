"""Textual predicate language.

C-like syntax: ``||``, ``&&``, ``!``, ``== != < <= > >=``, ``+ - *``, unary
minus, parentheses, integer literals and ``true``/``false``.  A plain
identifier names a shared variable, ``$name`` names a local one::

    parse("count + $n <= 256 && !closed")

Identifiers used on their own as a condition (``closed`` above) or compared
with a boolean literal are boolean variables; all others are integers,
unless *domains* says otherwise.
"""

from __future__ import annotations

import re
from typing import Mapping

from automon.errors import ParseError, PredicateError
from automon.predicates import (
    Add,
    And,
    Atom,
    BoolConst,
    Domain,
    Expr,
    IntConst,
    Mul,
    Neg,
    Not,
    Or,
    Pred,
    Scope,
    Sub,
    Truth,
    Var,
    VarRef,
)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>\$?[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\|\||&&|==|!=|<=|>=|[<>=!+\-*()]))"
)

_INFIX = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "=": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
}
_PREFIX_BP = 7
_COMPARISONS = {"==": "=", "=": "=", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def _tokenize(text):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError("unexpected character", text, pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def token(self):
        return self.tokens[self.index]

    def advance(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.token
        return ParseError(message, self.text, tok[2])

    def parse(self):
        node = self.expr(0)
        if self.token[0] != "end":
            raise self.error("unexpected token")
        return node

    def expr(self, min_bp):
        left = self.prefix()
        while True:
            kind, value, _ = self.token
            if kind != "op" or value not in _INFIX:
                break
            bp = _INFIX[value]
            if bp <= min_bp:
                break
            tok = self.advance()
            right = self.expr(bp)
            if bp in (3, 4) and left[0] == "bin" and _INFIX[left[1]] in (3, 4):
                raise self.error("comparisons do not chain", tok)
            left = ("bin", value, left, right, tok[2])
        return left

    def prefix(self):
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            return ("num", int(value), pos)
        if kind == "name":
            if value in ("true", "false"):
                return ("bool", value == "true", pos)
            return ("name", value, pos)
        if kind == "op":
            if value == "(":
                inner = self.expr(0)
                if self.token[1] != ")":
                    raise self.error("expected ')'")
                self.advance()
                return inner
            if value in ("!", "-"):
                return ("un", value, self.expr(_PREFIX_BP - 1), pos)
        raise self.error("unexpected token", tok)


class _Builder:
    def __init__(self, text, domains):
        self.text = text
        self.domains = dict(domains or {})
        self.inferred = {}

    def error(self, message, node):
        return ParseError(message, self.text, node[-1])

    def scan(self, node):
        """Infer boolean variables from how names are used."""
        tag = node[0]
        if tag == "bin":
            op, left, right = node[1], node[2], node[3]
            if op in ("||", "&&"):
                for side in (left, right):
                    if side[0] == "name":
                        self.mark(side[1], Domain.BOOL, side)
            elif op in ("==", "=", "!="):
                for side, other in ((left, right), (right, left)):
                    if side[0] == "name" and other[0] == "bool":
                        self.mark(side[1], Domain.BOOL, side)
            self.scan(left)
            self.scan(right)
        elif tag == "un":
            if node[1] == "!" and node[2][0] == "name":
                self.mark(node[2][1], Domain.BOOL, node[2])
            self.scan(node[2])

    def mark(self, name, domain, node):
        if self.inferred.get(name, domain) is not domain:
            raise self.error(f"variable {name} used both as integer and boolean", node)
        self.inferred[name] = domain

    def ref(self, node):
        raw = node[1]
        local = raw.startswith("$")
        name = raw[1:] if local else raw
        domain = self.domains.get(raw) or self.domains.get(name) or self.inferred.get(raw, Domain.INT)
        return VarRef(name, Scope.LOCAL if local else Scope.SHARED, domain)

    def pred(self, node) -> Pred:
        tag = node[0]
        if tag == "bool":
            return Truth(node[1])
        if tag == "name":
            ref = self.ref(node)
            if ref.domain is not Domain.BOOL:
                raise self.error(f"integer variable {ref} used as a condition", node)
            return Atom(Var(ref), "=", BoolConst(True))
        if tag == "un" and node[1] == "!":
            return Not(self.pred(node[2]))
        if tag == "bin":
            op = node[1]
            if op == "||":
                return Or(self.pred(node[2]), self.pred(node[3]))
            if op == "&&":
                return And(self.pred(node[2]), self.pred(node[3]))
            if op in _COMPARISONS:
                try:
                    return Atom(self.expr(node[2]), _COMPARISONS[op], self.expr(node[3]))
                except ParseError:
                    raise
                except PredicateError as exc:
                    raise self.error(str(exc), node) from None
        raise self.error("expected a condition", node)

    def expr(self, node) -> Expr:
        tag = node[0]
        if tag == "num":
            try:
                return IntConst(node[1])
            except PredicateError as exc:
                raise self.error(str(exc), node) from None
        if tag == "bool":
            return BoolConst(node[1])
        if tag == "name":
            return Var(self.ref(node))
        if tag == "un" and node[1] == "-":
            inner = self.expr(node[2])
            if isinstance(inner, IntConst):
                return IntConst(-inner.value)
            return Neg(inner)
        if tag == "bin" and node[1] in ("+", "-", "*"):
            cls = {"+": Add, "-": Sub, "*": Mul}[node[1]]
            try:
                return cls(self.expr(node[2]), self.expr(node[3]))
            except ParseError:
                raise
            except PredicateError as exc:
                raise self.error(str(exc), node) from None
        raise self.error("expected an arithmetic expression", node)


def parse(text: str, domains: Mapping[str, Domain] | None = None) -> Pred:
    """Parse a predicate.  *domains* maps variable names (``x`` or ``$x``) to a Domain."""
    tree = _Parser(text).parse()
    builder = _Builder(text, domains)
    builder.scan(tree)
    return builder.pred(tree)


def parse_expr(text: str, domains: Mapping[str, Domain] | None = None) -> Expr:
    """Parse an arithmetic expression such as ``count - $num``."""
    tree = _Parser(text).parse()
    builder = _Builder(text, domains)
    return builder.expr(tree)
