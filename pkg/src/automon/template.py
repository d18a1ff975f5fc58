"""Fast preparation of predicates that are waited on with fresh local values.

Globalizing, canonicalizing, tagging and compiling a predicate from scratch
costs far more than the wait itself when every waiter brings new locals
(ticket numbers, thread ids).  For the common shape, linear atoms whose
locals only shift the key, everything except the key is fixed by the
predicate text.  A :class:`Template` precomputes that part once and
produces exactly what the general path would for each binding.
"""

from __future__ import annotations

from automon.predicates import (
    EQ,
    OP_FUNCS,
    OPS,
    ORDERED_OPS,
    Add,
    Atom,
    DnfPred,
    Domain,
    IntConst,
    Mul,
    Neg,
    Scope,
    Separated,
    Sub,
    Var,
    _SIMPLE,
    _cexpr,
    _compile_atom,
    _linearize,
    _NotLinear,
    compile_terms,
    normalize_atom,
    pred_vars,
    terms_to_expr,
)
from automon.tagging import NONE_TAG, Tag, TagMode

# Bounds that keep every intermediate value far inside int64, so the fast
# path can never disagree with the checked arithmetic of the general one.
_SMALL = 1 << 24
_MAX_NODES = 64


def _simple_expr(e, count) -> bool:
    count[0] += 1
    if count[0] > _MAX_NODES:
        return False
    if isinstance(e, IntConst):
        return abs(e.value) <= _SMALL
    if isinstance(e, Var):
        return e.ref.domain is Domain.INT
    if isinstance(e, Neg):
        return _simple_expr(e.operand, count)
    if isinstance(e, (Add, Sub)):
        return _simple_expr(e.left, count) and _simple_expr(e.right, count)
    if isinstance(e, Mul):
        sides = (e.left, e.right)
        return (
            any(isinstance(x, IntConst) for x in sides)
            and all(isinstance(x, (IntConst, Var)) for x in sides)
            and all(_simple_expr(x, count) for x in sides)
        )
    return False


class _Fixed:
    """A shared-only atom: identical for every binding."""

    __slots__ = ("item",)

    def __init__(self, atom):
        norm = normalize_atom(atom)
        canon = norm.atom() if isinstance(norm, Separated) else atom
        sep = norm if isinstance(norm, Separated) else None
        self.item = (norm.sort_key(), canon, _compile_atom(canon), sep)

    def __call__(self, binding):
        return self.item


class _Shifted:
    """A linear atom whose locals only move the key."""

    __slots__ = ("terms", "op", "opi", "sign", "offset", "zeros", "se", "measure", "simple")

    def __init__(self, atom, norm, mirrored):
        self.terms = norm.terms
        self.op = norm.op
        self.opi = OPS.index(norm.op)
        self.sign = 1 if mirrored else -1
        self.offset = _cexpr(Sub(atom.lhs, atom.rhs))
        self.zeros = {r.name: 0 for r in pred_vars(atom) if r.scope is Scope.SHARED}
        self.se = terms_to_expr(norm.terms)
        self.measure = compile_terms(norm.terms)
        (monomial, coeff), *rest = norm.terms
        self.simple = monomial[0] if not rest and len(monomial) == 1 and coeff == 1 else None

    def __call__(self, binding):
        key = self.sign * self.offset(self.zeros, binding)
        op = self.op
        if self.simple is not None:
            fn = _SIMPLE[op](self.simple, key)
        else:
            cmp, measure = OP_FUNCS[op], self.measure
            fn = lambda s: cmp(measure(s), key)  # noqa: E731
        atom = Atom(self.se, op, IntConst(key))
        return (0, self.terms, self.opi, key), atom, fn, Separated(self.terms, op, key)


def _part(atom):
    refs = list(pred_vars(atom))
    if not refs:
        return None
    if all(r.scope is Scope.SHARED for r in refs):
        return _Fixed(atom)
    count = [0]
    if not (_simple_expr(atom.lhs, count) and _simple_expr(atom.rhs, count)):
        return None
    zeros = {r.name: 0 for r in refs if r.scope is Scope.LOCAL}
    norm = normalize_atom(atom, zeros)
    if not isinstance(norm, Separated):
        return None
    try:
        poly = _linearize(Sub(atom.lhs, atom.rhs), zeros)
    except _NotLinear:
        return None
    poly.pop((), None)
    mirrored = min(poly.items())[1] < 0
    return _Shifted(atom, norm, mirrored)


def _tag(items) -> Tag:
    seps = [item[3] for item in items if item[3] is not None]
    for n in seps:
        if n.op == EQ:
            return Tag(TagMode.EQUIVALENCE, terms_to_expr(n.terms), n.key, None, n.terms)
    for n in seps:
        if n.op in ORDERED_OPS:
            return Tag(TagMode.THRESHOLD, terms_to_expr(n.terms), n.key, n.op, n.terms)
    return NONE_TAG


def _all(fns):
    if len(fns) == 1:
        return fns[0]
    if len(fns) == 2:
        f, g = fns
        return lambda s: f(s) and g(s)
    fns = tuple(fns)
    return lambda s: all(f(s) for f in fns)


class Template:
    """Binding-independent part of preparing one DNF predicate with locals."""

    __slots__ = ("conjs", "locals")

    def __init__(self, conjs, locals_):
        self.conjs = conjs
        self.locals = locals_

    @classmethod
    def build(cls, dnf: DnfPred, locals_) -> Template | None:
        """Return a template for *dnf*, or None if it needs the general path."""
        conjs = []
        for conj in dnf.conjunctions:
            if not conj:
                return None
            parts = []
            for atom in conj:
                part = _part(atom)
                if part is None:
                    return None
                parts.append(part)
            conjs.append(tuple(parts))
        return cls(tuple(conjs), tuple(locals_))

    def instantiate(self, binding, tagging: bool):
        """``(canonical, key, tags, evaluate)``, or None for out-of-range values."""
        for name in self.locals:
            v = binding[name]
            if type(v) is not int or not -_SMALL <= v <= _SMALL:
                return None
        conj_map = {}
        for parts in self.conjs:
            atoms = {}
            for part in parts:
                item = part(binding)
                atoms.setdefault(item[0], item)
            ordered = tuple(sorted(atoms))
            if ordered not in conj_map:
                conj_map[ordered] = [atoms[k] for k in ordered]
        keys = sorted(conj_map)
        groups = [conj_map[k] for k in keys]
        canon = DnfPred(tuple(tuple(item[1] for item in g) for g in groups))
        tags = (
            [(conj, _tag(g)) for conj, g in zip(canon.conjunctions, groups)] if tagging else ()
        )
        fns = [_all([item[2] for item in g]) for g in groups]
        if len(fns) == 1:
            evaluate = fns[0]
        else:
            fns = tuple(fns)
            evaluate = lambda s: any(f(s) for f in fns)  # noqa: E731
        return canon, tuple(keys), tags, evaluate
