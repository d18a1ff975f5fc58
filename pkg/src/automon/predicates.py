"""Predicate representation, DNF conversion, globalization and evaluation.

A predicate is a boolean formula over integer/boolean variables.  Variables
are either *shared* (they live in a monitor's store, any thread may read
them under the lock) or *local* (they belong to the waiting thread and are
frozen for the duration of a wait).  Substituting the locals by their
values turns any predicate into a shared one that every thread can
evaluate; this is what :func:`globalize` does.

All node types are frozen dataclasses, so predicates are hashable values
and can be shared between threads freely.
"""

from __future__ import annotations

import enum
import operator
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Union

from automon.errors import (
    DnfTooLarge,
    IncompleteBinding,
    Int64Overflow,
    MissingVariable,
    PermanentWait,
    PredicateError,
)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

DEFAULT_DNF_LIMIT = 256


def check_int64(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise Int64Overflow(f"integer {value} outside the signed 64-bit range")
    return value


class Scope(enum.Enum):
    SHARED = "shared"
    LOCAL = "local"


class Domain(enum.Enum):
    INT = "int"
    BOOL = "bool"


EQ, NE, LT, LE, GT, GE = "=", "!=", "<", "<=", ">", ">="
OPS = (EQ, NE, LT, LE, GT, GE)
ORDERED_OPS = frozenset((LT, LE, GT, GE))

NEGATED_OP = {EQ: NE, NE: EQ, LT: GE, GE: LT, GT: LE, LE: GT}
# Operator obtained when both sides of a comparison are multiplied by -1.
MIRRORED_OP = {EQ: EQ, NE: NE, LT: GT, GT: LT, LE: GE, GE: LE}
OP_FUNCS = {
    EQ: operator.eq,
    NE: operator.ne,
    LT: operator.lt,
    LE: operator.le,
    GT: operator.gt,
    GE: operator.ge,
}


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarRef:
    name: str
    scope: Scope = Scope.SHARED
    domain: Domain = Domain.INT

    def __post_init__(self):
        if not self.name or not self.name.isidentifier():
            raise PredicateError(f"invalid variable name {self.name!r}")

    def __str__(self):
        return ("$" if self.scope is Scope.LOCAL else "") + self.name


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    @property
    def domain(self) -> Domain:
        return Domain.INT


@dataclass(frozen=True)
class IntConst(Expr):
    value: int

    def __post_init__(self):
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise PredicateError(f"IntConst needs an int, got {self.value!r}")
        check_int64(self.value)

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class BoolConst(Expr):
    value: bool

    @property
    def domain(self):
        return Domain.BOOL

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Var(Expr):
    ref: VarRef

    @property
    def domain(self):
        return self.ref.domain

    def __str__(self):
        return str(self.ref)


def _require_int(*exprs):
    for e in exprs:
        if e.domain is not Domain.INT:
            raise PredicateError(f"arithmetic on non-integer expression {e}")


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def __post_init__(self):
        _require_int(self.left, self.right)

    def __str__(self):
        return f"{self.left} + {_paren(self.right, Add)}"


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def __post_init__(self):
        _require_int(self.left, self.right)

    def __str__(self):
        return f"{self.left} - {_paren(self.right, Add)}"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def __post_init__(self):
        _require_int(self.left, self.right)

    def __str__(self):
        return f"{_paren(self.left, Mul)}*{_paren(self.right, Mul, strict=True)}"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def __post_init__(self):
        _require_int(self.operand)

    def __str__(self):
        return f"-{_paren(self.operand, Neg)}"


def _paren(e, parent, strict=False):
    rank = {Add: 1, Sub: 1, Mul: 2, Neg: 3}
    mine = rank.get(type(e), 4)
    theirs = rank[parent]
    if mine < theirs or (strict and mine == theirs):
        return f"({e})"
    return str(e)


def expr_vars(e: Expr) -> Iterator[VarRef]:
    if isinstance(e, Var):
        yield e.ref
    elif isinstance(e, (Add, Sub, Mul)):
        yield from expr_vars(e.left)
        yield from expr_vars(e.right)
    elif isinstance(e, Neg):
        yield from expr_vars(e.operand)


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------


class Pred:
    """Base class of predicate nodes.  ``&``, ``|`` and ``~`` build formulas."""

    __slots__ = ()

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Atom(Pred):
    lhs: Expr
    op: str
    rhs: Expr

    def __post_init__(self):
        if self.op not in OP_FUNCS:
            raise PredicateError(f"unknown comparison operator {self.op!r}")
        if self.op in ORDERED_OPS:
            _require_int(self.lhs, self.rhs)
        elif self.lhs.domain is not self.rhs.domain:
            raise PredicateError(f"cannot compare {self.lhs} with {self.rhs}: domains differ")

    def negated(self) -> "Atom":
        return Atom(self.lhs, NEGATED_OP[self.op], self.rhs)

    def __str__(self):
        op = "==" if self.op == EQ else self.op
        return f"{self.lhs} {op} {self.rhs}"


@dataclass(frozen=True)
class And(Pred):
    left: Pred
    right: Pred

    def __str__(self):
        return f"({self.left} && {self.right})"


@dataclass(frozen=True)
class Or(Pred):
    left: Pred
    right: Pred

    def __str__(self):
        return f"({self.left} || {self.right})"


@dataclass(frozen=True)
class Not(Pred):
    operand: Pred

    def __str__(self):
        return f"!({self.operand})"


@dataclass(frozen=True)
class Truth(Pred):
    """Constant predicate; produced by constant folding."""

    value: bool

    def __str__(self):
        return "true" if self.value else "false"


TRUE = Truth(True)
FALSE = Truth(False)

Conjunction = tuple  # tuple[Atom, ...]


@dataclass(frozen=True)
class DnfPred:
    """A disjunction of conjunctions of atoms.

    ``DnfPred(())`` is false, ``DnfPred(((),))`` is true.
    """

    conjunctions: tuple

    def atoms(self) -> Iterator[Atom]:
        for conj in self.conjunctions:
            yield from conj

    @property
    def is_true(self) -> bool:
        return any(not conj for conj in self.conjunctions)

    @property
    def is_false(self) -> bool:
        return not self.conjunctions

    def to_pred(self) -> Pred:
        result = None
        for conj in self.conjunctions:
            term = None
            for atom in conj:
                term = atom if term is None else And(term, atom)
            if term is None:
                term = TRUE
            result = term if result is None else Or(result, term)
        return FALSE if result is None else result

    def __str__(self):
        if self.is_false:
            return "false"
        parts = []
        for conj in self.conjunctions:
            parts.append(" && ".join(str(a) for a in conj) if conj else "true")
        if len(parts) == 1:
            return parts[0]
        return " || ".join(f"({p})" if len(c) > 1 else p for p, c in zip(parts, self.conjunctions))


AnyPred = Union[Pred, DnfPred]


def pred_vars(p: AnyPred) -> Iterator[VarRef]:
    if isinstance(p, DnfPred):
        for atom in p.atoms():
            yield from pred_vars(atom)
    elif isinstance(p, Atom):
        yield from expr_vars(p.lhs)
        yield from expr_vars(p.rhs)
    elif isinstance(p, (And, Or)):
        yield from pred_vars(p.left)
        yield from pred_vars(p.right)
    elif isinstance(p, Not):
        yield from pred_vars(p.operand)


def local_names(p: AnyPred) -> frozenset:
    return frozenset(r.name for r in pred_vars(p) if r.scope is Scope.LOCAL)


def shared_names(p: AnyPred) -> frozenset:
    return frozenset(r.name for r in pred_vars(p) if r.scope is Scope.SHARED)


class Kind(enum.Enum):
    SHARED = "shared"
    COMPLEX = "complex"


def classify(p: AnyPred) -> Kind:
    """A predicate is shared iff every variable it mentions is shared."""
    for ref in pred_vars(p):
        if ref.scope is Scope.LOCAL:
            return Kind.COMPLEX
    return Kind.SHARED


# ---------------------------------------------------------------------------
# DNF
# ---------------------------------------------------------------------------


def to_dnf(p: AnyPred, limit: int = DEFAULT_DNF_LIMIT) -> DnfPred:
    """Convert to DNF by De Morgan's laws and distribution of ``&&`` over ``||``.

    Negations are pushed into the atoms by flipping their operator, so
    ``!=`` survives as a leaf operator.  Raises :class:`DnfTooLarge` when
    more than *limit* conjunctions would be produced.
    """
    if isinstance(p, DnfPred):
        if len(p.conjunctions) > limit:
            raise DnfTooLarge(f"{len(p.conjunctions)} conjunctions exceed the limit of {limit}")
        return p
    return DnfPred(tuple(_dnf(p, False, limit)))


def _dnf(p, negate, limit):
    if isinstance(p, Atom):
        return [(p.negated() if negate else p,)]
    if isinstance(p, Truth):
        return [()] if p.value != negate else []
    if isinstance(p, Not):
        return _dnf(p.operand, not negate, limit)
    if isinstance(p, (And, Or)):
        left = _dnf(p.left, negate, limit)
        right = _dnf(p.right, negate, limit)
        conjunctive = isinstance(p, And) != negate
        if conjunctive:
            if len(left) * len(right) > limit:
                raise DnfTooLarge(
                    f"{len(left) * len(right)} conjunctions exceed the limit of {limit}"
                )
            return [a + b for a in left for b in right]
        if len(left) + len(right) > limit:
            raise DnfTooLarge(f"{len(left) + len(right)} conjunctions exceed the limit of {limit}")
        return left + right
    raise PredicateError(f"not a predicate: {p!r}")


# ---------------------------------------------------------------------------
# Linear separation of atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Separated:
    """An atom rearranged as ``SE op key``.

    ``terms`` is the shared side as a sorted tuple of ``(monomial, coeff)``
    pairs, where a monomial is a sorted tuple of shared variable names
    (products of shared variables stay inside the shared side).  The first
    coefficient is always positive.
    """

    terms: tuple
    op: str
    key: int

    @property
    def se(self) -> Expr:
        return terms_to_expr(self.terms)

    def atom(self) -> Atom:
        return Atom(self.se, self.op, IntConst(self.key))

    def sort_key(self):
        return (0, self.terms, OPS.index(self.op), self.key)


@dataclass(frozen=True)
class Opaque:
    """An atom that is not linearly separable (boolean, or shared*local product)."""

    atom: Atom

    def sort_key(self):
        return (1, repr(self.atom))


Normalized = Union[Separated, Opaque]


def terms_to_expr(terms) -> Expr:
    result = None
    for monomial, coeff in terms:
        factors = None
        for name in monomial:
            v = Var(VarRef(name))
            factors = v if factors is None else Mul(factors, v)
        magnitude = abs(coeff)
        term = factors if magnitude == 1 else Mul(IntConst(magnitude), factors)
        if result is None:
            result = term if coeff > 0 else Neg(term)
        elif coeff > 0:
            result = Add(result, term)
        else:
            result = Sub(result, term)
    if result is None:
        return IntConst(0)
    return result


class _NotLinear(Exception):
    pass


def _has_scope(e: Expr, scope: Scope) -> bool:
    return any(r.scope is scope for r in expr_vars(e))


def _linearize(e: Expr, binding: Mapping) -> dict:
    """Polynomial of *e* as ``{monomial: coeff}``; locals become constants."""
    if isinstance(e, IntConst):
        return {(): e.value} if e.value else {}
    if isinstance(e, Var):
        ref = e.ref
        if ref.domain is not Domain.INT:
            raise _NotLinear
        if ref.scope is Scope.SHARED:
            return {(ref.name,): 1}
        if ref.name not in binding:
            raise IncompleteBinding([ref.name])
        value = _local_value(ref, binding[ref.name])
        return {(): value} if value else {}
    if isinstance(e, (Add, Sub)):
        left = _linearize(e.left, binding)
        right = _linearize(e.right, binding)
        sign = 1 if isinstance(e, Add) else -1
        out = dict(left)
        for m, c in right.items():
            out[m] = check_int64(out.get(m, 0) + sign * c)
            if not out[m]:
                del out[m]
        return out
    if isinstance(e, Neg):
        return {m: check_int64(-c) for m, c in _linearize(e.operand, binding).items()}
    if isinstance(e, Mul):
        if (_has_scope(e.left, Scope.SHARED) and _has_scope(e.right, Scope.LOCAL)) or (
            _has_scope(e.left, Scope.LOCAL) and _has_scope(e.right, Scope.SHARED)
        ):
            raise _NotLinear
        left = _linearize(e.left, binding)
        right = _linearize(e.right, binding)
        out = {}
        for ml, cl in left.items():
            for mr, cr in right.items():
                m = tuple(sorted(ml + mr))
                out[m] = check_int64(out.get(m, 0) + check_int64(cl * cr))
                if not out[m]:
                    del out[m]
        return out
    raise _NotLinear


def _local_value(ref: VarRef, value):
    if ref.domain is Domain.BOOL:
        if not isinstance(value, bool):
            raise PredicateError(f"local {ref.name} is boolean, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, int):
        raise PredicateError(f"local {ref.name} is an integer, got {value!r}")
    return check_int64(value)


def normalize_atom(a: Atom, b: Mapping | None = None) -> Normalized:
    """Separate shared and local terms: ``Separated(SE, op, key)`` or ``Opaque``.

    Shared monomials move to the left, locals and constants to the right
    and are folded with *b* into the integer key.  The shared side is
    scaled by -1 when needed so that its first coefficient is positive,
    mirroring the operator.  Atoms over booleans or multiplying shared by
    local variables come back ``Opaque``, as do atoms without any shared
    variable.
    """
    b = {} if b is None else b
    if a.lhs.domain is not Domain.INT:
        return Opaque(a)
    try:
        poly = _linearize(Sub(a.lhs, a.rhs), b)
    except _NotLinear:
        return Opaque(a)
    constant = poly.pop((), 0)
    if not poly:
        return Opaque(a)
    terms = tuple(sorted(poly.items()))
    key = check_int64(-constant)
    op = a.op
    if terms[0][1] < 0:
        terms = tuple((m, -c) for m, c in terms)
        key = check_int64(-key)
        op = MIRRORED_OP[op]
    return Separated(terms, op, key)


# ---------------------------------------------------------------------------
# Globalization
# ---------------------------------------------------------------------------


def _substitute(e: Expr, binding: Mapping) -> Expr:
    if isinstance(e, Var):
        ref = e.ref
        if ref.scope is Scope.SHARED:
            return e
        value = _local_value(ref, binding[ref.name])
        return BoolConst(value) if ref.domain is Domain.BOOL else IntConst(value)
    if isinstance(e, (Add, Sub, Mul)):
        left = _substitute(e.left, binding)
        right = _substitute(e.right, binding)
        if isinstance(left, IntConst) and isinstance(right, IntConst):
            fn = {Add: operator.add, Sub: operator.sub, Mul: operator.mul}[type(e)]
            return IntConst(check_int64(fn(left.value, right.value)))
        return type(e)(left, right)
    if isinstance(e, Neg):
        inner = _substitute(e.operand, binding)
        if isinstance(inner, IntConst):
            return IntConst(check_int64(-inner.value))
        return Neg(inner)
    return e


def _is_const(e: Expr) -> bool:
    return isinstance(e, (IntConst, BoolConst))


def _globalize_atom(atom: Atom, binding: Mapping) -> Pred:
    has_local = any(r.scope is Scope.LOCAL for r in pred_vars(atom))
    if not has_local:
        if _is_const(atom.lhs) and _is_const(atom.rhs):
            return Truth(bool(OP_FUNCS[atom.op](atom.lhs.value, atom.rhs.value)))
        return atom
    substituted = Atom(_substitute(atom.lhs, binding), atom.op, _substitute(atom.rhs, binding))
    if _is_const(substituted.lhs) and _is_const(substituted.rhs):
        return Truth(bool(OP_FUNCS[atom.op](substituted.lhs.value, substituted.rhs.value)))
    norm = normalize_atom(substituted)
    if isinstance(norm, Separated):
        return norm.atom()
    return substituted


def globalize(p: AnyPred, b: Mapping) -> AnyPred:
    """Replace local variables by their values in *b* and fold constants.

    Accepts a :class:`Pred` or a :class:`DnfPred` and returns the same
    kind.  Atoms mentioning locals are rewritten into ``SE op key`` form
    when linear; atoms over shared variables only are left untouched.
    Raises :class:`IncompleteBinding` if *b* misses a local and
    :class:`PermanentWait` if the result is constantly false.
    """
    missing = local_names(p) - set(b)
    if missing:
        raise IncompleteBinding(missing)
    if isinstance(p, DnfPred):
        conjunctions = []
        for conj in p.conjunctions:
            atoms = []
            dead = False
            for atom in conj:
                g = _globalize_atom(atom, b)
                if isinstance(g, Truth):
                    if not g.value:
                        dead = True
                        break
                    continue
                atoms.append(g)
            if dead:
                continue
            if not atoms:
                return DnfPred(((),))
            conjunctions.append(tuple(atoms))
        if not conjunctions:
            raise PermanentWait(f"predicate {p} is always false under {dict(b)}")
        return DnfPred(tuple(conjunctions))
    result = _globalize_pred(p, b)
    if result == FALSE:
        raise PermanentWait(f"predicate {p} is always false under {dict(b)}")
    return result


def _globalize_pred(p: Pred, b: Mapping) -> Pred:
    if isinstance(p, Atom):
        return _globalize_atom(p, b)
    if isinstance(p, Truth):
        return p
    if isinstance(p, Not):
        inner = _globalize_pred(p.operand, b)
        if isinstance(inner, Truth):
            return Truth(not inner.value)
        return Not(inner)
    left = _globalize_pred(p.left, b)
    right = _globalize_pred(p.right, b)
    absorbing = isinstance(p, Or)  # true absorbs ||, false absorbs &&
    for side, other in ((left, right), (right, left)):
        if isinstance(side, Truth):
            return side if side.value == absorbing else other
    return type(p)(left, right)


# ---------------------------------------------------------------------------
# Canonical form
# ---------------------------------------------------------------------------


def canonicalize(p: DnfPred) -> tuple:
    """Return ``(canonical DnfPred, key)`` for a globalized DNF predicate.

    Every atom is normalized, atoms are sorted and deduplicated within each
    conjunction, and conjunctions are sorted and deduplicated.  Two
    predicates with the same key are the same predicate, so they share one
    condition record.
    """
    if local_names(p):
        raise PredicateError(f"canonicalize needs a globalized predicate, got {p}")
    conj_map = {}
    for conj in p.conjunctions:
        atoms = {}
        for atom in conj:
            norm = normalize_atom(atom)
            canon = norm.atom() if isinstance(norm, Separated) else atom
            atoms.setdefault(norm.sort_key(), canon)
        ordered = sorted(atoms)
        conj_map.setdefault(tuple(ordered), tuple(atoms[k] for k in ordered))
    keys = sorted(conj_map)
    return DnfPred(tuple(conj_map[k] for k in keys)), tuple(keys)


def canonical_key(p: DnfPred) -> tuple:
    return canonicalize(p)[1]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def eval_expr(e: Expr, store: Mapping, binding: Mapping | None = None):
    if isinstance(e, (IntConst, BoolConst)):
        return e.value
    if isinstance(e, Var):
        ref = e.ref
        source = store if ref.scope is Scope.SHARED else (binding or {})
        try:
            return source[ref.name]
        except KeyError:
            if ref.scope is Scope.SHARED:
                raise MissingVariable(ref.name) from None
            raise IncompleteBinding([ref.name]) from None
    if isinstance(e, Add):
        return eval_expr(e.left, store, binding) + eval_expr(e.right, store, binding)
    if isinstance(e, Sub):
        return eval_expr(e.left, store, binding) - eval_expr(e.right, store, binding)
    if isinstance(e, Mul):
        return eval_expr(e.left, store, binding) * eval_expr(e.right, store, binding)
    if isinstance(e, Neg):
        return -eval_expr(e.operand, store, binding)
    raise PredicateError(f"not an expression: {e!r}")


def eval_atom(a: Atom, store: Mapping, binding: Mapping | None = None) -> bool:
    return bool(OP_FUNCS[a.op](eval_expr(a.lhs, store, binding), eval_expr(a.rhs, store, binding)))


def evaluate(p: AnyPred, store: Mapping, binding: Mapping | None = None) -> bool:
    """Evaluate a predicate (DNF or tree) against a store and optional binding."""
    if isinstance(p, DnfPred):
        return any(all(eval_atom(a, store, binding) for a in conj) for conj in p.conjunctions)
    if isinstance(p, Atom):
        return eval_atom(p, store, binding)
    if isinstance(p, And):
        return evaluate(p.left, store, binding) and evaluate(p.right, store, binding)
    if isinstance(p, Or):
        return evaluate(p.left, store, binding) or evaluate(p.right, store, binding)
    if isinstance(p, Not):
        return not evaluate(p.operand, store, binding)
    if isinstance(p, Truth):
        return p.value
    raise PredicateError(f"not a predicate: {p!r}")


# Compiled evaluators ---------------------------------------------------------
#
# Building closures once per predicate keeps the hot path (relay_signal and
# waituntil checks) free of isinstance dispatch.


def compile_expr(e: Expr, with_binding: bool = False) -> Callable:
    """Compile *e* to ``f(store)`` (or ``f(store, binding)`` if *with_binding*)."""
    fn = _cexpr(e)
    if with_binding:
        return fn
    return lambda s: fn(s, None)


def _cexpr(e):
    if isinstance(e, (IntConst, BoolConst)):
        value = e.value
        return lambda s, b: value
    if isinstance(e, Var):
        name = e.ref.name
        if e.ref.scope is Scope.SHARED:
            return lambda s, b: s[name]
        return lambda s, b: b[name]
    if isinstance(e, Neg):
        inner = _cexpr(e.operand)
        return lambda s, b: -inner(s, b)
    left, right = _cexpr(e.left), _cexpr(e.right)
    if isinstance(e, Add):
        return lambda s, b: left(s, b) + right(s, b)
    if isinstance(e, Sub):
        return lambda s, b: left(s, b) - right(s, b)
    return lambda s, b: left(s, b) * right(s, b)


def compile_terms(terms):
    """Evaluator of a separated shared side."""
    if len(terms) == 1:
        (monomial, coeff), = terms
        if len(monomial) == 1:
            name = monomial[0]
            if coeff == 1:
                return lambda s: s[name]
            return lambda s: coeff * s[name]
    return compile_expr(terms_to_expr(terms))


def _compile_atom(a: Atom) -> Callable:
    if isinstance(a.lhs, Var) and a.lhs.ref.scope is Scope.SHARED and isinstance(a.rhs, IntConst):
        return _SIMPLE[a.op](a.lhs.ref.name, a.rhs.value)
    cmp = OP_FUNCS[a.op]
    lhs, rhs = _cexpr(a.lhs), _cexpr(a.rhs)
    return lambda s: cmp(lhs(s, None), rhs(s, None))


_SIMPLE = {
    EQ: lambda n, k: lambda s: s[n] == k,
    NE: lambda n, k: lambda s: s[n] != k,
    LT: lambda n, k: lambda s: s[n] < k,
    LE: lambda n, k: lambda s: s[n] <= k,
    GT: lambda n, k: lambda s: s[n] > k,
    GE: lambda n, k: lambda s: s[n] >= k,
}


def compile_dnf(p: DnfPred) -> Callable[[Mapping], bool]:
    """Compile a local-free DNF predicate into ``f(store) -> bool``."""
    if local_names(p):
        raise PredicateError(f"compile_dnf needs a globalized predicate, got {p}")
    conjs = []
    for conj in p.conjunctions:
        fns = [_compile_atom(a) for a in conj]
        if not fns:
            return lambda s: True
        if len(fns) == 1:
            conjs.append(fns[0])
        elif len(fns) == 2:
            f, g = fns
            conjs.append(lambda s, f=f, g=g: f(s) and g(s))
        else:
            conjs.append(lambda s, fns=tuple(fns): all(f(s) for f in fns))
    if not conjs:
        return lambda s: False
    if len(conjs) == 1:
        return conjs[0]
    conjs = tuple(conjs)
    return lambda s: any(f(s) for f in conjs)


def compile_pred(p: Pred) -> Callable[[Mapping, Mapping], bool]:
    """Compile a predicate tree (locals allowed) into ``f(store, binding) -> bool``."""
    if isinstance(p, Atom):
        cmp = OP_FUNCS[p.op]
        lhs, rhs = _cexpr(p.lhs), _cexpr(p.rhs)
        if isinstance(p.rhs, IntConst) and isinstance(p.lhs, Var):
            value = p.rhs.value
            return lambda s, b: cmp(lhs(s, b), value)
        return lambda s, b: cmp(lhs(s, b), rhs(s, b))
    if isinstance(p, And):
        left, right = compile_pred(p.left), compile_pred(p.right)
        return lambda s, b: left(s, b) and right(s, b)
    if isinstance(p, Or):
        left, right = compile_pred(p.left), compile_pred(p.right)
        return lambda s, b: left(s, b) or right(s, b)
    if isinstance(p, Not):
        inner = compile_pred(p.operand)
        return lambda s, b: not inner(s, b)
    if isinstance(p, Truth):
        value = p.value
        return lambda s, b: value
    raise PredicateError(f"not a predicate: {p!r}")
