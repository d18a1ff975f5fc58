"""One tag per conjunction, so the condition manager can index waiters.

A tag summarizes a conjunction by a single atom that must hold whenever
the conjunction holds.  Equivalence atoms (``SE == key``) are preferred
since only one key per shared expression can match at a time; threshold
atoms (``SE < key`` and friends) come next; everything else gets the
``NONE`` tag and is searched exhaustively.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

from automon.errors import PredicateError
from automon.predicates import (
    EQ,
    OP_FUNCS,
    ORDERED_OPS,
    Atom,
    DnfPred,
    Expr,
    Separated,
    normalize_atom,
)


class TagMode(enum.Enum):
    EQUIVALENCE = "equivalence"
    THRESHOLD = "threshold"
    NONE = "none"


@dataclass(frozen=True)
class Tag:
    mode: TagMode
    expr: Expr | None = None
    key: int | None = None
    op: str | None = None
    # Sorted (monomial, coeff) pairs of ``expr``; identifies the index slot.
    terms: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode is TagMode.NONE:
            ok = self.expr is None and self.key is None and self.op is None
        elif self.mode is TagMode.EQUIVALENCE:
            ok = self.expr is not None and self.key is not None and self.op is None
        else:
            ok = self.expr is not None and self.key is not None and self.op in ORDERED_OPS
        if not ok:
            raise PredicateError(f"malformed tag {self!r}")

    def holds(self, value) -> bool:
        """Truth of the tag given the current value of its shared expression."""
        if self.mode is TagMode.EQUIVALENCE:
            return value == self.key
        if self.mode is TagMode.THRESHOLD:
            return OP_FUNCS[self.op](value, self.key)
        return True

    def __str__(self):
        if self.mode is TagMode.NONE:
            return "(None)"
        if self.mode is TagMode.EQUIVALENCE:
            return f"(Equivalence, {self.expr}, {self.key})"
        return f"(Threshold, {self.expr}, {self.key}, {self.op})"


NONE_TAG = Tag(TagMode.NONE)


def _separated(atoms, binding):
    normalized = [normalize_atom(a, binding) for a in atoms]
    normalized.sort(key=lambda n: n.sort_key())
    return [n for n in normalized if isinstance(n, Separated)]


def tag_conjunction(c, b: Mapping | None = None) -> Tag:
    """Tag a conjunction (a sequence of atoms).

    The first equivalence atom in canonical atom order wins; failing that
    the first threshold atom; otherwise the conjunction is tagged NONE.
    ``!=`` atoms never anchor a tag.
    """
    separated = _separated(c, b or {})
    for n in separated:
        if n.op == EQ:
            return Tag(TagMode.EQUIVALENCE, n.se, n.key, None, n.terms)
    for n in separated:
        if n.op in ORDERED_OPS:
            return Tag(TagMode.THRESHOLD, n.se, n.key, n.op, n.terms)
    return NONE_TAG


def tag_predicate(p: DnfPred, b: Mapping | None = None) -> list:
    """``[(conjunction, tag), ...]`` with exactly one tag per conjunction, in order."""
    return [(conj, tag_conjunction(conj, b)) for conj in p.conjunctions]


def anchor_atom(c, b: Mapping | None = None) -> Atom | None:
    """The atom a conjunction's tag was derived from, or None for NONE tags."""
    tag = tag_conjunction(c, b)
    if tag.mode is TagMode.NONE:
        return None
    op = EQ if tag.mode is TagMode.EQUIVALENCE else tag.op
    return Separated(tag.terms, op, tag.key).atom()
