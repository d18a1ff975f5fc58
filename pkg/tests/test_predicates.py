import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from automon import (
    DnfTooLarge,
    IncompleteBinding,
    Int64Overflow,
    PermanentWait,
    canonical_key,
    canonicalize,
    classify,
    evaluate,
    globalize,
    normalize_atom,
    parse,
    to_dnf,
)
from automon.predicates import (
    INT64_MAX,
    Atom,
    DnfPred,
    IntConst,
    Kind,
    Mul,
    Opaque,
    Scope,
    Separated,
    Var,
    VarRef,
    compile_dnf,
    compile_pred,
)

import _gen


def dnf(text, b=None):
    p = to_dnf(parse(text))
    return globalize(p, b) if b is not None else p


def conj_strs(d):
    return [sorted(str(a) for a in c) for c in d.conjunctions]


# -- to_dnf ---------------------------------------------------------------------


def test_dnf_input_unchanged():
    d = dnf("x == 1 && y == 6 || z != 8")
    assert len(d.conjunctions) == 2
    assert conj_strs(d) == [["x == 1", "y == 6"], ["z != 8"]]


def test_de_morgan_flips_ops():
    d = dnf("!(x == 1 || y > 2)")
    assert conj_strs(d) == [["x != 1", "y <= 2"]]


def test_distribution_over_or():
    d = dnf("a > 0 && (b == 1 || c == 2)")
    assert conj_strs(d) == [["a > 0", "b == 1"], ["a > 0", "c == 2"]]


def test_double_negation_and_ne_kept_as_leaf():
    assert conj_strs(dnf("!!(x != 3)")) == [["x != 3"]]
    assert conj_strs(dnf("!(x == 3)")) == [["x != 3"]]


def test_dnf_size_limit():
    clauses = " && ".join(f"(a{i} == 0 || b{i} == 0)" for i in range(9))
    with pytest.raises(DnfTooLarge):
        to_dnf(parse(clauses))
    assert len(to_dnf(parse(clauses), limit=1024).conjunctions) == 512


# -- classify -----------------------------------------------------------------------


def test_classify():
    assert classify(parse("count > 0")) is Kind.SHARED
    assert classify(parse("count >= $num")) is Kind.COMPLEX
    assert classify(parse("$a == 5")) is Kind.COMPLEX


# -- globalize ----------------------------------------------------------------------


def test_globalize_substitutes_locals():
    g = globalize(parse("count >= $num"), {"num": 48})
    assert str(g) == "count >= 48"


def test_globalize_shared_only_is_identity():
    p = parse("count > 0 && x < 3")
    assert globalize(p, {}) == p
    d = to_dnf(p)
    assert globalize(d, {}) == d


def test_globalize_normalizes_linear_atoms():
    g = globalize(to_dnf(parse("x + $b > 2 * y + $a")), {"a": 11, "b": 2})
    assert str(g) == "x - 2*y > 9"


def test_globalize_missing_binding():
    with pytest.raises(IncompleteBinding) as info:
        globalize(parse("x > $a + $b"), {"a": 1})
    assert info.value.missing == ("b",)


def test_globalize_constant_false_is_permanent_wait():
    with pytest.raises(PermanentWait):
        globalize(to_dnf(parse("$a > 3")), {"a": 1})
    with pytest.raises(PermanentWait):
        globalize(parse("$a > 3 && x == 1"), {"a": 1})


def test_globalize_folds_true_conjunct_away():
    g = globalize(to_dnf(parse("$a > 3 && x == 1")), {"a": 5})
    assert str(g) == "x == 1"
    assert globalize(to_dnf(parse("$a > 3 || x == 1")), {"a": 5}).is_true


def test_globalize_overflow_reported():
    with pytest.raises(Int64Overflow):
        globalize(to_dnf(parse("x > $a + $b")), {"a": INT64_MAX, "b": 1})


# -- normalize_atom ---------------------------------------------------------------------


def test_normalize_equivalence_with_locals():
    n = normalize_atom(parse("x - $a == y + $b"), {"a": 3, "b": 4})
    assert isinstance(n, Separated)
    assert (str(n.se), n.op, n.key) == ("x - y", "=", 7)


def test_normalize_threshold():
    n = normalize_atom(parse("x + $b > 2 * y + $a"), {"a": 11, "b": 2})
    assert (str(n.se), n.op, n.key) == ("x - 2*y", ">", 9)


def test_normalize_flips_op_when_shared_side_negated():
    n = normalize_atom(parse("5 > x"))
    assert (str(n.se), n.op, n.key) == ("x", "<", 5)
    n = normalize_atom(parse("-x >= 2"))
    assert (str(n.se), n.op, n.key) == ("x", "<=", -2)


def test_normalize_mixed_product_is_opaque():
    assert isinstance(normalize_atom(parse("x * $a >= 5"), {"a": 2}), Opaque)


def test_normalize_bool_is_opaque():
    assert isinstance(normalize_atom(parse("flag == true")), Opaque)


def test_mixed_product_still_evaluates_after_globalization():
    p = Atom(Mul(Var(VarRef("x")), Var(VarRef("a", Scope.LOCAL))), ">=", IntConst(5))
    g = globalize(to_dnf(p), {"a": 2})
    assert evaluate(g, {"x": 3}) and not evaluate(g, {"x": 2})


# -- canonical_key --------------------------------------------------------------------------


def test_same_globalization_same_key():
    k1 = canonical_key(globalize(to_dnf(parse("count >= $n")), {"n": 48}))
    k2 = canonical_key(globalize(to_dnf(parse("count >= $m")), {"m": 48}))
    assert k1 == k2


def test_atom_order_irrelevant():
    assert canonical_key(dnf("y == 6 && x == 1")) == canonical_key(dnf("x == 1 && y == 6"))
    assert canonical_key(dnf("a > 1 || b > 2")) == canonical_key(dnf("b > 2 || a > 1"))


def test_different_constants_different_keys():
    assert canonical_key(dnf("x > 5")) != canonical_key(dnf("x > 3"))


def test_equivalent_rearrangements_share_key():
    assert canonical_key(dnf("x + 1 > y")) == canonical_key(dnf("y - x < 1"))


def test_canonicalize_deduplicates():
    canon, _ = canonicalize(dnf("x > 1 && x > 1 || x > 1"))
    assert len(canon.conjunctions) == 1
    assert len(canon.conjunctions[0]) == 1


# -- eval -----------------------------------------------------------------------------------


def test_eval_examples():
    assert not evaluate(dnf("x >= 5 && y != 1"), {"x": 9, "y": 1})
    assert evaluate(dnf("x > 7"), {"x": 9})
    assert evaluate(dnf("x == 8"), {"x": 8})


def test_compiled_evaluators_agree():
    p = parse("x + 2 * $a > y || !(y == $a) && flag")
    check = compile_pred(p)
    rng = random.Random(3)
    for _ in range(200):
        store = {"x": rng.randint(-3, 3), "y": rng.randint(-3, 3), "flag": rng.random() < 0.5}
        b = {"a": rng.randint(-3, 3)}
        assert check(store, b) == evaluate(p, store, b)
        g = globalize(to_dnf(p), b)
        assert compile_dnf(g)(store) == evaluate(p, store, b)


def test_true_and_false_dnf():
    assert evaluate(DnfPred(((),)), {})
    assert not evaluate(DnfPred(()), {})


# -- properties -------------------------------------------------------------------------------


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_dnf_soundness(seed):
    rng = random.Random(seed)
    refs = [VarRef(n) for n in "xyzw"]
    p = _gen.random_pred(rng, refs, 5)
    d = to_dnf(p, limit=4096)
    for env in _gen.assignments("xyzw"):
        assert _gen.eval_dnf(d, env) == _gen.eval_tree(p, env)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_globalization_equivalence(seed):
    rng = random.Random(seed)
    refs = _gen.random_vars(rng)
    p = _gen.random_pred(rng, refs, 4)
    locals_ = sorted(r.name for r in refs if r.scope is Scope.LOCAL)
    shared = sorted(r.name for r in refs if r.scope is Scope.SHARED)
    for b in _gen.assignments(locals_):
        try:
            g = globalize(p, b)
        except PermanentWait:
            assert not any(_gen.eval_tree(p, {**s, **b}) for s in _gen.assignments(shared))
            continue
        for s in _gen.assignments(shared):
            assert evaluate(g, s) == _gen.eval_tree(p, {**s, **b})


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_canonicalization_is_a_congruence(seed):
    rng = random.Random(seed)
    refs = [VarRef(n) for n in "xy"]
    preds = [to_dnf(_gen.random_pred(rng, refs, 3), limit=4096) for _ in range(12)]
    by_key = {}
    for p in preds:
        canon, key = canonicalize(p)
        for env in _gen.assignments("xy"):
            assert evaluate(canon, env) == evaluate(p, env)
        by_key.setdefault(key, []).append(p)
    for group in by_key.values():
        for env in _gen.assignments("xy"):
            assert len({evaluate(p, env) for p in group}) == 1


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_normalize_atom_preserves_truth(seed):
    rng = random.Random(seed)
    refs = _gen.random_vars(rng, 3)
    atom = _gen.random_atom(rng, refs, depth=2)
    locals_ = [r.name for r in refs if r.scope is Scope.LOCAL]
    shared = [r.name for r in refs if r.scope is Scope.SHARED]
    for b in _gen.assignments(locals_, (-1, 0, 2)):
        n = normalize_atom(atom, b)
        if isinstance(n, Opaque):
            continue
        for s in _gen.assignments(shared, (-2, 0, 1, 3)):
            assert evaluate(n.atom(), s) == _gen.eval_tree(atom, {**s, **b})
