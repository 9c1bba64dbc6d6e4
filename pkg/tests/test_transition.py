import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpypdp.transition import (
    LEFT_ARC,
    RIGHT_ARC,
    SH,
    SHIFT,
    DepTree,
    OracleError,
    Transition,
    apply,
    derivation_to_tree,
    greedy_oracle,
    initial_configuration,
    is_terminal,
    legal_kinds,
    legal_transitions,
    oracle_choices,
    oracle_derivation,
)
from helpers import random_derivation
from oracles import all_derivations, derivation_heads, legal, projective_trees, to_pairs

LA = Transition.left(0)
RA = Transition.right(0)


def run(seq, n):
    c = initial_configuration()
    for t in seq:
        c = apply(c, t, n)
    return c


def test_initial_and_root_shift():
    c = initial_configuration()
    assert c.stack == () and c.buffer == 0
    assert legal_kinds(c, 3) == (True, False, False)
    c = apply(c, SH, 3)
    assert c.stack == (0,) and c.buffer == 1


def test_shift_pushes_buffer_word():
    c = run([SH, SH], 3)
    assert c.stack == (0, 1) and c.buffer == 2 and not c.arcs


def test_left_arc_attaches_second_to_top():
    c = run([SH, SH, SH, LA], 3)
    assert c.stack == (0, 2)
    assert {(a.head, a.dependent) for a in c.arcs} == {(2, 1)}


def test_right_arc_attaches_top_to_second():
    c = run([SH, SH, SH, RA], 3)
    assert c.stack == (0, 1)
    assert {(a.head, a.dependent) for a in c.arcs} == {(1, 2)}


def test_root_never_becomes_dependent():
    c = run([SH, SH], 2)
    assert legal_kinds(c, 2) == (True, False, False)
    with pytest.raises(ValueError):
        apply(c, LA, 2)
    with pytest.raises(ValueError):
        apply(c, RA, 2)


def test_root_attachment_only_after_buffer_exhausted():
    c = run([SH, SH, SH], 3)
    assert legal_transitions(c, 3) == {SHIFT, LEFT_ARC, RIGHT_ARC}
    c = run([SH, SH, SH, LA], 3)
    assert legal_kinds(c, 3) == (True, False, False)
    c = run([SH, SH, SH, LA], 2)
    assert legal_kinds(c, 2) == (False, False, True)


def test_generative_regime_allows_stop_at_root():
    c = run([SH, SH], None)
    assert legal_kinds(c, None) == (True, False, True)
    c = apply(c, RA, None)
    assert is_terminal(c, None)


def test_terminal():
    c = run([SH, SH, SH, LA, RA], 2)
    assert is_terminal(c, 2)
    assert not is_terminal(run([SH, SH], 1), 1)
    with pytest.raises(ValueError):
        apply(c, SH, 2)


def test_oracle_example_left_arc_may_wait_for_right_child():
    gold = DepTree.from_heads([2, 0, 2])
    c = run([SH, SH, SH], 3)
    assert oracle_choices(c, gold) == [LA, SH]


def test_oracle_right_arc_forced():
    gold = DepTree.from_heads([0, 1])
    c = run([SH, SH, SH], 2)
    assert oracle_choices(c, gold) == [RA]


def test_oracle_without_right_children_left_arc_only():
    gold = DepTree.from_heads([2, 0])
    c = run([SH, SH, SH], 2)
    assert oracle_choices(c, gold) == [LA]


def test_greedy_run_hand_sequence():
    gold = DepTree.from_heads([2, 0, 2])
    assert oracle_derivation(gold) == [SH, SH, SH, LA, SH, RA, RA]


def test_oracle_rejects_underivable_state():
    gold = DepTree.from_heads([2, 0, 2])
    c = run([SH, SH, SH, RA], 3)  # wrongly attaches 2 under 1
    with pytest.raises(OracleError):
        while True:
            t = greedy_oracle(c, gold)
            c = apply(c, t, 3)


def test_oracle_rejects_invalid_head():
    with pytest.raises(OracleError):
        oracle_choices(initial_configuration(), DepTree.from_heads([5]))


def test_labels_carried_through():
    gold = DepTree.from_heads([2, 0, 2], [3, 1, 4])
    seq = oracle_derivation(gold)
    tree = derivation_to_tree(seq, 3)
    assert tree.heads == gold.heads and tree.labels == gold.labels


def test_derivation_to_tree_rejects_incomplete():
    with pytest.raises(ValueError):
        derivation_to_tree([SH, SH, SH], 2)


def test_legality_matches_oracle_table():
    rng = random.Random(0)
    for _ in range(300):
        n = rng.randint(1, 7)
        seq = random_derivation(n, rng)
        c = initial_configuration()
        for t in seq:
            stack = list(c.stack)
            expect = set(legal(stack, c.buffer, n)) if stack else {"sh"}
            got = {{SHIFT: "sh", LEFT_ARC: "la", RIGHT_ARC: "ra"}[k] for k in legal_transitions(c, n)}
            assert got == expect
            c = apply(c, t, n)
            c.audit()


def reachable(gold: DepTree) -> set:
    n = gold.n
    out = set()

    def rec(c, seq):
        if is_terminal(c, n):
            out.add(to_pairs(seq))
            return
        for t in oracle_choices(c, gold):
            rec(apply(c, t, n), seq + [t])

    rec(apply(initial_configuration(), SH, n), [])
    return out


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_oracle_reachable_set_equals_brute_force(n):
    by_tree: dict = {}
    for seq in all_derivations(n):
        by_tree.setdefault(derivation_heads(seq, n), set()).add(tuple((m, None if m == "sh" else 0) for m, _ in seq))
    assert set(by_tree) == set(projective_trees(n))
    for heads, derivs in by_tree.items():
        assert reachable(DepTree.from_heads(heads)) == derivs


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_greedy_oracle_reconstructs_random_trees(seed, n):
    rng = random.Random(seed)
    seq = random_derivation(n, rng, labels=3)
    gold = derivation_to_tree(seq, n)
    again = derivation_to_tree(oracle_derivation(gold), n)
    assert again == gold
    assert len(oracle_derivation(gold)) == 2 * n + 1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10))
def test_configuration_invariants(seed, n):
    rng = random.Random(seed)
    c = initial_configuration()
    for t in random_derivation(n, rng):
        c = apply(c, t, n)
        c.audit()
        assert c.depth >= 1 and c.stack[0] == 0
    assert is_terminal(c, n)
    heads = c.heads(n)
    assert all(0 <= h <= n for h in heads[1:])
