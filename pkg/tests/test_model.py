import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpypdp.model import (
    TRANSITION_ELEMENTS,
    WORD_ELEMENTS,
    ContextSpec,
    Derivation,
    GenerativeModel,
    default_specs,
)
from hpypdp.transition import (
    LEFT_ARC,
    RIGHT_ARC,
    SH,
    Transition,
    apply,
    initial_configuration,
    legal_kinds,
    oracle_derivation,
)
from helpers import random_derivation, random_model, random_sentence, tiny_vocab
from oracles import OracleScorer, to_pairs


def derivation_of(sentence) -> Derivation:
    return Derivation(list(sentence.words), list(sentence.tags), oracle_derivation(sentence.tree)[1:])


def random_full_derivation(vocab, n, rng, labels=1) -> Derivation:
    seq = random_derivation(n, rng, labels)
    tags = [rng.randrange(len(vocab.tags)) for _ in range(n)]
    words = [rng.randrange(len(vocab)) for _ in range(n)]
    return Derivation(words, tags, seq[1:])


# -- specs ------------------------------------------------------------------------


def test_default_spec_orders():
    specs = default_specs()
    assert specs["transition"].elements == TRANSITION_ELEMENTS
    assert specs["tag"].elements == TRANSITION_ELEMENTS
    assert specs["word"].elements == WORD_ELEMENTS


def test_unlexicalised_specs_drop_word_elements():
    specs = default_specs(lexicalised=False)
    assert specs["transition"].elements == TRANSITION_ELEMENTS[:6]
    assert specs["word"].elements == ("b.t", "s1.t", "rc1(s1).t", "lc1(s1).t")


def test_restricted_specs_keep_prefix():
    specs = default_specs(elements=4)
    assert specs["transition"].elements == ("s1.t", "s2.t", "rc1(s1).t", "lc1(s1).t")
    assert specs["word"].elements == ("b.t", "s1.t", "rc1(s1).t", "lc1(s1).t")
    assert default_specs(elements=2)["word"].elements == ("b.t", "s1.t")


def test_spec_validation():
    with pytest.raises(ValueError):
        ContextSpec("transition", ("nope",))
    with pytest.raises(ValueError):
        ContextSpec("word", ("s1.t",))
    with pytest.raises(ValueError):
        ContextSpec("tag", ("b.t", "s1.t"))
    with pytest.raises(ValueError):
        ContextSpec("other", ())


# -- dishes ------------------------------------------------------------------------


def test_transition_dish_round_trip():
    model = GenerativeModel(tiny_vocab(labels=3))
    assert model.num_transitions == 7
    for dish in range(7):
        assert model.transition_id(model.transition_of(dish)) == dish
    assert model.transition_id(Transition(RIGHT_ARC, 2)) == 6
    with pytest.raises(ValueError):
        model.transition_id(Transition(LEFT_ARC, 3))


def test_unlabelled_model_ignores_labels():
    model = GenerativeModel(tiny_vocab(labels=3), predict_labels=False)
    assert model.num_transitions == 3
    assert model.transition_id(Transition(LEFT_ARC, 2)) == 1
    assert model.transition_of(2) == Transition(RIGHT_ARC, None)


# -- contexts ----------------------------------------------------------------------


def test_atoms_hand_example():
    vocab = tiny_vocab(tags=3)
    model = GenerativeModel(vocab)
    n = 3
    c = apply(initial_configuration(), SH, n)
    nt, nw = model.null_tag, model.null_word
    assert model.atoms(c) == (nt, nt, nt, nt, nt, nt, nw, nw)
    c = apply(c, SH, n, tag=1, word=2)
    c = apply(c, SH, n, tag=2, word=0)
    c = apply(c, Transition.left(0), n)
    # stack [0, 2]; word 2 (tag 2) has left child 1 (tag 1)
    assert model.atoms(c) == (2, nt, nt, 1, nt, nt, 0, nw)
    c = apply(c, SH, n, tag=0, word=3)
    assert model.atoms(c) == (0, 2, nt, nt, nt, nt, 3, 0)
    c = apply(c, Transition.right(0), n)
    assert model.atoms(c) == (2, nt, 0, 1, nt, nt, 0, nw)
    word_ctx = model.extract_context("word", c, tag=1)
    assert word_ctx == (1, 2, 0, 1, 0, nw)
    with pytest.raises(ValueError):
        model.extract_context("word", c)


def test_context_back_off_is_tail_truncation():
    rng = random.Random(0)
    model, _ = random_model(rng, sentences=10)
    for tree in model.trees().values():
        for k in range(1, tree.depth + 1):
            for key in tree.levels[k]:
                assert key[:-1] in tree.levels[k - 1]
                assert len(key) == k


# -- normalisation -------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_distributions_normalised_along_derivations(seed):
    rng = random.Random(seed)
    model, _ = random_model(rng, sentences=rng.randint(1, 6), predict_labels=rng.random() < 0.5)
    n = rng.randint(1, 7)
    d = random_full_derivation(model.vocab, n, rng)
    c = apply(initial_configuration(), SH, n)
    i = 0
    for t in d.transitions:
        for regime in (n, None):
            dist = model.transition_distribution(c, regime)
            assert math.fsum(dist) == pytest.approx(1.0, abs=1e-9)
            mask = model.legal_mask(legal_kinds(c, regime))
            assert all(p == 0.0 for p, ok in zip(dist, mask) if not ok)
        assert math.fsum(model.tag_distribution(c)) == pytest.approx(1.0, abs=1e-9)
        tag = rng.randrange(model.num_tags)
        words = math.fsum(model.word_probability(c, tag, w) for w in range(model.num_words))
        assert words == pytest.approx(1.0, abs=1e-9)
        if t.kind == 0:
            c = apply(c, t, n, d.tags[i], d.words[i])
            i += 1
        else:
            c = apply(c, t, n)


def test_known_length_distribution_sums_to_one():
    # Summing the joint over every word string, tagging and derivation of a
    # fixed length gives 1 when transitions are renormalised for that length.
    rng = random.Random(5)
    model, _ = random_model(rng, sentences=6)
    oracle = OracleScorer(model)
    for n in (1, 2):
        total = 0.0
        for words in itertools.product(range(model.num_words), repeat=n):
            lp, _ = oracle.search(list(words), model.num_tags, best_only=False)
            total += math.exp(lp)
        assert total == pytest.approx(1.0, abs=1e-9)


def test_generative_regime_stop_mass():
    # Generatively the probability of all one-word sentences is below one.
    rng = random.Random(6)
    model, _ = random_model(rng, sentences=6)
    oracle = OracleScorer(model)
    total = sum(
        math.exp(oracle.search([w], model.num_tags, generative=True, best_only=False)[0])
        for w in range(model.num_words)
    )
    assert 0.0 < total < 1.0


# -- joint probability -------------------------------------------------------------------


@pytest.mark.parametrize(
    "model_args",
    [
        {},
        {"predict_labels": True},
        {"lexicalised": False},
        {"lexicalised": False, "word_model": False},
        {"specs": default_specs(elements=3)},
    ],
)
def test_joint_log_probability_matches_oracle(model_args):
    rng = random.Random(7)
    vocab = tiny_vocab(labels=2)
    model, _ = random_model(rng, vocab, sentences=8, **model_args)
    oracle = OracleScorer(model)
    for _ in range(40):
        n = rng.randint(1, 6)
        d = random_full_derivation(vocab, n, rng, labels=2 if model.predict_labels else 1)
        for generative in (False, True):
            expected = oracle.joint_log_prob(d.words, d.tags, to_pairs(d.transitions), generative)
            assert model.joint_log_probability(d, generative) == pytest.approx(expected, abs=1e-9)


def test_joint_rejects_bad_derivations():
    model = GenerativeModel(tiny_vocab())
    with pytest.raises(ValueError):
        model.joint_log_probability(Derivation([0, 1], [0, 0], [SH, SH]))
    with pytest.raises(ValueError):
        model.joint_log_probability(Derivation([0], [0, 1], [SH, Transition.right(0)]))
    with pytest.raises(ValueError):
        model.joint_log_probability(Derivation([0], [0], [SH, SH, Transition.right(0)]))


def test_untrained_model_is_uniform_per_event():
    vocab = tiny_vocab(words=4, tags=2, labels=1)
    model = GenerativeModel(vocab, predict_labels=False)
    # one word: sh (p=1, only legal), tag 1/2, word 1/5, ra (forced) p=1
    d = Derivation([1], [0], [SH, Transition.right(0)])
    assert model.joint_log_probability(d) == pytest.approx(math.log(0.5 * 0.2), abs=1e-12)


def test_unlexicalised_ignores_word_identity():
    rng = random.Random(8)
    vocab = tiny_vocab()
    model, _ = random_model(rng, vocab, sentences=10, lexicalised=False)
    perm = list(range(len(vocab)))
    rng.shuffle(perm)
    for _ in range(30):
        d = random_full_derivation(vocab, rng.randint(1, 6), rng)
        permuted = Derivation([perm[w] for w in d.words], d.tags, d.transitions)
        base = list(model.events(d, d.n))
        other = list(model.events(permuted, d.n))
        for (k1, c1, x1, *_), (k2, c2, x2, *_) in zip(base, other):
            if k1 != "word":
                assert (c1, x1) == (c2, x2)
            else:
                assert c1 == c2
        no_words = GenerativeModel(vocab, lexicalised=False, word_model=False)
        assert no_words.joint_log_probability(d) == no_words.joint_log_probability(permuted)


# -- observe / forget ---------------------------------------------------------------------


def test_observe_forget_restores_every_restaurant():
    rng = random.Random(9)
    model, corpus = random_model(rng, sentences=6)
    before = {k: t.snapshot() for k, t in model.trees().items()}
    d = derivation_of(random_sentence(model.vocab, 5, rng))
    obs = model.observe(d, rng)
    assert len(obs.transitions) == 10 and len(obs.tags) == 5 and len(obs.words) == 5
    model.forget(obs)
    assert {k: t.snapshot() for k, t in model.trees().items()} == before


def test_observe_twice_counts_two():
    vocab = tiny_vocab()
    model = GenerativeModel(vocab, predict_labels=False)
    rng = random.Random(0)
    d = Derivation([0, 1], [0, 1], [SH, SH, Transition.left(0), Transition.right(0)])
    model.observe(d, rng)
    model.observe(d, rng)
    for kind, ctx, dish, _, _ in model.events(d, 2):
        rest = model.trees()[kind].levels[len(ctx)][ctx]
        assert rest.counts(dish)[0] >= 2
    assert model.total_customers() > 0


def test_observe_parts_restricts_trees():
    vocab = tiny_vocab()
    model = GenerativeModel(vocab)
    d = Derivation([0], [0], [SH, Transition.right(0)])
    model.observe(d, random.Random(0), parts=("word",))
    assert model.transitions.is_empty() and model.tags.is_empty()
    assert not model.words.is_empty()


def test_observe_log_prob_is_raw_seating_probability():
    vocab = tiny_vocab()
    model = GenerativeModel(vocab)
    d = Derivation([0], [1], [SH, Transition.right(0)])
    obs = model.observe(d, random.Random(0))
    # raw seating probabilities, before legality renormalisation:
    # sh 1/3, tag 1/2, word 1/5; ra meets the shift's table in the empty
    # context: (1 + .5) / 2 * 1/3 = 1/4
    assert obs.log_prob == pytest.approx(math.log(1 / 3 * 1 / 2 * 1 / 5 * 1 / 4), abs=1e-12)
    assert model.joint_log_probability(d) > obs.log_prob


def test_observing_changes_held_out_probability():
    rng = random.Random(10)
    vocab = tiny_vocab()
    model = GenerativeModel(vocab, predict_labels=False)
    held = derivation_of(random_sentence(vocab, 4, rng))
    before = model.joint_log_probability(held)
    for _ in range(5):
        model.observe(derivation_of(random_sentence(vocab, 4, rng)), rng)
    assert model.joint_log_probability(held) != before


def test_forget_stale_observation_raises():
    model = GenerativeModel(tiny_vocab())
    d = Derivation([0], [0], [SH, Transition.right(0)])
    obs = model.observe(d, random.Random(0))
    model.forget(obs)
    with pytest.raises(Exception):
        model.forget(obs)


def test_derivation_helpers():
    d = Derivation([3, 1], [0, 1], [SH, SH, Transition.left(0), Transition.right(0)])
    assert d.n == 2
    assert d.shift_offsets == [1, 2]
    assert d.tree().heads == [-1, 2, 0]
    assert d.full_transitions()[0] == SH

