"""Builders for small random models and corpora shared by the tests."""

from __future__ import annotations

import random

from hpypdp.corpus import Sentence, Vocabulary
from hpypdp.model import GenerativeModel
from hpypdp.trainer import TrainSettings, train_supervised
from hpypdp.transition import (
    LEFT_ARC,
    RIGHT_ARC,
    SHIFT,
    DepTree,
    Transition,
    apply,
    derivation_to_tree,
    initial_configuration,
    is_terminal,
    legal_kinds,
    SH,
)


def tiny_vocab(words: int = 4, tags: int = 2, labels: int = 1) -> Vocabulary:
    """At most ``words`` + 1 word ids (one generic unknown class)."""
    return Vocabulary(
        [f"w{i}" for i in range(words)],
        [f"T{i}" for i in range(tags)],
        [f"L{i}" for i in range(labels)],
        min_count=1,
        unknown=("<UNK>",),
    )


def random_derivation(n: int, rng: random.Random, labels: int = 1) -> list[Transition]:
    """A uniformly-stepped random legal derivation, root shift included."""
    c = apply(initial_configuration(), SH, n)
    out = [SH]
    while not is_terminal(c, n):
        kinds = [k for k, ok in zip((SHIFT, LEFT_ARC, RIGHT_ARC), legal_kinds(c, n)) if ok]
        kind = rng.choice(kinds)
        t = Transition(kind, None if kind == SHIFT else rng.randrange(labels))
        c = apply(c, t, n)
        out.append(t)
    return out


def random_tree(n: int, rng: random.Random, labels: int = 1) -> DepTree:
    return derivation_to_tree(random_derivation(n, rng, labels), n)


def random_sentence(vocab: Vocabulary, n: int, rng: random.Random, word_skew: bool = True) -> Sentence:
    """Random words/tags/tree where each tag prefers a couple of words."""
    tags = [rng.randrange(len(vocab.tags)) for _ in range(n)]
    nforms = len(vocab.forms)
    if word_skew:
        words = [(t * 2 + rng.choice([0, 0, 0, 1])) % nforms for t in tags]
    else:
        words = [rng.randrange(nforms) for _ in range(n)]
    return Sentence(words, tags, random_tree(n, rng, len(vocab.labels)))


def random_model(
    rng: random.Random,
    vocab: Vocabulary | None = None,
    sentences: int = 8,
    max_len: int = 6,
    iterations: int = 2,
    predict_labels: bool = False,
    **model_args,
) -> tuple[GenerativeModel, list[Sentence]]:
    vocab = vocab or tiny_vocab()
    model = GenerativeModel(vocab, predict_labels=predict_labels, **model_args)
    corpus = [random_sentence(vocab, rng.randint(1, max_len), rng) for _ in range(sentences)]
    train_supervised(model, corpus, TrainSettings(iterations=iterations, seed=rng.randrange(2**31)))
    return model, corpus
