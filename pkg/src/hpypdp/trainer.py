"""Supervised Gibbs training and unsupervised/semi-supervised refinement."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .corpus import Sentence
from .decoder import BEST_ONE, DecodeSettings, ParseResult, particle_parse
from .model import KINDS, Derivation, GenerativeModel, ObservedDerivation
from .transition import DepTree, GoldIndex, oracle_choices, oracle_derivation

log = logging.getLogger(__name__)

DETERMINISTIC = "deterministic"
SAMPLED = "sampled"
LATENT_SAMPLE = "latent-sample"
VITERBI_SEMISUP = "viterbi-semisup"

Progress = Callable[[dict], None]


@dataclass
class TrainSettings:
    iterations: int = 20
    oracle_mode: str = DETERMINISTIC
    derivation_particles: int = 100
    hyper_resample_every: int | None = None  # 1 when deterministic, 5 when sampled
    seed: int = 0
    shuffle: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.derivation_particles < 1:
            raise ValueError("derivation_particles must be at least 1")
        if self.oracle_mode not in (DETERMINISTIC, SAMPLED):
            raise ValueError(f"unknown oracle mode {self.oracle_mode!r}")
        if self.hyper_resample_every is None:
            self.hyper_resample_every = 1 if self.oracle_mode == DETERMINISTIC else 5
        if self.hyper_resample_every < 1:
            raise ValueError("hyper_resample_every must be at least 1")


@dataclass
class UnsupSettings:
    mode: str = LATENT_SAMPLE
    particles: int = 100
    sweeps: int | None = None  # 1 for viterbi-semisup
    update_word_only: bool | None = None
    hyper_resample_every: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (LATENT_SAMPLE, VITERBI_SEMISUP):
            raise ValueError(f"unknown refinement mode {self.mode!r}")
        if self.update_word_only is None:
            self.update_word_only = self.mode == VITERBI_SEMISUP
        if self.mode == VITERBI_SEMISUP and not self.update_word_only:
            raise ValueError("viterbi-semisup only updates the word distribution")
        if self.sweeps is None:
            self.sweeps = 1
        if self.sweeps < 1 or self.particles < 1:
            raise ValueError("sweeps and particles must be at least 1")


@dataclass
class TrainResult:
    model: GenerativeModel
    observed: list[ObservedDerivation]
    history: list[dict] = field(default_factory=list)


def gold_derivation(sentence: Sentence) -> Derivation:
    """Greedy-oracle derivation of a gold-annotated sentence."""
    if sentence.tree is None or sentence.tags is None:
        raise ValueError("supervised training needs gold trees and tags")
    full = oracle_derivation(sentence.tree, sentence.tags, sentence.words)
    return Derivation(list(sentence.words), list(sentence.tags), full[1:])


def sample_derivation(
    model: GenerativeModel,
    words: Sequence[int],
    tags: Sequence[int],
    gold: DepTree,
    particles: int,
    rng: random.Random,
) -> Derivation:
    """Draw one derivation of ``gold`` from the oracle-constrained particle beam.

    The draw is proportional to the derivation weight over the final beam.
    """
    index = GoldIndex(gold)
    settings = DecodeSettings(particles=particles, tags_provided=True)
    result = particle_parse(model, words, tags, settings, constraint=lambda c: oracle_choices(c, index))
    return _draw(result, rng).derivation(words)


def _draw(result: ParseResult, rng: random.Random):
    beam = result.beam
    top = max(e.log_weight for e in beam)
    weights = [math.exp(e.log_weight - top) for e in beam]
    return rng.choices(beam, weights=weights)[0]


def _resample(model: GenerativeModel, rng: random.Random, parts: Sequence[str] = KINDS) -> dict:
    out = {}
    for kind, tree in model.trees().items():
        if kind in parts:
            h = tree.resample_hyperparameters(rng)
            out[kind] = {"discount": h.discount, "strength": h.strength}
    return out


def train_supervised(
    model: GenerativeModel,
    sentences: Sequence[Sentence],
    settings: TrainSettings | None = None,
    progress: Progress | None = None,
) -> TrainResult:
    """Gibbs-train ``model`` on gold-annotated projective sentences.

    Iteration 1 observes greedy-oracle derivations.  Each later iteration
    removes a sentence's customers and re-observes it, with a freshly sampled
    derivation in sampled mode.
    """
    s = settings or TrainSettings()
    rng = random.Random(s.seed)
    golds = [gold_derivation(sent) for sent in sentences]
    observed: list[ObservedDerivation | None] = [None] * len(sentences)
    history = []
    for it in range(1, s.iterations + 1):
        order = list(range(len(sentences)))
        if s.shuffle:
            rng.shuffle(order)
        loglik = 0.0
        for i in order:
            if observed[i] is not None:
                model.forget(observed[i])
            if it == 1 or s.oracle_mode == DETERMINISTIC:
                d = golds[i]
            else:
                sent = sentences[i]
                d = sample_derivation(model, sent.words, sent.tags, sent.tree, s.derivation_particles, rng)
            observed[i] = model.observe(d, rng)
            loglik += observed[i].log_prob
        record = {"iteration": it, "log_likelihood": loglik, "sentences": len(sentences)}
        if it % s.hyper_resample_every == 0:
            record["hyperparameters"] = _resample(model, rng)
        history.append(record)
        log.info("iteration %d log-likelihood %.3f", it, loglik)
        if progress is not None:
            progress(record)
    return TrainResult(model, observed, history)


def train_unsupervised(
    model: GenerativeModel,
    sentences: Sequence[Sequence[int]],
    settings: UnsupSettings | None = None,
    previous: list[ObservedDerivation | None] | None = None,
    progress: Progress | None = None,
) -> TrainResult:
    """Refine a trained model on word-only sentences.

    ``latent-sample`` runs particle Gibbs: each sweep removes a sentence's
    previous derivation (if any), decodes it, samples a derivation from the
    final beam and observes it.  ``viterbi-semisup`` observes the word
    events of the best derivation only, leaving transitions and tags intact.
    ``previous`` holds traces for the same sentences from an earlier call.
    """
    u = settings or UnsupSettings()
    rng = random.Random(u.seed)
    parts = ("word",) if u.update_word_only else KINDS
    decode = DecodeSettings(particles=u.particles, reduce_branching=BEST_ONE)
    observed: list[ObservedDerivation | None] = list(previous) if previous is not None else [None] * len(sentences)
    if len(observed) != len(sentences):
        raise ValueError("previous traces do not match the corpus")
    history = []
    for sweep in range(1, u.sweeps + 1):
        loglik = 0.0
        for i, words in enumerate(sentences):
            if not words:
                continue
            if observed[i] is not None:
                model.forget(observed[i])
                observed[i] = None
            result = particle_parse(model, words, settings=decode)
            if u.mode == LATENT_SAMPLE:
                d = _draw(result, rng).derivation(words)
            else:
                d = result.derivation
            observed[i] = model.observe(d, rng, parts)
            loglik += observed[i].log_prob
        record = {"sweep": sweep, "mode": u.mode, "log_likelihood": loglik, "sentences": len(sentences)}
        if u.mode == LATENT_SAMPLE and sweep % u.hyper_resample_every == 0:
            record["hyperparameters"] = _resample(model, rng, parts)
        history.append(record)
        if progress is not None:
            progress(record)
    return TrainResult(model, observed, history)
