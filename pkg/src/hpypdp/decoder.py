"""Particle-filter beam decoder, exhaustive enumeration and ancestral generation.

The beam holds partial derivations, each carrying a particle count and a log
weight (the joint log probability of everything generated so far).  One pass
per word advances every derivation up to and including the shift of that
word: particles are split between shifting and the best reduce, reduced
derivations re-enter the pass, and shifted ones wait for the selection step.

Two probability regimes are involved.  Particles are always divided with
transition probabilities renormalised given the sentence length.  Weights use
the same regime by default; with ``generative_scoring`` they use the
open-ended regime instead, which makes the final root attachment a scored
stop decision and the beam sum a proper language-model probability.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

from scipy.special import logsumexp

from .model import Derivation, GenerativeModel
from .transition import (
    SH,
    SHIFT,
    Configuration,
    Transition,
    apply,
    initial_configuration,
    is_terminal,
    legal_kinds,
)

BEST_ONE = "best-one"
BEST_LEFT_AND_RIGHT = "best-left-and-right"

# A constraint maps a configuration to the transitions allowed there.
Constraint = Callable[[Configuration], Sequence[Transition]]


class DecodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class DecodeSettings:
    particles: int = 1000
    max_tag_candidates: int = 3
    tags_provided: bool = False
    reduce_branching: str = BEST_ONE
    generative_scoring: bool = False

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be at least 1")
        if self.max_tag_candidates < 1:
            raise ValueError("max_tag_candidates must be at least 1")
        if self.reduce_branching not in (BEST_ONE, BEST_LEFT_AND_RIGHT):
            raise ValueError(f"unknown reduce branching {self.reduce_branching!r}")


class _Link(NamedTuple):
    item: object
    prev: "_Link | None"


def _unlink(link: _Link | None) -> list:
    out = []
    while link is not None:
        out.append(link.item)
        link = link.prev
    out.reverse()
    return out


class BeamEntry:
    """A partial derivation with its particle count and log weight."""

    __slots__ = ("config", "particles", "log_weight", "_history", "_tags")

    def __init__(self, config, particles, log_weight, history=None, tags=None):
        self.config: Configuration = config
        self.particles: int = particles
        self.log_weight: float = log_weight
        self._history: _Link | None = history
        self._tags: _Link | None = tags

    @property
    def transitions(self) -> list[Transition]:
        return _unlink(self._history)

    @property
    def tags(self) -> list[int]:
        return _unlink(self._tags)

    def key(self) -> tuple:
        return (tuple(self.tags), tuple(self.transitions))

    def derivation(self, words: Sequence[int]) -> Derivation:
        return Derivation(list(words), self.tags, self.transitions)

    def __repr__(self) -> str:
        return f"BeamEntry(k={self.particles}, logw={self.log_weight:.4f}, {self.transitions})"


@dataclass
class ParseResult:
    words: list[int]
    best: BeamEntry
    beam: list[BeamEntry]
    transitions_executed: int

    @property
    def derivation(self) -> Derivation:
        return self.best.derivation(self.words)

    @property
    def log_weight(self) -> float:
        return self.best.log_weight

    def marginal_log_prob(self) -> float:
        return marginal_log_prob(self.beam)


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def apportion(total: int, weights: Sequence[float]) -> list[int]:
    """Split ``total`` proportionally to ``weights`` by largest remainder.

    Ties go to the earlier index; the result always sums to ``total``.
    """
    s = sum(weights)
    if total <= 0 or s <= 0:
        return [0] * len(weights)
    shares = [total * w / s for w in weights]
    counts = [int(math.floor(x)) for x in shares]
    left = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(shares[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


def split_particles(
    k: int, shift_p: float | None, reduce_ps: Sequence[float], renormalise: bool = False
) -> tuple[int, list[int]]:
    """Divide ``k`` particles between shifting and the reduce branches.

    The shift gets round(k * p(sh)) and the reduces share the rest
    proportionally.  With ``renormalise`` the shift share is taken relative
    to the moves on offer rather than to the full distribution.
    """
    if shift_p is None:
        n_shift = 0
    elif not reduce_ps:
        n_shift = k
    elif renormalise:
        n_shift = round_half_away(k * shift_p / (shift_p + sum(reduce_ps)))
    else:
        n_shift = round_half_away(k * shift_p)
    return n_shift, apportion(k - n_shift, reduce_ps)


def selection_step(beam: list[BeamEntry], K: int) -> list[BeamEntry]:
    """Reallocate K particles proportionally to k * weight and drop zero-particle entries.

    If flooring would eliminate every entry, the best one keeps a single particle.
    """
    if not beam:
        raise DecodeError("selection on an empty beam")
    live = [e for e in beam if e.particles > 0]
    if not live:
        raise DecodeError("selection with no particles left")
    top = max(e.log_weight for e in live)
    mass = [e.particles * math.exp(e.log_weight - top) for e in live]
    total = sum(mass)
    kept = []
    for e, m in zip(live, mass):
        k = int(math.floor(m / total * K))
        if k > 0:
            e.particles = k
            kept.append(e)
    if not kept:
        best = max(range(len(live)), key=lambda i: (mass[i], -i))
        live[best].particles = 1
        kept = [live[best]]
    return kept


def marginal_log_prob(beam: Sequence[BeamEntry]) -> float:
    """log of the summed weights of the distinct derivations in ``beam``."""
    if not beam:
        raise DecodeError("marginal of an empty beam")
    seen = {}
    for e in beam:
        seen.setdefault(e.key(), e.log_weight)
    return float(logsumexp(list(seen.values())))


class _Scorer:
    """Per-sentence memo of transition and tag/word scores."""

    def __init__(self, model: GenerativeModel, n: int, generative: bool):
        self.model = model
        self.n = n
        self.generative = generative
        self._trans: dict = {}
        self._tagword: dict = {}

    def transitions(self, c: Configuration, atoms: tuple) -> tuple[list[float], list[float]]:
        """(split probabilities, scoring probabilities) over all transition dishes."""
        m = self.model
        ctx = m.context("transition", atoms)
        flags = legal_kinds(c, self.n)
        gflags = legal_kinds(c, None) if self.generative else flags
        key = (ctx, flags, gflags)
        hit = self._trans.get(key)
        if hit is None:
            raw = m.transitions.distribution(ctx)
            split = m.renormalize(raw, flags)
            score = m.renormalize(raw, gflags) if self.generative else split
            hit = self._trans[key] = (split, score)
        return hit

    def tag_word(self, atoms: tuple, word: int) -> list[float]:
        """p(t | h^t) * p(w | t, h^w) for every tag t."""
        key = (atoms, word)
        hit = self._tagword.get(key)
        if hit is None:
            m = self.model
            ptag = m.tags.distribution(m.context("tag", atoms))
            if not m.word_model:
                self._tagword[key] = ptag
                return ptag
            hit = [
                pt * m.words.predictive_probability(m.context("word", atoms, t), word) if pt > 0 else 0.0
                for t, pt in enumerate(ptag)
            ]
            self._tagword[key] = hit
        return hit


def _start(K: int) -> BeamEntry:
    return BeamEntry(apply(initial_configuration(), SH), K, 0.0)


def particle_parse(
    model: GenerativeModel,
    words: Sequence[int],
    tags: Sequence[int] | None = None,
    settings: DecodeSettings | None = None,
    constraint: Constraint | None = None,
) -> ParseResult:
    """Decode ``words`` with the particle beam.

    ``constraint``, if given, restricts every step to the returned
    transitions (used to sample derivations of a known tree); particles are
    then split over the allowed moves proportionally to their probabilities.
    """
    s = settings or DecodeSettings()
    n = len(words)
    if n == 0:
        raise ValueError("cannot decode an empty sentence")
    if s.tags_provided != (tags is not None):
        raise ValueError("tags must be given exactly when tags_provided is set")
    if tags is not None and len(tags) != n:
        raise ValueError("tags and words differ in length")
    K = s.particles
    scorer = _Scorer(model, n, s.generative_scoring)
    executed = 0
    beam = [_start(K)]

    for i in range(n):
        word = words[i]
        queue = list(beam)
        shifted: list[BeamEntry] = []
        q = 0
        while q < len(queue):
            e = queue[q]
            q += 1
            c = e.config
            atoms = model.atoms(c)
            split, score = scorer.transitions(c, atoms)
            shift_p, reduces = _options(model, c, split, s, constraint)
            n_shift, n_reduces = split_particles(
                e.particles, shift_p, [p for _, p in reduces], renormalise=constraint is not None
            )
            if reduces:
                for (dish, _), k in zip(reduces, n_reduces):
                    if k == 0:
                        continue
                    t = model.transition_of(dish)
                    if constraint is not None:
                        t = _match(constraint(c), t)
                    queue.append(
                        BeamEntry(
                            apply(c, t, n),
                            k,
                            e.log_weight + math.log(score[dish]),
                            _Link(t, e._history),
                            e._tags,
                        )
                    )
                    executed += 1
            if n_shift > 0:
                base = e.log_weight + math.log(score[0])
                history = _Link(SH, e._history)
                tw = scorer.tag_word(atoms, word)
                if tags is not None:
                    cands = [(tags[i], n_shift)]
                else:
                    top = sorted(range(len(tw)), key=lambda t: (-tw[t], t))[: s.max_tag_candidates]
                    top = [t for t in top if tw[t] > 0]
                    cands = list(zip(top, apportion(n_shift, [tw[t] for t in top])))
                for tag, k in cands:
                    if k == 0:
                        continue
                    shifted.append(
                        BeamEntry(
                            apply(c, SH, n, tag, word), k, base + math.log(tw[tag]), history, _Link(tag, e._tags)
                        )
                    )
                    executed += 1
        if not shifted:
            raise DecodeError(f"no derivation survived the shift of word {i + 1}")
        beam = selection_step(shifted, K)

    final = []
    for e in beam:
        while not is_terminal(e.config, n):
            c = e.config
            split, score = scorer.transitions(c, model.atoms(c))
            _, reduces = _options(model, c, split, s, constraint, best_only=True)
            if not reduces:
                raise DecodeError(f"no reduce available in {c!r}")
            dish = reduces[0][0]
            t = model.transition_of(dish)
            if constraint is not None:
                t = _match(constraint(c), t)
            e = BeamEntry(apply(c, t, n), e.particles, e.log_weight + math.log(score[dish]), _Link(t, e._history), e._tags)
            executed += 1
        final.append(e)
    best = max(final, key=lambda e: e.log_weight)
    return ParseResult(list(words), best, final, executed)


def _match(allowed: Sequence[Transition], t: Transition) -> Transition:
    """The allowed transition with ``t``'s kind (keeps its label in unlabelled models)."""
    for a in allowed:
        if a.kind == t.kind:
            return a
    raise DecodeError(f"{t!r} not among {allowed!r}")


def _options(
    model: GenerativeModel,
    c: Configuration,
    split: list[float],
    s: DecodeSettings,
    constraint: Constraint | None,
    best_only: bool = False,
) -> tuple[float | None, list[tuple[int, float]]]:
    """Shift probability (None if not allowed) and the reduce branches to try."""
    if constraint is not None:
        allowed = constraint(c)
        shift_p = split[0] if any(t.kind == SHIFT for t in allowed) and split[0] > 0 else None
        reduces = [
            (model.transition_id(t), split[model.transition_id(t)])
            for t in allowed
            if t.kind != SHIFT
        ]
        reduces = [(d, p) for d, p in reduces if p > 0]
        return shift_p, reduces
    shift_p = split[0] if split[0] > 0 else None
    L = model.num_labels
    left = max(range(1, L + 1), key=lambda d: (split[d], -d))
    right = max(range(L + 1, 2 * L + 1), key=lambda d: (split[d], -d))
    cands = [(d, split[d]) for d in (left, right) if split[d] > 0]
    if best_only or s.reduce_branching == BEST_ONE:
        cands = sorted(cands, key=lambda x: (-x[1], x[0]))[:1]
    return shift_p, cands


def parse_derivation(model: GenerativeModel, words, tags=None, settings: DecodeSettings | None = None) -> Derivation:
    return particle_parse(model, words, tags, settings).derivation


# -- exhaustive enumeration (small inputs only) ----------------------------


def enumerate_derivations(
    model: GenerativeModel,
    words: Sequence[int],
    tags: Sequence[int] | None = None,
    generative: bool = False,
) -> list[BeamEntry]:
    """Every legal labelled derivation (and tag sequence, unless given) with its exact weight."""
    n = len(words)
    if n == 0:
        raise ValueError("cannot enumerate an empty sentence")
    scorer = _Scorer(model, n, generative)
    out: list[BeamEntry] = []
    stack = [_start(1)]
    while stack:
        e = stack.pop()
        c = e.config
        if is_terminal(c, n):
            out.append(e)
            continue
        atoms = model.atoms(c)
        split, score = scorer.transitions(c, atoms)
        for dish in range(1, model.num_transitions):
            if split[dish] > 0:
                t = model.transition_of(dish)
                stack.append(
                    BeamEntry(apply(c, t, n), 1, e.log_weight + math.log(score[dish]), _Link(t, e._history), e._tags)
                )
        if split[0] > 0:
            i = c.buffer - 1
            tw = scorer.tag_word(atoms, words[i])
            options = [tags[i]] if tags is not None else range(model.num_tags)
            for tag in options:
                if tw[tag] > 0:
                    stack.append(
                        BeamEntry(
                            apply(c, SH, n, tag, words[i]),
                            1,
                            e.log_weight + math.log(score[0]) + math.log(tw[tag]),
                            _Link(SH, e._history),
                            _Link(tag, e._tags),
                        )
                    )
    return out


# -- generation -------------------------------------------------------------


@dataclass
class GeneratedSentence:
    derivation: Derivation
    log_prob: float  # log probability of the sampled events
    truncated: bool  # termination was forced at the length limit


def _categorical(probs: Sequence[float], rng: random.Random) -> int:
    u = rng.random() * sum(probs)
    last = 0
    for i, p in enumerate(probs):
        if p <= 0:
            continue
        last = i
        u -= p
        if u < 0:
            return i
    return last


def generate(model: GenerativeModel, rng: random.Random, max_len: int = 100) -> GeneratedSentence:
    """Ancestral sample of a tagged sentence and its derivation.

    Generation stops when the root takes its dependent.  Once ``max_len``
    words exist, shifting becomes illegal and the remaining reduces are
    sampled from the length-aware distribution.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    c = apply(initial_configuration(), SH)
    words: list[int] = []
    tags: list[int] = []
    transitions: list[Transition] = []
    log_prob = 0.0
    truncated = False
    while not (c.depth == 1 and c.buffer > 1):
        limit = len(words) if len(words) >= max_len else None
        truncated = truncated or limit is not None
        atoms = model.atoms(c)
        probs = model.transition_distribution(c, limit, atoms)
        dish = _categorical(probs, rng)
        t = model.transition_of(dish)
        log_prob += math.log(probs[dish])
        transitions.append(t)
        if t.kind == SHIFT:
            tag = model.tags.sample_dish(model.context("tag", atoms), rng)
            wctx = model.context("word", atoms, tag)
            word = model.words.sample_dish(wctx, rng)
            log_prob += math.log(model.tag_distribution(c, atoms)[tag])
            log_prob += math.log(model.word_probability(c, tag, word, atoms))
            c = apply(c, t, limit, tag, word)
            tags.append(tag)
            words.append(word)
        else:
            c = apply(c, t, limit)
    return GeneratedSentence(Derivation(words, tags, transitions), log_prob, truncated)
