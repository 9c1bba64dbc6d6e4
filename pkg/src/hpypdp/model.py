"""Joint generative model over transitions, POS tags and words.

Three HPYPs share one configuration-derived context vocabulary:

* transitions ``p(a | h^a)``: dishes are ``sh``, ``la_l``, ``ra_l``;
* tags ``p(t | h^t)``, scored at the shift decision point;
* words ``p(w | t, h^w)``, whose context starts with the tag just generated.

Context keys are tuples of ids, most informative element first, so dropping
the tail gives the back-off parent.  Missing elements (empty stack slot, no
child, the root's tag/word) map to a null tag/word id one past the inventory.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

from .corpus import Vocabulary
from .hpyp import HpypTree, Trace
from .transition import (
    LEFT_ARC,
    RIGHT_ARC,
    SH,
    SHIFT,
    Configuration,
    DepTree,
    Transition,
    apply,
    derivation_to_tree,
    initial_configuration,
    is_terminal,
    legal_kinds,
)

TRANSITION_ELEMENTS = ("s1.t", "s2.t", "rc1(s1).t", "lc1(s1).t", "s3.t", "rc1(s2).t", "s1.w", "s2.w")
WORD_ELEMENTS = ("b.t", "s1.t", "rc1(s1).t", "lc1(s1).t", "s1.w", "s2.w")

# Position of each element in the tuple built by GenerativeModel.atoms().
_ATOM = {
    "s1.t": 0,
    "s2.t": 1,
    "rc1(s1).t": 2,
    "lc1(s1).t": 3,
    "s3.t": 4,
    "rc1(s2).t": 5,
    "s1.w": 6,
    "s2.w": 7,
    "b.t": 8,
}
KINDS = ("transition", "tag", "word")


def is_word_element(name: str) -> bool:
    return name.endswith(".w")


@dataclass(frozen=True)
class ContextSpec:
    kind: str
    elements: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown context kind {self.kind!r}")
        unknown = [e for e in self.elements if e not in _ATOM]
        if unknown:
            raise ValueError(f"unknown context elements {unknown}")
        if self.kind == "word" and self.elements[:1] != ("b.t",):
            raise ValueError("word contexts must start with b.t")
        if self.kind != "word" and "b.t" in self.elements:
            raise ValueError("b.t is only available to the word distribution")

    def unlexicalised(self) -> "ContextSpec":
        return ContextSpec(self.kind, tuple(e for e in self.elements if not is_word_element(e)))


def default_specs(lexicalised: bool = True, elements: int | Sequence[str] | None = None) -> dict[str, ContextSpec]:
    """Context specs for the three distributions.

    ``elements`` restricts the transition/tag contexts to the first k of the
    standard list (or an explicit list); the word context keeps its own
    order and drops whatever the restriction removed.
    """
    if elements is None:
        chosen = TRANSITION_ELEMENTS
    elif isinstance(elements, int):
        chosen = TRANSITION_ELEMENTS[:elements]
    else:
        chosen = tuple(elements)
    specs = {
        "transition": ContextSpec("transition", tuple(chosen)),
        "tag": ContextSpec("tag", tuple(chosen)),
        "word": ContextSpec("word", ("b.t",) + tuple(e for e in WORD_ELEMENTS[1:] if e in chosen)),
    }
    if not lexicalised:
        specs = {k: s.unlexicalised() for k, s in specs.items()}
    return specs


class ObservedDerivation(NamedTuple):
    transitions: list[Trace]
    tags: list[Trace]
    words: list[Trace]
    log_prob: float  # sum of log predictive probs as the customers were seated


@dataclass
class Derivation:
    """Words, tags and the transitions after the (unscored) root shift."""

    words: list[int]
    tags: list[int]
    transitions: list[Transition] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.words)

    @property
    def shift_offsets(self) -> list[int]:
        """m_i: transitions performed before word i is generated (root shift counted)."""
        out = []
        for j, t in enumerate(self.transitions, 1):
            if t.kind == SHIFT:
                out.append(j)
        return out

    def full_transitions(self) -> list[Transition]:
        return [SH, *self.transitions]

    def tree(self) -> DepTree:
        return derivation_to_tree(self.full_transitions(), self.n)

    def key(self) -> tuple:
        return (tuple(self.tags), tuple(self.transitions))


class GenerativeModel:
    def __init__(
        self,
        vocab: Vocabulary,
        lexicalised: bool = True,
        predict_labels: bool = True,
        specs: dict[str, ContextSpec] | None = None,
        word_model: bool = True,
    ):
        self.vocab = vocab
        self.lexicalised = lexicalised
        self.predict_labels = predict_labels
        # Without a word model only tags and transitions are generated.
        self.word_model = word_model
        if specs is None:
            specs = default_specs(lexicalised)
        elif not lexicalised:
            specs = {k: s.unlexicalised() for k, s in specs.items()}
        self.specs = specs
        self.num_tags = len(vocab.tags)
        self.num_words = len(vocab)
        self.num_labels = len(vocab.labels) if predict_labels else 1
        if self.num_tags < 1 or self.num_labels < 1:
            raise ValueError("model needs at least one tag and one label")
        self.null_tag = self.num_tags
        self.null_word = self.num_words
        self.transitions = HpypTree(1 + 2 * self.num_labels, len(specs["transition"].elements))
        self.tags = HpypTree(self.num_tags, len(specs["tag"].elements))
        self.words = HpypTree(self.num_words, len(specs["word"].elements))
        self._idx = {k: tuple(_ATOM[e] for e in s.elements) for k, s in specs.items()}

    # -- dish encoding ----------------------------------------------------

    @property
    def num_transitions(self) -> int:
        return 1 + 2 * self.num_labels

    def transition_id(self, t: Transition) -> int:
        if t.kind == SHIFT:
            return 0
        label = (t.label or 0) if self.predict_labels else 0
        if not 0 <= label < self.num_labels:
            raise ValueError(f"label {t.label} outside inventory")
        return 1 + label + (self.num_labels if t.kind == RIGHT_ARC else 0)

    def transition_of(self, dish: int) -> Transition:
        if dish == 0:
            return SH
        label = (dish - 1) % self.num_labels
        kind = LEFT_ARC if dish <= self.num_labels else RIGHT_ARC
        return Transition(kind, label if self.predict_labels else None)

    def dish_kind(self, dish: int) -> int:
        if dish == 0:
            return SHIFT
        return LEFT_ARC if dish <= self.num_labels else RIGHT_ARC

    # -- contexts ---------------------------------------------------------

    def atoms(self, c: Configuration) -> tuple:
        nt, nw = self.null_tag, self.null_word
        s1 = c.top
        if s1 is None:
            return (nt, nt, nt, nt, nt, nt, nw, nw)
        s2 = s1.below
        s1t = nt if s1.tag is None else s1.tag
        s1w = nw if s1.word is None else s1.word
        rc1 = nt if s1.right_tag is None else s1.right_tag
        lc1 = nt if s1.left_tag is None else s1.left_tag
        if s2 is None:
            return (s1t, nt, rc1, lc1, nt, nt, s1w, nw)
        s3 = s2.below
        return (
            s1t,
            nt if s2.tag is None else s2.tag,
            rc1,
            lc1,
            nt if s3 is None or s3.tag is None else s3.tag,
            nt if s2.right_tag is None else s2.right_tag,
            s1w,
            nw if s2.word is None else s2.word,
        )

    def context(self, kind: str, atoms: tuple, tag: int | None = None) -> tuple:
        if kind == "word":
            full = atoms + (tag,)
            return tuple(full[i] for i in self._idx["word"])
        return tuple(atoms[i] for i in self._idx[kind])

    def extract_context(self, kind: str, c: Configuration, tag: int | None = None) -> tuple:
        """Context key of ``kind`` at ``c``; word contexts need the tag of the word at the buffer."""
        if kind == "word" and tag is None:
            raise ValueError("word context needs the tag of the buffer word")
        return self.context(kind, self.atoms(c), tag)

    # -- distributions ----------------------------------------------------

    def legal_mask(self, flags: tuple[bool, bool, bool]) -> list[bool]:
        sh, la, ra = flags
        L = self.num_labels
        return [sh] + [la] * L + [ra] * L

    def renormalize(self, raw: Sequence[float], flags: tuple[bool, bool, bool]) -> list[float]:
        sh, la, ra = flags
        L = self.num_labels
        out = [raw[0] if sh else 0.0]
        out += raw[1 : L + 1] if la else [0.0] * L
        out += raw[L + 1 :] if ra else [0.0] * L
        total = sum(out)
        if total <= 0.0:
            raise ValueError("no legal transition")
        return [p / total for p in out]

    def transition_distribution(self, c: Configuration, n: int | None, atoms: tuple | None = None) -> list[float]:
        """p(a | h^a) over all transition dishes, renormalised over the legal ones."""
        if atoms is None:
            atoms = self.atoms(c)
        raw = self.transitions.distribution(self.context("transition", atoms))
        return self.renormalize(raw, legal_kinds(c, n))

    def tag_distribution(self, c: Configuration, atoms: tuple | None = None) -> list[float]:
        if atoms is None:
            atoms = self.atoms(c)
        return self.tags.distribution(self.context("tag", atoms))

    def word_probability(self, c: Configuration, tag: int, word: int, atoms: tuple | None = None) -> float:
        if not self.word_model:
            return 1.0
        if atoms is None:
            atoms = self.atoms(c)
        return self.words.predictive_probability(self.context("word", atoms, tag), word)

    # -- derivations ------------------------------------------------------

    def events(self, d: Derivation, n: int | None) -> Iterator[tuple]:
        """Replay ``d`` yielding (kind, context, dish, config, word index) per scored event.

        Raises ValueError if the derivation is illegal or stops short of a
        terminal configuration.
        """
        words, tags = d.words, d.tags
        if len(tags) != len(words):
            raise ValueError("derivation has mismatched words and tags")
        c = apply(initial_configuration(), SH, n)
        i = 0
        for t in d.transitions:
            if not legal_kinds(c, n)[t.kind]:
                raise ValueError(f"illegal transition {t!r} in {c!r}")
            atoms = self.atoms(c)
            yield "transition", self.context("transition", atoms), self.transition_id(t), c, i
            if t.kind == SHIFT:
                if i >= len(words):
                    raise ValueError("derivation shifts past the last word")
                tag, word = tags[i], words[i]
                yield "tag", self.context("tag", atoms), tag, c, i
                if self.word_model:
                    yield "word", self.context("word", atoms, tag), word, c, i
                c = apply(c, t, n, tag, word)
                i += 1
            else:
                c = apply(c, t, n)
        if i != len(words) or not is_terminal(c, None if n is None else len(words)):
            raise ValueError("derivation does not reach a terminal configuration")

    def joint_log_probability(self, d: Derivation, generative: bool = False) -> float:
        """log p(tags, words, transitions).

        With ``generative=False`` transition probabilities are renormalised
        given the sentence length (parsing); with ``generative=True`` they are
        renormalised as in open-ended generation, so the final right-arc onto
        the root is a scored stop decision.
        """
        n = None if generative else d.n
        total = 0.0
        for kind, ctx, dish, c, _ in self.events(d, n):
            if kind == "transition":
                raw = self.transitions.distribution(ctx)
                total += math.log(self.renormalize(raw, legal_kinds(c, n))[dish])
            elif kind == "tag":
                total += math.log(self.tags.distribution(ctx)[dish])
            else:
                total += math.log(self.words.predictive_probability(ctx, dish))
        return total

    def observe(
        self, d: Derivation, rng: random.Random, parts: Sequence[str] = KINDS
    ) -> ObservedDerivation:
        """Seat one customer per event of ``d`` in the selected distributions."""
        trees = {"transition": self.transitions, "tag": self.tags, "word": self.words}
        traces: dict[str, list[Trace]] = {k: [] for k in KINDS}
        log_prob = 0.0
        for kind, ctx, dish, _, _ in list(self.events(d, d.n)):
            if kind not in parts:
                continue
            trace = trees[kind].add_customer(ctx, dish, rng)
            traces[kind].append(trace)
            log_prob += math.log(trace.prob)
        return ObservedDerivation(traces["transition"], traces["tag"], traces["word"], log_prob)

    def forget(self, observed: ObservedDerivation) -> None:
        """Remove exactly the customers seated by a previous :meth:`observe`."""
        for tree, traces in (
            (self.words, observed.words),
            (self.tags, observed.tags),
            (self.transitions, observed.transitions),
        ):
            for trace in reversed(traces):
                tree.remove_customer(trace)

    # -- housekeeping -----------------------------------------------------

    def trees(self) -> dict[str, HpypTree]:
        return {"transition": self.transitions, "tag": self.tags, "word": self.words}

    def resample_hyperparameters(self, rng: random.Random, iterations: int = 5) -> dict:
        return {k: t.resample_hyperparameters(rng, iterations) for k, t in self.trees().items()}

    def audit(self) -> None:
        for tree in self.trees().values():
            tree.audit()

    def total_customers(self) -> int:
        return sum(t.total_customers() for t in self.trees().values())

    def label_name(self, label: int | None) -> str:
        if label is None or not self.predict_labels:
            return "_"
        return self.vocab.labels[label]
