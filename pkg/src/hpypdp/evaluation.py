"""Attachment scores and beam-sum perplexity."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .corpus import SentenceRecord
from .decoder import DecodeSettings, particle_parse
from .model import GenerativeModel

PUNCT_TAGS = frozenset({"``", "''", ",", ".", ":", "-LRB-", "-RRB-", "PUNCT"})


@dataclass
class EvalReport:
    uas: float
    las: float
    tag_accuracy: float
    tokens: int  # scored (non-punctuation) tokens
    sentences: int
    perplexity: float | None = None
    sentences_per_second: float | None = None

    def to_record(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def format(self) -> str:
        lines = [
            f"UAS        {self.uas:6.2f}",
            f"LAS        {self.las:6.2f}",
            f"tag acc    {self.tag_accuracy:6.2f}",
            f"tokens     {self.tokens:6d}",
            f"sentences  {self.sentences:6d}",
        ]
        if self.perplexity is not None:
            lines.append(f"perplexity {self.perplexity:.3f}")
        if self.sentences_per_second is not None:
            lines.append(f"sent/sec   {self.sentences_per_second:.2f}")
        return "\n".join(lines)


def attachment_scores(
    pred: Sequence[SentenceRecord],
    gold: Sequence[SentenceRecord],
    punct_tags: frozenset[str] | set[str] = PUNCT_TAGS,
) -> EvalReport:
    """UAS/LAS over tokens whose gold tag is not punctuation; tag accuracy over all tokens."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sentences but {len(gold)} gold")
    scored = heads = labels = tagged = total = 0
    for k, (p, g) in enumerate(zip(pred, gold)):
        if len(p) != len(g):
            raise ValueError(f"sentence {k + 1}: {len(p)} predicted tokens but {len(g)} gold")
        for pt, gt in zip(p.tokens, g.tokens):
            total += 1
            tagged += pt.tag == gt.tag
            if gt.tag in punct_tags:
                continue
            scored += 1
            if pt.head == gt.head:
                heads += 1
                labels += pt.label == gt.label
    pct = lambda x, n: 100.0 * x / n if n else 0.0  # noqa: E731
    return EvalReport(pct(heads, scored), pct(labels, scored), pct(tagged, total), scored, len(gold))


def sentence_log_prob(model: GenerativeModel, words: Sequence[int], particles: int) -> float:
    """Beam-sum log probability of a word sequence, stop decision included."""
    settings = DecodeSettings(particles=particles, generative_scoring=True)
    return particle_parse(model, words, settings=settings).marginal_log_prob()


def perplexity(model: GenerativeModel, sentences: Sequence[Sequence[int]], particles: int = 1000) -> float:
    """exp(-sum log p / N), N counting every word plus one stop event per sentence."""
    total = 0.0
    events = 0
    for words in sentences:
        total += sentence_log_prob(model, words, particles)
        events += len(words) + 1
    if events == 0:
        raise ValueError("perplexity of an empty corpus")
    return math.exp(-total / events)
