"""Treebank and raw-text ingestion."""

from __future__ import annotations

import logging
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, TextIO

from .transition import DepTree

log = logging.getLogger(__name__)

UNDERSCORE = "_"


class ConllError(ValueError):
    pass


class Token(NamedTuple):
    form: str
    tag: str
    head: int
    label: str


@dataclass
class SentenceRecord:
    tokens: list[Token]
    source: str = "<memory>"
    lines: tuple[int, int] = (0, 0)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def tags(self) -> list[str]:
        return [t.tag for t in self.tokens]

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.tokens]


def read_conll(stream: TextIO | Iterable[str], source: str = "<stream>") -> list[SentenceRecord]:
    """Read CoNLL-X/CoNLL-U: FORM, POSTAG (CPOSTAG fallback), HEAD, DEPREL.

    Comment lines and CoNLL-U multiword/empty-node rows are skipped.
    """
    records = []
    tokens: list[Token] = []
    first = 0
    lineno = 0

    def flush(last):
        if tokens:
            records.append(SentenceRecord(list(tokens), source, (first, last)))
            tokens.clear()

    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            flush(lineno - 1)
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConllError(f"{source}:{lineno}: expected 10 tab-separated columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            continue
        try:
            head = int(cols[6])
        except ValueError:
            raise ConllError(f"{source}:{lineno}: non-integer head {cols[6]!r}") from None
        tag = cols[4] if cols[4] != UNDERSCORE else cols[3]
        if not tokens:
            first = lineno
        tokens.append(Token(cols[1], tag, head, cols[7]))
    flush(lineno)
    for rec in records:
        n = len(rec)
        for i, tok in enumerate(rec.tokens, 1):
            if not 0 <= tok.head <= n:
                raise ConllError(f"{rec.source}:{rec.lines[0] + i - 1}: head {tok.head} outside [0, {n}]")
    return records


def format_conll(records: Iterable[SentenceRecord]) -> str:
    out = []
    for rec in records:
        for i, tok in enumerate(rec.tokens, 1):
            out.append(f"{i}\t{tok.form}\t_\t{tok.tag}\t{tok.tag}\t_\t{tok.head}\t{tok.label}\t_\t_\n")
        out.append("\n")
    return "".join(out)


def write_conll(records: Iterable[SentenceRecord], stream: TextIO) -> None:
    stream.write(format_conll(records))


def read_text(stream: TextIO | Iterable[str]) -> list[list[str]]:
    """One whitespace-tokenised sentence per non-blank line."""
    return [line.split() for line in stream if line.strip()]


def is_projective(tree: DepTree | Sequence[int]) -> bool:
    """True iff no two arcs cross (root arcs included)."""
    heads = tree.heads[1:] if isinstance(tree, DepTree) else list(tree)
    arcs = [(min(h, d), max(h, d)) for d, h in enumerate(heads, 1)]
    for a, (l1, r1) in enumerate(arcs):
        for l2, r2 in arcs[a + 1 :]:
            if l1 < l2 < r1 < r2 or l2 < l1 < r2 < r1:
                return False
    return True


def is_well_formed(heads: Sequence[int]) -> bool:
    """Single root dependent and no cycles."""
    n = len(heads)
    if sum(1 for h in heads if h == 0) != 1:
        return False
    for start in range(1, n + 1):
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                return False
            seen.add(node)
            node = heads[node - 1]
    return True


def filter_trainable(records: Iterable[SentenceRecord]) -> tuple[list[SentenceRecord], int]:
    """Keep single-rooted projective trees; returns (kept, skipped)."""
    kept, skipped = [], 0
    for rec in records:
        if is_well_formed(rec.heads) and is_projective(rec.heads):
            kept.append(rec)
        else:
            skipped += 1
    if skipped:
        log.warning("skipped %d non-projective or multi-rooted sentences", skipped)
    return kept, skipped


# -- unknown words --------------------------------------------------------

SUFFIXES = ("ing", "ed", "s", "ly", "ion", "er", "est", "ity", "al", "able")
_BY_LENGTH = sorted(SUFFIXES, key=len, reverse=True)
_PUNCT = set(string.punctuation) | {"``", "''", "–", "—", "…", "“", "”", "‘", "’"}

UNKNOWN_CLASSES = (
    "<UNK-num>",
    "<UNK-digit>",
    "<UNK-punct>",
    "<UNK-caps>",
    "<UNK-cap-init>",
    "<UNK-cap>",
    *(f"<UNK-{s}>" for s in SUFFIXES),
    "<UNK>",
)
GENERIC_UNKNOWN = "<UNK>"


def classify_unknown(form: str, sentence_initial: bool = False) -> str:
    """Map an unseen form to a word class from surface features.

    Tests run in order: digits, punctuation, capitalisation, suffix.
    """
    stripped = form.replace(",", "").replace(".", "")
    if stripped.isdigit():
        return "<UNK-num>"
    if any(ch.isdigit() for ch in form):
        return "<UNK-digit>"
    if form and all(ch in _PUNCT for ch in form):
        return "<UNK-punct>"
    if form[:1].isupper():
        if len(form) > 1 and form.isupper():
            return "<UNK-caps>"
        return "<UNK-cap-init>" if sentence_initial else "<UNK-cap>"
    lower = form.lower()
    for suffix in _BY_LENGTH:
        if lower.endswith(suffix) and len(lower) > len(suffix) + 1:
            return f"<UNK-{suffix}>"
    return "<UNK>"


@dataclass
class Vocabulary:
    """Word, tag and label inventories.

    Word ids: retained forms first, then the unknown classes.  Lookup is
    total: any string maps to a retained id, its class id, or the generic
    unknown id when its class is not in the inventory.
    """

    forms: list[str]
    tags: list[str]
    labels: list[str]
    min_count: int = 2
    counts: dict[str, int] = field(default_factory=dict)
    unknown: tuple[str, ...] = UNKNOWN_CLASSES

    def __post_init__(self):
        self.unknown = tuple(self.unknown)
        if GENERIC_UNKNOWN not in self.unknown:
            raise ValueError(f"unknown classes must include {GENERIC_UNKNOWN}")
        overlap = set(self.forms) & set(self.unknown)
        if overlap:
            raise ValueError(f"forms collide with unknown classes: {sorted(overlap)}")
        self.words = list(self.forms) + list(self.unknown)
        self.word_index = {w: i for i, w in enumerate(self.words)}
        self.tag_index = {t: i for i, t in enumerate(self.tags)}
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.words)

    def word_id(self, form: str, sentence_initial: bool = False) -> int:
        if form in self.word_index and form not in self.unknown:
            return self.word_index[form]
        cls = classify_unknown(form, sentence_initial)
        return self.word_index.get(cls, self.word_index[GENERIC_UNKNOWN])

    def word_ids(self, forms: Sequence[str]) -> list[int]:
        return [self.word_id(f, i == 0) for i, f in enumerate(forms)]

    def tag_id(self, tag: str) -> int:
        try:
            return self.tag_index[tag]
        except KeyError:
            raise KeyError(f"unknown POS tag {tag!r}") from None

    def label_id(self, label: str) -> int:
        try:
            return self.label_index[label]
        except KeyError:
            raise KeyError(f"unknown dependency label {label!r}") from None

    def to_dict(self) -> dict:
        return {
            "forms": self.forms,
            "tags": self.tags,
            "labels": self.labels,
            "min_count": self.min_count,
            "unknown": list(self.unknown),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(
            list(data["forms"]),
            list(data["tags"]),
            list(data["labels"]),
            data["min_count"],
            unknown=tuple(data["unknown"]),
        )


def build_vocab(
    records: Sequence[SentenceRecord], min_count: int = 2, max_size: int | None = None
) -> Vocabulary:
    """Retain forms seen at least ``min_count`` times (most frequent ``max_size`` if given)."""
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    counts = Counter(f for rec in records for f in rec.forms)
    kept = [f for f, c in counts.items() if c >= min_count and f not in UNKNOWN_CLASSES]
    kept.sort(key=lambda f: (-counts[f], f))
    if max_size is not None:
        kept = kept[:max_size]
    tags = sorted({t for rec in records for t in rec.tags})
    labels = sorted({lab for rec in records for lab in rec.labels})
    return Vocabulary(kept, tags, labels, min_count, dict(counts))


# -- encoded sentences ----------------------------------------------------


@dataclass
class Sentence:
    """A sentence as model ids; ``tree``/``tags`` are None when unknown."""

    words: list[int]
    tags: list[int] | None = None
    tree: DepTree | None = None

    def __len__(self) -> int:
        return len(self.words)


def encode(record: SentenceRecord, vocab: Vocabulary, labelled: bool = True) -> Sentence:
    labels = [vocab.label_id(lab) if labelled else 0 for lab in record.labels]
    return Sentence(
        vocab.word_ids(record.forms),
        [vocab.tag_id(t) for t in record.tags],
        DepTree.from_heads(record.heads, labels),
    )


def encode_words(forms: Sequence[str], vocab: Vocabulary) -> Sentence:
    return Sentence(vocab.word_ids(forms))


# -- language-model preprocessing -----------------------------------------


def strip_punctuation(record: SentenceRecord, punct_tags: set[str]) -> SentenceRecord | None:
    """Drop punctuation tokens, reattaching their dependents to their head.

    Returns None when nothing but punctuation remains.
    """
    heads = [0] + record.heads
    keep = [i for i, tok in enumerate(record.tokens, 1) if tok.tag not in punct_tags]
    if not keep:
        return None

    def surviving_head(i):
        h = heads[i]
        while h != 0 and record.tokens[h - 1].tag in punct_tags:
            h = heads[h]
        return h

    new_index = {old: new for new, old in enumerate(keep, 1)}
    tokens = []
    for old in keep:
        tok = record.tokens[old - 1]
        h = surviving_head(old)
        tokens.append(tok._replace(head=new_index.get(h, 0)))
    # A punctuation root can leave several root dependents; keep the first.
    roots = [i for i, t in enumerate(tokens) if t.head == 0]
    for i in roots[1:]:
        tokens[i] = tokens[i]._replace(head=roots[0] + 1)
    return SentenceRecord(tokens, record.source, record.lines)


def normalize_numbers(record: SentenceRecord, symbol: str = "NUM") -> SentenceRecord:
    tokens = [
        t._replace(form=symbol) if any(ch.isdigit() for ch in t.form) else t for t in record.tokens
    ]
    return SentenceRecord(tokens, record.source, record.lines)
