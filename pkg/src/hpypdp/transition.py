"""Arc-standard transition system with the root at position 0.

Configurations are persistent: the stack is a linked list of
:class:`StackNode` cells and the arc set a linked list of :class:`Arc`
cells, so applying a transition is O(1) and never mutates its input.  A stack
cell also carries the tag/word of its token and of its current leftmost and
rightmost children, which is everything context extraction needs.

``n`` is the sentence length.  Passing ``n=None`` selects generative
legality for open-ended generation: shift is always possible and a
right-arc onto the root ends the sentence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

SHIFT, LEFT_ARC, RIGHT_ARC = 0, 1, 2
KIND_NAMES = {SHIFT: "sh", LEFT_ARC: "la", RIGHT_ARC: "ra"}


class OracleError(ValueError):
    """The gold tree cannot be derived from the configuration."""


class Transition(NamedTuple):
    kind: int
    label: int | None = None

    @classmethod
    def shift(cls) -> "Transition":
        return cls(SHIFT, None)

    @classmethod
    def left(cls, label: int = 0) -> "Transition":
        return cls(LEFT_ARC, label)

    @classmethod
    def right(cls, label: int = 0) -> "Transition":
        return cls(RIGHT_ARC, label)

    def __repr__(self) -> str:
        if self.kind == SHIFT:
            return "sh"
        return f"{KIND_NAMES[self.kind]}_{self.label}"


SH = Transition.shift()


class Arc(NamedTuple):
    head: int
    label: int | None
    dependent: int


class StackNode(NamedTuple):
    index: int
    tag: int | None
    word: int | None
    left: int | None  # leftmost left dependent
    left_tag: int | None
    right: int | None  # rightmost right dependent
    right_tag: int | None
    children: int  # dependents attached so far
    below: "StackNode | None"


class _ArcLink(NamedTuple):
    arc: Arc
    prev: "_ArcLink | None"


class Configuration:
    __slots__ = ("top", "depth", "buffer", "_arcs")

    def __init__(self, top: StackNode | None, depth: int, buffer: int, arcs: _ArcLink | None):
        self.top = top
        self.depth = depth  # stack size
        self.buffer = buffer
        self._arcs = arcs

    @property
    def stack(self) -> tuple[int, ...]:
        """Stack positions, bottom first."""
        out = []
        node = self.top
        while node is not None:
            out.append(node.index)
            node = node.below
        return tuple(reversed(out))

    @property
    def arcs(self) -> frozenset[Arc]:
        return frozenset(self.iter_arcs())

    def iter_arcs(self) -> Iterable[Arc]:
        link = self._arcs
        while link is not None:
            yield link.arc
            link = link.prev

    def stack_node(self, i: int) -> StackNode | None:
        """The i-th stack element counting from the top (1 = top)."""
        node = self.top
        for _ in range(i - 1):
            if node is None:
                return None
            node = node.below
        return node

    def leftmost_child(self, position: int) -> int | None:
        deps = [a.dependent for a in self.iter_arcs() if a.head == position and a.dependent < position]
        return min(deps) if deps else None

    def rightmost_child(self, position: int) -> int | None:
        deps = [a.dependent for a in self.iter_arcs() if a.head == position and a.dependent > position]
        return max(deps) if deps else None

    def heads(self, n: int) -> list[int]:
        heads = [-1] * (n + 1)
        for arc in self.iter_arcs():
            heads[arc.dependent] = arc.head
        return heads

    def audit(self) -> None:
        stack = self.stack
        if len(stack) != self.depth:
            raise AssertionError("stack depth out of sync")
        if any(a >= b for a, b in zip(stack, stack[1:])):
            raise AssertionError(f"stack not increasing: {stack}")
        seen = set()
        for arc in self.iter_arcs():
            if arc.dependent in seen:
                raise AssertionError(f"position {arc.dependent} has two heads")
            if arc.dependent == 0 or arc.head == arc.dependent:
                raise AssertionError(f"bad arc {arc}")
            seen.add(arc.dependent)
        node = self.top
        while node is not None:
            if node.left != self.leftmost_child(node.index):
                raise AssertionError(f"leftmost child of {node.index} out of sync")
            if node.right != self.rightmost_child(node.index):
                raise AssertionError(f"rightmost child of {node.index} out of sync")
            node = node.below

    def __repr__(self) -> str:
        return f"Configuration(stack={list(self.stack)}, buffer={self.buffer}, arcs={sorted(self.arcs)})"


def initial_configuration() -> Configuration:
    return Configuration(None, 0, 0, None)


def legal_kinds(c: Configuration, n: int | None) -> tuple[bool, bool, bool]:
    """(shift, left-arc, right-arc) legality flags."""
    if c.depth < 2:
        return (n is None or c.buffer <= n), False, False
    s2_is_root = c.top.below.index == 0
    if n is None:
        return True, not s2_is_root, True
    return c.buffer <= n, not s2_is_root, (not s2_is_root) or c.buffer > n


def legal_transitions(c: Configuration, n: int | None) -> set[int]:
    return {kind for kind, ok in zip((SHIFT, LEFT_ARC, RIGHT_ARC), legal_kinds(c, n)) if ok}


def apply(
    c: Configuration,
    t: Transition,
    n: int | None = None,
    tag: int | None = None,
    word: int | None = None,
) -> Configuration:
    """Apply ``t``; a shift pushes position ``c.buffer`` carrying ``tag``/``word``."""
    if not legal_kinds(c, n)[t.kind]:
        raise ValueError(f"illegal transition {t!r} in {c!r} (n={n})")
    if t.kind == SHIFT:
        node = StackNode(c.buffer, tag, word, None, None, None, None, 0, c.top)
        return Configuration(node, c.depth + 1, c.buffer + 1, c._arcs)
    s1 = c.top
    s2 = s1.below
    if t.kind == LEFT_ARC:
        head = s1._replace(left=s2.index, left_tag=s2.tag, children=s1.children + 1, below=s2.below)
        arc = Arc(s1.index, t.label, s2.index)
    else:
        head = s2._replace(right=s1.index, right_tag=s1.tag, children=s2.children + 1)
        arc = Arc(s2.index, t.label, s1.index)
    return Configuration(head, c.depth - 1, c.buffer, _ArcLink(arc, c._arcs))


def is_terminal(c: Configuration, n: int | None) -> bool:
    if c.depth != 1:
        return False
    if n is None:
        return c.buffer > 1
    return c.buffer > n


@dataclass
class DepTree:
    """Heads and labels indexed by position; index 0 is the root placeholder."""

    heads: list[int]
    labels: list[int | None]

    def __post_init__(self):
        if len(self.heads) != len(self.labels):
            raise ValueError("heads and labels differ in length")

    @property
    def n(self) -> int:
        return len(self.heads) - 1

    @classmethod
    def from_heads(cls, heads: Sequence[int], labels: Sequence[int | None] | None = None) -> "DepTree":
        """Build from 1-based token heads (without the root placeholder)."""
        heads = [-1, *heads]
        labels = [None, *(labels if labels is not None else [0] * (len(heads) - 1))]
        return cls(heads, labels)

    def arcs(self) -> set[Arc]:
        return {Arc(self.heads[j], self.labels[j], j) for j in range(1, len(self.heads))}

    def dependents(self) -> list[list[int]]:
        deps: list[list[int]] = [[] for _ in self.heads]
        for j in range(1, len(self.heads)):
            deps[self.heads[j]].append(j)
        return deps


class GoldIndex:
    """Per-position gold head, label, dependent count, and last right dependent."""

    __slots__ = ("tree", "heads", "labels", "nchildren", "last_right")

    def __init__(self, tree: DepTree):
        self.tree = tree
        self.heads = tree.heads
        self.labels = tree.labels
        n = tree.n
        self.nchildren = [0] * (n + 1)
        self.last_right = [-1] * (n + 1)
        for j in range(1, n + 1):
            h = tree.heads[j]
            if not 0 <= h <= n or h == j:
                raise OracleError(f"position {j} has invalid head {h}")
            self.nchildren[h] += 1
            if j > h:
                self.last_right[h] = max(self.last_right[h], j)


def oracle_choices(c: Configuration, gold: DepTree | GoldIndex) -> list[Transition]:
    """All transitions after which ``gold`` is still derivable.

    A reduce is valid when it is a gold arc whose dependent already holds all
    of its gold dependents.  Valid right-arcs are forced; a valid left-arc may
    be postponed by shifting while the top word still expects right
    dependents from the buffer.
    """
    g = gold if isinstance(gold, GoldIndex) else GoldIndex(gold)
    n = g.tree.n
    shift_ok, left_ok, right_ok = legal_kinds(c, n)
    if c.depth >= 2:
        s1 = c.top
        s2 = s1.below
        i, j = s2.index, s1.index
        if right_ok and g.heads[j] == i and s1.children == g.nchildren[j]:
            return [Transition.right(g.labels[j])]
        if left_ok and g.heads[i] == j and s2.children == g.nchildren[i]:
            choices = [Transition.left(g.labels[i])]
            if shift_ok and g.last_right[j] >= c.buffer:
                choices.append(SH)
            return choices
    if shift_ok:
        return [SH]
    raise OracleError(f"gold tree not derivable from {c!r}")


def greedy_oracle(c: Configuration, gold: DepTree | GoldIndex) -> Transition:
    """Deterministic oracle: reduce as soon as a valid arc exists."""
    return oracle_choices(c, gold)[0]


def oracle_derivation(gold: DepTree, tags: Sequence[int] | None = None, words: Sequence[int] | None = None) -> list[Transition]:
    """Greedy-oracle transition sequence for ``gold``, root shift included."""
    g = GoldIndex(gold)
    n = gold.n
    c = apply(initial_configuration(), SH, n)
    out = [SH]
    while not is_terminal(c, n):
        t = greedy_oracle(c, g)
        if t.kind == SHIFT:
            i = c.buffer
            c = apply(c, t, n, tags[i - 1] if tags else None, words[i - 1] if words else None)
        else:
            c = apply(c, t, n)
        out.append(t)
    return out


def derivation_to_tree(transitions: Sequence[Transition], n: int) -> DepTree:
    """Tree built by a full derivation (root shift included) of an n-word sentence."""
    c = initial_configuration()
    for t in transitions:
        c = apply(c, t, n)
    if not is_terminal(c, n):
        raise ValueError(f"derivation stops in non-terminal {c!r}")
    heads = [-1] * (n + 1)
    labels: list[int | None] = [None] * (n + 1)
    for arc in c.iter_arcs():
        heads[arc.dependent] = arc.head
        labels[arc.dependent] = arc.label
    return DepTree(heads, labels)
