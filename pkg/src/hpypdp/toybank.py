"""Seeded synthetic English-like treebank.

Sentences come from a small lexicalised dependency grammar with Penn-style
tags and head-rule style labels.  Attachment is driven by the words:
verbs select object nouns and prefer particular prepositions, prepositions
select their objects, and a few forms are tag-ambiguous.  This gives the
parser lexical signal to exploit, which a purely tag-driven model misses.

Run ``python -m hpypdp.toybank OUTDIR`` to write ``train.conll`` and
``dev.conll``.
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path

from .corpus import SentenceRecord, Token, format_conll


class Node:
    __slots__ = ("form", "tag", "label", "left", "right")

    def __init__(self, form: str, tag: str, label: str = ""):
        self.form = form
        self.tag = tag
        self.label = label
        self.left: list[Node] = []
        self.right: list[Node] = []

    def add_left(self, dep: "Node", label: str) -> "Node":
        dep.label = label
        self.left.append(dep)
        return dep

    def add_right(self, dep: "Node", label: str) -> "Node":
        dep.label = label
        self.right.append(dep)
        return dep


# Noun classes: (singular, plural) pairs.
NOUNS = {
    "person": [("man", "men"), ("woman", "women"), ("child", "children"), ("teacher", "teachers"),
               ("doctor", "doctors"), ("friend", "friends"), ("student", "students"), ("farmer", "farmers"),
               ("neighbor", "neighbors"), ("officer", "officers")],
    "food": [("pizza", "pizzas"), ("apple", "apples"), ("cake", "cakes"), ("sandwich", "sandwiches"),
             ("soup", "soups"), ("bread", "breads")],
    "text": [("book", "books"), ("letter", "letters"), ("paper", "papers"), ("report", "reports"),
             ("story", "stories")],
    "vehicle": [("car", "cars"), ("truck", "trucks"), ("bus", "buses"), ("bike", "bikes")],
    "tool": [("fork", "forks"), ("knife", "knives"), ("telescope", "telescopes"), ("hammer", "hammers"),
             ("pen", "pens")],
    "place": [("park", "parks"), ("house", "houses"), ("city", "cities"), ("kitchen", "kitchens"),
              ("garden", "gardens"), ("school", "schools"), ("market", "markets")],
    "thing": [("box", "boxes"), ("table", "tables"), ("bag", "bags"), ("picture", "pictures"),
              ("saw", "saws"), ("can", "cans"), ("watch", "watches")],
    "time": [("morning", "mornings"), ("week", "weeks"), ("night", "nights"), ("year", "years")],
}
NAMES = ["John", "Mary", "Smith", "Anna", "Paris", "London", "Peter", "Google"]
PRONOUNS = ["he", "she", "they", "we", "it", "I"]
DETS = ["the", "a", "this", "every", "some", "that"]
ADJS = ["big", "small", "old", "new", "red", "happy", "green", "long", "young", "quiet"]
ADVS = ["quickly", "slowly", "often", "never", "really", "yesterday", "also", "finally"]
NUMBERS = ["two", "three", "ten", "5", "12", "1984"]

# Verb lexicon: past form, present 3sg, base, class, object class, preferred prepositions.
VERBS = [
    ("ate", "eats", "eat", "trans", "food", ("with", "in")),
    ("cooked", "cooks", "cook", "trans", "food", ("in", "for")),
    ("read", "reads", "read", "trans", "text", ("in", "to")),
    ("wrote", "writes", "write", "trans", "text", ("with", "for", "to")),
    ("drove", "drives", "drive", "trans", "vehicle", ("to", "from")),
    ("bought", "buys", "buy", "trans", "any", ("for", "from", "at")),
    ("saw", "sees", "see", "trans", "any", ("with", "in", "at")),
    ("watched", "watches", "watch", "trans", "person", ("from", "in")),
    ("found", "finds", "find", "trans", "thing", ("in", "under")),
    ("put", "puts", "put", "trans", "thing", ("on", "in", "under")),
    ("met", "meets", "meet", "trans", "person", ("in", "at")),
    ("gave", "gives", "give", "ditrans", "any", ("to",)),
    ("sent", "sends", "send", "ditrans", "text", ("to", "from")),
    ("slept", "sleeps", "sleep", "intrans", None, ("in", "at")),
    ("arrived", "arrives", "arrive", "intrans", None, ("at", "from", "in")),
    ("laughed", "laughs", "laugh", "intrans", None, ("at", "with")),
    ("walked", "walks", "walk", "intrans", None, ("to", "in", "with")),
    ("said", "says", "say", "comp", None, ()),
    ("thought", "thinks", "think", "comp", None, ()),
    ("knew", "knows", "know", "comp", None, ()),
]
# Preposition -> noun classes it takes, and whether nouns like to keep it.
PREPS = {
    "with": ["tool", "person"],
    "in": ["place", "time"],
    "at": ["place", "time"],
    "on": ["thing"],
    "under": ["thing"],
    "to": ["person", "place"],
    "from": ["person", "place"],
    "for": ["person", "time"],
    "of": ["text", "thing", "person", "food"],
}
NOUN_PREPS = ("of", "with", "from", "on")
MODALS = ["will", "can", "might"]
PARTICIPLES = {
    "eat": "eaten", "write": "written", "drive": "driven", "see": "seen", "give": "given",
    "know": "known", "take": "taken",
}
# Head noun class -> class of the nouns that modify it in compounds.
COMPOUNDS = {"thing": "food", "place": "vehicle", "text": "person", "tool": "food", "vehicle": "place"}


def _zipf(rng: random.Random, items):
    weights = [1.0 / (r + 1) ** 1.1 for r in range(len(items))]
    return rng.choices(items, weights=weights)[0]


class Grammar:
    def __init__(self, rng: random.Random):
        self.rng = rng

    def chance(self, p: float) -> bool:
        return self.rng.random() < p

    def noun_phrase(self, cls: str, depth: int = 0, subject: bool = False) -> Node:
        rng = self.rng
        if subject and self.chance(0.25):
            return Node(_zipf(rng, PRONOUNS), "PRP")
        if self.chance(0.08 if not subject else 0.15):
            return Node(_zipf(rng, NAMES), "NNP")
        if cls == "any":
            cls = rng.choice(sorted(NOUNS))
        sing, plur = _zipf(rng, NOUNS[cls])
        plural = self.chance(0.3)
        head = Node(plur if plural else sing, "NNS" if plural else "NN")
        mods = []
        if plural and self.chance(0.2):
            mods.append(Node(_zipf(rng, NUMBERS), "CD"))
        elif not plural or self.chance(0.5):
            mods.append(Node(_zipf(rng, DETS if not plural else ["the", "some"]), "DT"))
        if self.chance(0.3):
            adj = Node(_zipf(rng, ADJS), "JJ")
            if self.chance(0.1):
                adj.add_left(Node("very", "RB"), "AMOD")
            mods.append(adj)
        if self.chance(0.12):
            # noun compound: the modifier noun comes straight before the head
            mod_cls = COMPOUNDS.get(cls, "thing")
            mods.append(Node(_zipf(rng, NOUNS[mod_cls])[0], "NN"))
        for m in mods:
            head.add_left(m, "NMOD")
        if depth < 2 and self.chance(0.12):
            self.attach_pp(head, self.rng.choice(NOUN_PREPS), depth + 1)
        if depth < 2 and cls == "person" and self.chance(0.15):
            self.relative_clause(head, depth + 1)
        if depth == 0 and self.chance(0.06):
            cc = head.add_right(Node(rng.choice(["and", "or"]), "CC"), "COORD")
            cc.add_right(self.noun_phrase(cls, depth + 1), "CONJ")
        return head

    def relative_clause(self, noun: Node, depth: int) -> None:
        """"who V ..." attached to the noun; the relative pronoun is the subject."""
        rng = self.rng
        past, pres, _, cls, obj, _ = _zipf(rng, [v for v in VERBS if v[3] in ("trans", "intrans")])
        verb = noun.add_right(Node(past if self.chance(0.7) else pres, "VBD"), "NMOD")
        if verb.form == pres:
            verb.tag = "VBZ"
        verb.add_left(Node("who", "WP"), "SBJ")
        if cls == "trans":
            verb.add_right(self.noun_phrase(obj, depth + 1), "OBJ")

    def attach_pp(self, head: Node, prep: str, depth: int) -> None:
        p = head.add_right(Node(prep, "IN"), "NMOD" if head.tag.startswith("NN") else "VMOD")
        p.add_right(self.noun_phrase(self.rng.choice(PREPS[prep]), depth + 1), "PMOD")

    def clause(self, depth: int = 0) -> Node:
        rng = self.rng
        past, pres, base, cls, obj, preferred = _zipf(rng, VERBS)
        subj = self.noun_phrase("person", subject=True)
        r = rng.random()
        if r < 0.15:
            head = Node(rng.choice(MODALS), "MD")
            verb = head.add_right(Node(base, "VB"), "VC")
        elif r < 0.25:
            head = Node(rng.choice(["has", "had"]), "VBZ")
            if head.form == "had":
                head.tag = "VBD"
            verb = head.add_right(Node(PARTICIPLES.get(base, past), "VBN"), "VC")
        elif r < 0.45:
            head = verb = Node(pres, "VBZ")
        else:
            head = verb = Node(past, "VBD")
        head.add_left(subj, "SBJ")
        if self.chance(0.12):
            adv = Node(_zipf(rng, ADVS), "RB")
            (head.add_left if self.chance(0.5) else verb.add_right)(adv, "VMOD")
        obj_node = None
        if cls in ("trans", "ditrans"):
            if cls == "ditrans" and self.chance(0.4):
                verb.add_right(self.noun_phrase("person"), "OBJ")
            obj_node = verb.add_right(self.noun_phrase(obj), "OBJ")
        elif cls == "comp" and depth < 2:
            if self.chance(0.5):
                that = verb.add_right(Node("that", "IN"), "VMOD")
                that.add_right(self.clause(depth + 1), "SUB")
            else:
                verb.add_right(self.clause(depth + 1), "OBJ")
            return head
        for _ in range(rng.choice([0, 1, 1, 2])):
            if preferred and self.chance(0.6):
                prep = rng.choice(preferred)
                target = verb if obj_node is None or self.chance(0.9) else obj_node
            else:
                prep = rng.choice(NOUN_PREPS)
                target = obj_node if obj_node is not None and self.chance(0.85) else verb
            self.attach_pp(target, prep, depth + 1)
        if depth == 0 and self.chance(0.1):
            verb.add_right(Node(_zipf(rng, ADVS), "RB"), "VMOD")
        if depth == 0 and self.chance(0.08):
            # verb phrase coordination sharing the subject
            past2, _, _, cls2, obj2, _ = _zipf(rng, [v for v in VERBS if v[3] == "trans"])
            cc = verb.add_right(Node("and", "CC"), "COORD")
            verb2 = cc.add_right(Node(past2, "VBD"), "CONJ")
            verb2.add_right(self.noun_phrase(obj2), "OBJ")
        return head

    def sentence(self) -> Node:
        root = self.clause()
        root.add_right(Node(".", "."), "P")
        root.label = "ROOT"
        return root


def linearize(root: Node) -> list[Token]:
    order: list[tuple[Node, Node | None]] = []

    def visit(node: Node, parent: Node | None):
        for dep in node.left:
            visit(dep, node)
        order.append((node, parent))
        for dep in node.right:
            visit(dep, node)

    visit(root, None)
    position = {id(node): i for i, (node, _) in enumerate(order, 1)}
    return [
        Token(node.form, node.tag, 0 if parent is None else position[id(parent)], node.label)
        for node, parent in order
    ]


def generate_treebank(size: int, seed: int = 0, max_len: int = 40) -> list[SentenceRecord]:
    rng = random.Random(seed)
    grammar = Grammar(rng)
    out = []
    while len(out) < size:
        tokens = linearize(grammar.sentence())
        if len(tokens) <= max_len:
            out.append(SentenceRecord(tokens, f"toybank:{seed}", (len(out) + 1, len(out) + 1)))
    return out


def toy_split(train: int = 500, dev: int = 100, seed: int = 0) -> tuple[list[SentenceRecord], list[SentenceRecord]]:
    records = generate_treebank(train + dev, seed)
    return records[:train], records[train:]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="Write a synthetic CoNLL treebank split.")
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--train", type=int, default=500)
    ap.add_argument("--dev", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)
    train, dev = toy_split(args.train, args.dev, args.seed)
    (args.outdir / "train.conll").write_text(format_conll(train), encoding="utf-8")
    (args.outdir / "dev.conll").write_text(format_conll(dev), encoding="utf-8")


if __name__ == "__main__":
    main()
