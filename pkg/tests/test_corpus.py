import io
import itertools
import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpypdp.corpus import (
    GENERIC_UNKNOWN,
    ConllError,
    SentenceRecord,
    Token,
    Vocabulary,
    build_vocab,
    classify_unknown,
    encode,
    encode_words,
    filter_trainable,
    format_conll,
    is_projective,
    is_well_formed,
    normalize_numbers,
    read_conll,
    read_text,
    strip_punctuation,
)
from hpypdp.transition import DepTree, OracleError, derivation_to_tree, oracle_derivation
from oracles import crossing, projective_trees

SAMPLE = (
    "# sent_id = 1\n"
    "1\tThe\tthe\tDT\tDT\t_\t2\tdet\t_\t_\n"
    "2\tdog\tdog\tNN\tNN\t_\t0\troot\t_\t_\n"
    "\n"
    "1\tIt\tit\tPRP\t_\t_\t2\tnsubj\t_\t_\n"
    "2-3\tdidn't\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "2\tran\trun\tVBD\tVBD\t_\t0\troot\t_\t_\n"
    "3\t.\t.\t.\t.\t_\t2\tpunct\t_\t_\n"
)


def record(heads, tags=None, forms=None):
    n = len(heads)
    tags = tags or ["NN"] * n
    forms = forms or [f"w{i}" for i in range(n)]
    return SentenceRecord([Token(f, t, h, "dep") for f, t, h in zip(forms, tags, heads)])


# -- reading -----------------------------------------------------------------------------


def test_read_two_sentences():
    recs = read_conll(io.StringIO(SAMPLE), "sample")
    assert len(recs) == 2
    assert recs[0].forms == ["The", "dog"] and recs[0].heads == [2, 0]
    assert recs[0].labels == ["det", "root"]
    # CPOSTAG fallback and multiword rows skipped
    assert recs[1].tags == ["PRP", "VBD", "."]
    assert recs[1].source == "sample"
    assert recs[0].lines == (2, 3)


def test_read_empty():
    assert read_conll(io.StringIO("")) == []


def test_nine_columns_names_line():
    bad = "1\ta\ta\tX\tX\t_\t0\troot\t_\n"
    with pytest.raises(ConllError, match=r"f:1"):
        read_conll(io.StringIO(bad), "f")


def test_non_integer_head():
    bad = "1\ta\ta\tX\tX\t_\tzero\troot\t_\t_\n"
    with pytest.raises(ConllError, match="non-integer"):
        read_conll(io.StringIO(bad))


def test_head_out_of_range():
    bad = "1\ta\ta\tX\tX\t_\t3\troot\t_\t_\n"
    with pytest.raises(ConllError, match="outside"):
        read_conll(io.StringIO(bad))


def test_round_trip_consumed_columns():
    recs = read_conll(io.StringIO(SAMPLE))
    text = format_conll(recs)
    again = read_conll(io.StringIO(text))
    assert [r.tokens for r in again] == [r.tokens for r in recs]
    assert format_conll(again) == text


def test_read_text():
    assert read_text(io.StringIO("a b  c\n\n  d\n")) == [["a", "b", "c"], ["d"]]


# -- projectivity -------------------------------------------------------------------------


def test_chain_is_projective():
    assert is_projective([0, 1, 2])


def test_crossing_pair_is_not_projective():
    # arcs 2->4 and 3->1 cross
    heads = [3, 0, 2, 2]
    assert not is_projective(heads)
    assert crossing(heads)


@pytest.mark.parametrize("n", range(1, 6))
def test_projective_iff_greedy_oracle_derives(n):
    projective = set(projective_trees(n))
    for heads in itertools.product(range(n + 1), repeat=n):
        if not is_well_formed(heads) or any(h == d for d, h in enumerate(heads, 1)):
            continue
        tree = DepTree.from_heads(heads)
        try:
            derived = derivation_to_tree(oracle_derivation(tree), n).heads == tree.heads
        except OracleError:
            derived = False
        assert is_projective(heads) == (heads in projective) == derived


def test_well_formed():
    assert is_well_formed([2, 0])
    assert not is_well_formed([0, 0])
    assert not is_well_formed([2, 1])
    assert not is_well_formed([2, 3, 1, 0])


def test_filter_trainable_reports_skips(caplog):
    recs = [record([2, 0]), record([3, 0, 2, 2]), record([0, 0])]
    with caplog.at_level(logging.WARNING):
        kept, skipped = filter_trainable(recs)
    assert kept == recs[:1] and skipped == 2
    assert "skipped 2" in caplog.text


# -- unknown words ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "form,initial,expected",
    [
        ("1984", False, "<UNK-num>"),
        ("3,000.5", False, "<UNK-num>"),
        ("B52", False, "<UNK-digit>"),
        ("--", False, "<UNK-punct>"),
        ("Walesonish", False, "<UNK-cap>"),
        ("Walesonish", True, "<UNK-cap-init>"),
        ("NASA", False, "<UNK-caps>"),
        ("flurbing", False, "<UNK-ing>"),
        ("blarked", False, "<UNK-ed>"),
        ("zorbability", False, "<UNK-ity>"),
        ("glorbable", False, "<UNK-able>"),
        ("ed", False, "<UNK>"),
        ("qux", False, "<UNK>"),
    ],
)
def test_classify_unknown(form, initial, expected):
    assert classify_unknown(form, initial) == expected


def test_singletons_become_unknown():
    recs = [record([0], forms=["a"]) for _ in range(5)] + [record([0], forms=["b"])]
    vocab = build_vocab(recs)
    assert vocab.forms == ["a"]
    assert vocab.word_id("b") == vocab.word_index[classify_unknown("b")]
    assert vocab.word_id("flurbing") == vocab.word_index["<UNK-ing>"]


def test_min_count_one_keeps_everything():
    recs = [record([0], forms=["a"]), record([0], forms=["b"])]
    assert set(build_vocab(recs, min_count=1).forms) == {"a", "b"}
    with pytest.raises(ValueError):
        build_vocab(recs, min_count=0)


def test_max_vocab_keeps_most_frequent():
    recs = [record([0], forms=[w]) for w in "aaabbc"]
    assert build_vocab(recs, min_count=1, max_size=2).forms == ["a", "b"]


def test_unknown_class_tokens_are_not_forms():
    recs = [record([0], forms=["<UNK-ing>"]) for _ in range(3)]
    vocab = build_vocab(recs)
    assert "<UNK-ing>" not in vocab.forms
    with pytest.raises(ValueError):
        Vocabulary(["<UNK>"], ["X"], ["l"])
    with pytest.raises(ValueError):
        Vocabulary(["a"], ["X"], ["l"], unknown=("<UNK-ing>",))


def test_small_unknown_inventory_falls_back_to_generic():
    vocab = Vocabulary(["a"], ["X"], ["l"], unknown=(GENERIC_UNKNOWN,))
    assert len(vocab) == 2
    assert vocab.word_id("flurbing") == 1


@given(st.text(max_size=12), st.booleans())
def test_lookup_is_total(form, initial):
    vocab = Vocabulary(["a", "b"], ["X"], ["l"])
    assert 0 <= vocab.word_id(form, initial) < len(vocab)


def test_vocab_dict_round_trip():
    vocab = Vocabulary(["a", "b"], ["X", "Y"], ["l"], unknown=("<UNK-s>", GENERIC_UNKNOWN))
    again = Vocabulary.from_dict(vocab.to_dict())
    assert again.words == vocab.words and again.tags == vocab.tags and again.labels == vocab.labels


def test_unknown_tag_or_label():
    vocab = Vocabulary(["a"], ["X"], ["l"])
    with pytest.raises(KeyError, match="POS tag"):
        vocab.tag_id("Y")
    with pytest.raises(KeyError, match="label"):
        vocab.label_id("m")


# -- encoding and transforms ---------------------------------------------------------------


def test_encode():
    recs = read_conll(io.StringIO(SAMPLE))
    vocab = build_vocab(recs, min_count=1)
    s = encode(recs[0], vocab)
    assert s.words == [vocab.word_index["The"], vocab.word_index["dog"]]
    assert s.tree.heads == [-1, 2, 0]
    assert s.tree.labels[1:] == [vocab.label_id("det"), vocab.label_id("root")]
    assert encode(recs[0], vocab, labelled=False).tree.labels[1:] == [0, 0]
    raw = encode_words(["The", "cat"], vocab)
    assert raw.tags is None and raw.tree is None
    assert raw.words[1] == vocab.word_index[GENERIC_UNKNOWN]


def test_strip_punctuation_reattaches():
    rec = SentenceRecord(
        [
            Token("a", "NN", 2, "x"),
            Token(",", ",", 0, "root"),
            Token("b", "NN", 2, "y"),
            Token(".", ".", 3, "p"),
        ]
    )
    out = strip_punctuation(rec, {",", "."})
    assert out.forms == ["a", "b"]
    assert out.heads == [0, 1]
    assert is_well_formed(out.heads)
    assert strip_punctuation(SentenceRecord([Token(".", ".", 0, "p")]), {"."}) is None


def test_normalize_numbers():
    rec = SentenceRecord([Token("12", "CD", 2, "n"), Token("cats", "NNS", 0, "r")])
    assert normalize_numbers(rec).forms == ["NUM", "cats"]
