import json

import pytest
from hypothesis import given, settings, strategies as st

from awpctc.text_metrics import (Op, UndefinedMetricError, Vocabulary, cer, collapse, collapse_ids,
                                 edit_distance, wer, word_errors)


def ids(v, s):
    return [v.blank_id if ch == "∅" else v.token_id(ch) for ch in s]


@pytest.mark.parametrize("alignment,expected", [
    ("aa∅c", "ac"),
    ("∅∅∅", ""),
    ("c∅c∅", "cc"),
    ("cc∅aatt∅", "cat"),
])
def test_collapse(cat_vocab, alignment, expected):
    assert collapse(ids(cat_vocab, alignment), cat_vocab) == expected


def test_vocabulary_ids_dense_and_blank_unique(cat_vocab):
    assert cat_vocab.blank_id == 0
    assert cat_vocab.symbols.count("∅") == 1
    assert cat_vocab.size == 7
    assert cat_vocab.space_id == cat_vocab.token_id(" ")
    assert cat_vocab.decode(cat_vocab.encode("the cat")) == "the cat"


def test_vocabulary_json_roundtrip(cat_vocab, tmp_path):
    obj = cat_vocab.to_json()
    assert obj == {"tokens": list("aceht") + [" "], "blank": "∅", "space": " "}
    path = tmp_path / "vocab.json"
    cat_vocab.save(path)
    assert Vocabulary.load(path) == cat_vocab
    assert json.loads(path.read_text(encoding="utf-8"))["blank"] == "∅"


def test_vocabulary_keeps_explicit_blank_position():
    v = Vocabulary.from_tokens(["a", "b", "∅"])
    assert v.blank_id == 2
    assert v.tokens == ("a", "b")


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(("∅", "a", "a"))


def test_edit_distance_identity():
    cost, script = edit_distance("cat", "cat")
    assert cost == 0
    assert all(o.op is Op.MATCH for o in script.ops)


def test_edit_distance_single_substitution():
    cost, script = edit_distance("cat", "cet")
    assert cost == 1
    assert script.count(Op.SUBSTITUTE) == 1


def test_edit_distance_word_level():
    cost, _ = edit_distance("the cat".split(), "tha cet".split())
    assert cost == 2


def test_backtrace_tie_break_prefers_substitute_over_indels():
    # "ab" -> "ba": two substitutions or delete+insert both cost 2
    _, script = edit_distance("ab", "ba")
    assert [o.op for o in script.ops] == [Op.SUBSTITUTE, Op.SUBSTITUTE]
    # deleting is preferred over inserting when both are optimal
    _, script = edit_distance("ab", "b")
    assert [o.op for o in script.ops] == [Op.DELETE, Op.MATCH]


@pytest.mark.parametrize("ref,hyp,expected", [
    ("the cat", "tha cet", 1.0),
    ("the cat", "tha cat", 0.5),
    ("a b c", "a b c", 0.0),
    ("a b", "", 1.0),
])
def test_wer(ref, hyp, expected):
    assert wer(ref, hyp) == expected


def test_cer():
    assert cer("the cat", "the cat") == 0.0
    assert cer("the cat", "tha cet") == pytest.approx(2 / 7)


def test_equal_cer_different_wer():
    ref = "ab cd"
    h1, h2 = "xb yd", "xy cd"
    assert cer(ref, h1) == cer(ref, h2)
    assert wer(ref, h1) != wer(ref, h2)


def test_empty_reference_is_undefined():
    with pytest.raises(UndefinedMetricError):
        wer("", "a")
    with pytest.raises(UndefinedMetricError):
        cer("  ", "a")


def test_repeated_spaces_are_one_separator():
    assert word_errors("ab cd", "ab   cd") == (0, 2)
    assert cer("ab cd", "ab  cd") == 0.0


words = st.lists(st.sampled_from("abc "), max_size=8).map("".join)


@settings(max_examples=150, deadline=None)
@given(words, words, words)
def test_edit_distance_metric_properties(x, y, z):
    dxy, sxy = edit_distance(x, y)
    assert edit_distance(x, x)[0] == 0
    assert dxy == edit_distance(y, x)[0]
    assert dxy <= edit_distance(x, z)[0] + edit_distance(z, y)[0]
    assert sxy.cost == dxy
    assert "".join(sxy.apply(x, y)) == y


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=12), st.integers(0, 5))
def test_wer_invariant_to_trailing_blank_padding(alignment, pad):
    v = Vocabulary.from_tokens(["a", "b", " "])
    ref = "ab a"
    hyp = collapse(alignment, v)
    padded = collapse(list(alignment) + [v.blank_id] * pad, v)
    assert wer(ref, hyp) == wer(ref, padded)
    assert v.blank_id not in collapse_ids(alignment, v.blank_id)
