import pytest
from hypothesis import given, strategies as st

from patdens.words import (LetterStats, Pattern, Word, is_anagram, is_doubled, letter_stats,
                           parse_pattern, zimin)

from conftest import patterns


@pytest.mark.parametrize("text, symbols", [
    ("huh", (0, 1, 0)),
    ("cool", (0, 1, 1, 2)),
    ("ZzZ", (0, 1, 0)),
    ("a", (0,)),
])
def test_parse_pattern_canonicalises(text, symbols):
    assert parse_pattern(text).symbols == symbols


def test_renamings_compare_equal():
    assert parse_pattern("xyxy") == parse_pattern("abab") == Pattern((5, 2, 5, 2))


@pytest.mark.parametrize("text", ["", "ab1", "a b", "é"])
def test_parse_pattern_rejects(text):
    with pytest.raises(ValueError):
        parse_pattern(text)


def test_pattern_statistics():
    p = parse_pattern("xyxxz")
    assert p.k == 3
    assert p.multiplicities == (3, 1, 1)
    assert p.min_multiplicity == 1
    assert p.gcd == 1
    assert p.repeats == 2
    assert parse_pattern("xxyyyy").gcd == 2


@pytest.mark.parametrize("text, stats", [
    ("banana", (6, 3, 3)),
    ("a", (1, 1, 0)),
    ("abacaba", (7, 3, 4)),
])
def test_letter_stats(text, stats):
    assert letter_stats(Word.from_text(text)) == LetterStats(*stats)


def test_letter_stats_of_pattern_and_empty_word():
    assert letter_stats(parse_pattern("cool")) == (4, 3, 1)
    assert letter_stats(Word((), 2)) == (0, 0, 0)


@pytest.mark.parametrize("text, doubled", [("xx", True), ("aba", False), ("xyxy", True), ("x", False)])
def test_is_doubled(text, doubled):
    assert is_doubled(parse_pattern(text)) is doubled


@pytest.mark.parametrize("n, text", [(1, "a"), (2, "aba"), (3, "abacaba")])
def test_zimin(n, text):
    assert zimin(n).render() == text


def test_zimin_zero_rejected():
    with pytest.raises(ValueError):
        zimin(0)


@pytest.mark.parametrize("n", range(1, 9))
def test_zimin_shape(n):
    z = zimin(n)
    assert len(z) == 2**n - 1
    assert z.k == n
    assert sorted(z.multiplicities).count(1) == 1
    assert not z.is_doubled


@pytest.mark.parametrize("a, b, expected", [
    ("xyxy", "xxyy", True), ("xx", "xy", False), ("abba", "aabb", True), ("xxy", "xyy", True),
])
def test_is_anagram(a, b, expected):
    assert is_anagram(parse_pattern(a), parse_pattern(b)) is expected


def test_word_validation_and_factors():
    w = Word.from_text("banana")
    assert w.alphabet_size == 14
    assert w.factor(1, 5).render() == "anan"
    assert w.factor(2, 2).symbols == ()
    with pytest.raises(IndexError):
        w.factor(4, 2)
    with pytest.raises(ValueError):
        Word((0, 3), 3)
    with pytest.raises(ValueError):
        Word.from_text("Banana")
    assert Word((0, 1), 30).render() == "0 1"


@given(patterns(max_len=10, max_vars=6))
def test_render_parse_roundtrip(p):
    assert parse_pattern(p.render()) == p


@given(st.lists(st.integers(0, 5), max_size=30))
def test_letter_stats_identity(syms):
    s = letter_stats(syms)
    assert s.length == s.distinct + s.repeats


@given(patterns(), patterns(), patterns())
def test_is_anagram_is_an_equivalence(a, b, c):
    assert is_anagram(a, a)
    assert is_anagram(a, b) == is_anagram(b, a)
    if is_anagram(a, b) and is_anagram(b, c):
        assert is_anagram(a, c)


@given(patterns(max_len=8))
def test_multiplicities_sum_to_length(p):
    assert sum(p.multiplicities) == len(p)
    firsts = [p.symbols.index(v) for v in range(p.k)]
    assert firsts == sorted(firsts)
