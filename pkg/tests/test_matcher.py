import itertools
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from patdens.matcher import (Homomorphism, MatchError, count_encounters, density,
                             enumerate_encounters, find_witness, homomorphisms, is_instance)
from patdens.words import Pattern, Word, parse_pattern

from conftest import brute_density_numerator, brute_hom, brute_images, patterns, words

W = Word.from_text
P = parse_pattern


@pytest.mark.parametrize("word, pattern, expected", [
    ("banana", "cool", True),
    ("abab", "aba", False),
    ("abab", "x", True),
    ("aa", "xy", True),
    ("aba", "xx", False),
])
def test_is_instance(word, pattern, expected):
    assert is_instance(W(word), P(pattern)) is expected


def test_witness_banana_cool():
    phi = find_witness(W("banana"), P("cool"))
    assert [im.render() for im in phi.images] == ["b", "an", "a"]
    assert phi.render(names="cool") == "c→b, o→an, l→a"
    assert phi.apply(P("cool")).render() == "banana"


def test_witness_is_lexicographically_smallest():
    # aaaa = xyz with lengths (1,1,2), (1,2,1), (2,1,1): the first wins
    phi = find_witness(W("aaaa"), P("xyz"))
    assert phi.lengths == (1, 1, 2)
    assert [h.lengths for h in homomorphisms(W("aaaa"), P("xyz"))] == [(1, 1, 2), (1, 2, 1), (2, 1, 1)]


def test_witness_absent_and_trivial():
    assert find_witness(W("aba"), P("xx")) is None
    phi = find_witness(W("aa"), P("xy"))
    assert phi.render() == "a→a, b→a"


def test_homomorphism_rejects_empty_images():
    with pytest.raises(ValueError):
        Homomorphism((Word((), 2),))


@pytest.mark.parametrize("pattern, word, expected", [
    ("ab", "cde", 4),
    ("x", "banana", 21),
    ("xx", "banana", 2),
])
def test_count_encounters(pattern, word, expected):
    assert count_encounters(P(pattern), W(word)) == expected


@pytest.mark.parametrize("pattern, word, num, den", [
    ("xx", "banana", 2, 21),
    ("xyx", "science", 2, 28),
    ("huh", "science", 2, 28),
    ("x", "banana", 21, 21),
])
def test_density(pattern, word, num, den):
    d = density(P(pattern), W(word))
    assert (d.numerator, d.denominator) == (num, den)
    assert d.value == Fraction(num, den)


def test_enumerate_encounters_ab_cde():
    enc = enumerate_encounters(P("ab"), W("cde"))
    assert [(e.start, e.end, e.phi.lengths) for e in enc] == [
        (0, 2, (1, 1)), (0, 3, (1, 2)), (0, 3, (2, 1)), (1, 3, (1, 1))]


def test_enumerate_encounters_small_cases():
    enc = enumerate_encounters(P("xx"), W("aa"))
    assert [(e.start, e.end, e.phi.render()) for e in enc] == [(0, 2, "a→a")]
    w = W("science")
    factors = {w.factor(e.start, e.end).render() for e in enumerate_encounters(P("xyx"), w)}
    assert factors == {"cienc", "ence"}


def test_enumeration_guard():
    with pytest.raises(MatchError):
        enumerate_encounters(P("xx"), Word((0,) * 65, 1))
    assert len(enumerate_encounters(P("x"), Word((0,) * 10, 1), guard=10)) == 55


@pytest.mark.parametrize("fn", [is_instance, find_witness])
def test_empty_word_rejected(fn):
    with pytest.raises(MatchError):
        fn(Word((), 2), P("x"))


def test_empty_word_rejected_by_density_and_hom():
    with pytest.raises(MatchError):
        density(P("x"), Word((), 2))
    with pytest.raises(MatchError):
        count_encounters(P("x"), Word((), 2))


def test_long_words_use_compiled_path_consistently():
    # 40 letters exceeds the pure-Python cutoff; compare with the brute-force sum
    w = W("abaababaabaababaababaabaababaabaababaaba")
    for text in ("xx", "xyx", "xyxy"):
        p = P(text)
        assert density(p, w).numerator == brute_density_numerator(p.symbols, w.symbols)
        assert count_encounters(p, w) == brute_hom(p.symbols, w.symbols)


@given(patterns(max_len=5), words(max_len=9))
def test_matcher_agrees_with_brute_force(p, w):
    assert sorted(h.lengths for h in homomorphisms(w, p)) == sorted(brute_images(w.symbols, p.symbols))
    assert density(p, w).numerator == brute_density_numerator(p.symbols, w.symbols)


@given(patterns(max_len=6), words(max_len=14, qs=(2, 3)))
def test_density_numerator_at_most_hom(p, w):
    assert density(p, w).numerator <= count_encounters(p, w)


@given(patterns(max_len=5), words(max_len=10))
def test_witness_soundness(p, w):
    phi = find_witness(w, p)
    assert (phi is not None) == is_instance(w, p)
    if phi is not None:
        assert phi.apply(p) == w


@given(patterns(max_len=5), words(max_len=9))
def test_is_instance_matches_full_window_encounters(p, w):
    full = [e for e in enumerate_encounters(p, w) if (e.start, e.end) == (0, len(w))]
    assert is_instance(w, p) == bool(full)
    assert len(enumerate_encounters(p, w)) == count_encounters(p, w)


@given(patterns(max_len=5), words(max_len=10, qs=(2, 3)), st.randoms(use_true_random=False))
def test_density_invariant_under_renaming(p, w, rnd):
    perm = list(range(w.alphabet_size))
    rnd.shuffle(perm)
    w2 = Word(tuple(perm[s] for s in w.symbols), w.alphabet_size)
    names = list(range(10, 10 + p.k))
    rnd.shuffle(names)
    p2 = Pattern(tuple(names[s] for s in p.symbols))
    assert density(p, w) == density(p2, w2)


@given(words(max_len=10))
def test_density_is_a_probability(w):
    for text in ("x", "xx", "xyx"):
        d = density(P(text), w)
        assert 0 <= d.value <= 1
    assert density(P("x"), w).value == 1


def test_is_instance_exhaustive_small_words():
    p = P("xyyx")
    for n in range(1, 9):
        for syms in itertools.product(range(2), repeat=n):
            assert is_instance(Word(syms, 2), p) == bool(brute_images(syms, p.symbols))
