import itertools

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from patdens.words import Pattern, Word

settings.register_profile(
    "default", deadline=None, max_examples=150,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def brute_images(window, pat):
    """Every image-length vector mapping pat onto window, by trying all of them."""
    k = max(pat) + 1
    mult = [pat.count(v) for v in range(k)]
    m = len(window)
    found = []
    for lengths in itertools.product(range(1, m + 1), repeat=k):
        if sum(r * ell for r, ell in zip(mult, lengths)) != m:
            continue
        images = {}
        pos = 0
        ok = True
        for v in pat:
            piece = tuple(window[pos:pos + lengths[v]])
            if images.setdefault(v, piece) != piece:
                ok = False
                break
            pos += lengths[v]
        if ok:
            found.append(lengths)
    return found


def brute_density_numerator(pat, word):
    n = len(word)
    return sum(1 for a in range(n) for b in range(a + 1, n + 1) if brute_images(word[a:b], pat))


def brute_hom(pat, word):
    n = len(word)
    return sum(len(brute_images(word[a:b], pat)) for a in range(n) for b in range(a + 1, n + 1))


@st.composite
def patterns(draw, max_len=6, max_vars=4):
    syms = draw(st.lists(st.integers(0, max_vars - 1), min_size=1, max_size=max_len))
    return Pattern(tuple(syms))


@st.composite
def words(draw, max_len=12, qs=(1, 2, 3)):
    q = draw(st.sampled_from(qs))
    syms = draw(st.lists(st.integers(0, q - 1), min_size=1, max_size=max_len))
    return Word(tuple(syms), q)


@pytest.fixture
def brute():
    return brute_images


VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
