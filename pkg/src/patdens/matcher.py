"""Instances, encounters and densities of patterns in words.

The reference matcher backtracks over image lengths of the distinct variables
in first-occurrence order.  Repeated occurrences are compared against the
fixed target window as soon as their position is known.  Pruning:

* the remaining length must cover every unassigned occurrence, and must be a
  multiple of the gcd of the unassigned multiplicities;
* when the pattern starts and ends with its first variable, that variable's
  image is a border of the window, so only border lengths are tried.

Long words are handed to the compiled kernels in :mod:`patdens._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Optional

from .words import Pattern, Word

ENUMERATION_GUARD = 64
MEMO_LIMIT = 32


class MatchError(ValueError):
    """Raised for inputs the matching operations do not accept."""


@dataclass(frozen=True)
class Homomorphism:
    """A nonerasing map from pattern variables to nonempty words."""

    images: tuple[Word, ...]

    def __post_init__(self):
        if any(len(im) == 0 for im in self.images):
            raise ValueError("homomorphism images must be nonempty")

    def __getitem__(self, var: int) -> Word:
        return self.images[var]

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(im) for im in self.images)

    def apply(self, p: Pattern) -> Word:
        q = self.images[0].alphabet_size
        syms: list[int] = []
        for v in p.symbols:
            syms.extend(self.images[v].symbols)
        return Word(tuple(syms), q)

    def render(self, p: Pattern | None = None, names: str | None = None) -> str:
        if names is None:
            names = p.render() if p is not None else "abcdefghijklmnopqrstuvwxyz"
        order = []
        for c in names:
            if c not in order:
                order.append(c)
        return ", ".join(f"{name}→{im.render()}" for name, im in zip(order, self.images))

    def as_dict(self) -> Mapping[int, Word]:
        return dict(enumerate(self.images))


@dataclass(frozen=True)
class Encounter:
    start: int
    end: int
    phi: Homomorphism


@dataclass(frozen=True)
class DensityValue:
    numerator: int
    denominator: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return self.numerator / self.denominator


def _require_nonempty(w: Word) -> None:
    if len(w) == 0:
        raise MatchError("the word must be nonempty")


def _borders(window: tuple[int, ...]) -> set[int]:
    m = len(window)
    pi = [0] * m
    for t in range(1, m):
        j = pi[t - 1]
        while j > 0 and window[t] != window[j]:
            j = pi[j - 1]
        if window[t] == window[j]:
            j += 1
        pi[t] = j
    out = set()
    b = pi[-1] if m else 0
    while b > 0:
        out.add(b)
        b = pi[b - 1]
    return out


def _length_vectors(window: tuple[int, ...], pat: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """Image-length vectors of homomorphisms mapping ``pat`` onto ``window``.

    Yielded in lexicographic order of the vector, which fixes witness choice.
    """
    m = len(window)
    plen = len(pat)
    if m < plen:
        return
    k = max(pat) + 1
    mult = [0] * k
    first = [-1] * k
    for idx, v in enumerate(pat):
        mult[v] += 1
        if first[v] < 0:
            first[v] = idx
    seg_end = [first[i + 1] if i + 1 < k else plen for i in range(k)]
    suffix_w = [sum(mult[i + 1:]) for i in range(k)]
    suffix_gcd = []
    for i in range(k):
        g = 0
        for r in mult[i + 1:]:
            g = math.gcd(g, r)
        suffix_gcd.append(g or 1)
    border_set = _borders(window) if plen >= 2 and pat[0] == pat[-1] else None

    lens = [0] * k
    starts = [0] * k

    def segment_ok(lo: int, hi: int, pos: int) -> int:
        for idx in range(lo, hi):
            v = pat[idx]
            L = lens[v]
            src = starts[v]
            if pos + L > m or window[pos:pos + L] != window[src:src + L]:
                return -1
            pos += L
        return pos

    def rec(i: int, used: int) -> Iterator[tuple[int, ...]]:
        rem = m - used
        r = mult[i]
        if i == k - 1:
            candidates = [rem // r] if rem >= r and rem % r == 0 else []
        else:
            hi = (rem - suffix_w[i]) // r
            g = suffix_gcd[i]
            candidates = [c for c in range(1, hi + 1) if (rem - r * c) % g == 0]
            if i == 0 and border_set is not None:
                candidates = [c for c in candidates if c in border_set]
        for ell in candidates:
            lens[i] = ell
            pos = segment_ok(first[i] + 1, seg_end[i], starts[i] + ell)
            if pos < 0:
                continue
            if i == k - 1:
                yield tuple(lens)
            else:
                starts[i + 1] = pos
                yield from rec(i + 1, used + r * ell)

    starts[0] = 0
    yield from rec(0, 0)


def _images(window: tuple[int, ...], pat: tuple[int, ...], lengths: tuple[int, ...], q: int) -> Homomorphism:
    images: list[Optional[Word]] = [None] * len(lengths)
    pos = 0
    for v in pat:
        L = lengths[v]
        if images[v] is None:
            images[v] = Word(window[pos:pos + L], q)
        pos += L
    return Homomorphism(tuple(images))


@lru_cache(maxsize=1 << 18)
def _is_instance_memo(window: tuple[int, ...], pat: tuple[int, ...]) -> bool:
    return next(_length_vectors(window, pat), None) is not None


def _window_is_instance(window: tuple[int, ...], pat: tuple[int, ...]) -> bool:
    if len(window) <= MEMO_LIMIT:
        return _is_instance_memo(window, pat)
    return next(_length_vectors(window, pat), None) is not None


def is_instance(w: Word, p: Pattern) -> bool:
    """True when some nonerasing homomorphism maps ``p`` onto exactly ``w``."""
    _require_nonempty(w)
    return _window_is_instance(w.symbols, p.symbols)


def find_witness(w: Word, p: Pattern) -> Optional[Homomorphism]:
    """The witness with the lexicographically smallest image-length vector."""
    _require_nonempty(w)
    lengths = next(_length_vectors(w.symbols, p.symbols), None)
    if lengths is None:
        return None
    return _images(w.symbols, p.symbols, lengths, w.alphabet_size)


def homomorphisms(w: Word, p: Pattern) -> Iterator[Homomorphism]:
    """Every homomorphism mapping ``p`` onto ``w``, ordered by length vector."""
    _require_nonempty(w)
    for lengths in _length_vectors(w.symbols, p.symbols):
        yield _images(w.symbols, p.symbols, lengths, w.alphabet_size)


def _use_kernel(w: Word) -> bool:
    return len(w) > MEMO_LIMIT


def count_encounters(p: Pattern, w: Word) -> int:
    """hom(p, w): the number of triples (a, b, phi) with w[a, b] = phi(p)."""
    _require_nonempty(w)
    if _use_kernel(w):
        from . import _kernels as K

        cp = K.CompiledPattern.from_pattern(p)
        return K.count_word(cp, w.as_array(), w.alphabet_size, K.MODE_HOM)
    syms = w.symbols
    n = len(syms)
    return sum(
        sum(1 for _ in _length_vectors(syms[a:b], p.symbols))
        for a in range(n)
        for b in range(a + 1, n + 1)
    )


def density(p: Pattern, w: Word) -> DensityValue:
    """Proportion of the (|w|+1 choose 2) substrings of ``w`` that are instances of ``p``."""
    _require_nonempty(w)
    n = len(w)
    denom = n * (n + 1) // 2
    if _use_kernel(w):
        from . import _kernels as K

        cp = K.CompiledPattern.from_pattern(p)
        return DensityValue(K.count_word(cp, w.as_array(), w.alphabet_size, K.MODE_DENSITY), denom)
    syms = w.symbols
    pat = p.symbols
    num = 0
    for a in range(n):
        for b in range(a + len(pat), n + 1):
            if _window_is_instance(syms[a:b], pat):
                num += 1
    return DensityValue(num, denom)


def enumerate_encounters(p: Pattern, w: Word, guard: int = ENUMERATION_GUARD) -> list[Encounter]:
    """All encounters ordered by (start, end, image lengths)."""
    _require_nonempty(w)
    if len(w) > guard:
        raise MatchError(f"word length {len(w)} exceeds the enumeration guard {guard}")
    syms = w.symbols
    n = len(syms)
    out = []
    for a in range(n):
        for b in range(a + 1, n + 1):
            window = syms[a:b]
            for lengths in _length_vectors(window, p.symbols):
                out.append(Encounter(a, b, _images(window, p.symbols, lengths, w.alphabet_size)))
    return out
