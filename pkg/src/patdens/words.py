"""Patterns, words and their letter statistics.

Both patterns and words are immutable tuples of small integers.  A pattern is
always stored in canonical form: variables are numbered ``0..k-1`` in order of
first occurrence, so two patterns that are renamings of each other compare
equal.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

_LOWER = string.ascii_lowercase


def _canonical(symbols: Iterable) -> tuple[int, ...]:
    names: dict = {}
    out = []
    for s in symbols:
        if s not in names:
            names[s] = len(names)
        out.append(names[s])
    return tuple(out)


@dataclass(frozen=True)
class Pattern:
    """A pattern word over variables, kept in first-occurrence canonical form."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        syms = _canonical(self.symbols)
        if not syms:
            raise ValueError("pattern must be nonempty")
        object.__setattr__(self, "symbols", syms)

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return self.render()

    def render(self) -> str:
        if self.k > 26:
            raise ValueError("cannot render a pattern with more than 26 variables")
        return "".join(_LOWER[s] for s in self.symbols)

    @cached_property
    def k(self) -> int:
        """Number of distinct variables."""
        return max(self.symbols) + 1

    @cached_property
    def multiplicities(self) -> tuple[int, ...]:
        counts = Counter(self.symbols)
        return tuple(counts[i] for i in range(self.k))

    @property
    def min_multiplicity(self) -> int:
        return min(self.multiplicities)

    @property
    def gcd(self) -> int:
        return reduce(math.gcd, self.multiplicities)

    @property
    def repeats(self) -> int:
        return len(self.symbols) - self.k

    @property
    def is_doubled(self) -> bool:
        return self.min_multiplicity >= 2

    def remove_variables(self, variables: Iterable[int]) -> tuple[int, ...]:
        """Symbols of the pattern with the given variables deleted (may be empty)."""
        drop = set(variables)
        return tuple(s for s in self.symbols if s not in drop)


@dataclass(frozen=True)
class Word:
    """A concrete word over the alphabet ``{0, ..., alphabet_size - 1}``."""

    symbols: tuple[int, ...]
    alphabet_size: int

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        q = int(self.alphabet_size)
        if q < 1:
            raise ValueError("alphabet size must be at least 1")
        if any(s < 0 or s >= q for s in syms):
            raise ValueError(f"word symbols must lie in [0, {q})")
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "alphabet_size", q)

    @classmethod
    def from_text(cls, text: str, alphabet_size: int | None = None) -> "Word":
        """Parse lowercase ASCII, mapping ``'a' + i`` to symbol ``i``."""
        if any(c not in _LOWER for c in text):
            raise ValueError(f"word must consist of lowercase ASCII letters: {text!r}")
        syms = tuple(ord(c) - ord("a") for c in text)
        if alphabet_size is None:
            alphabet_size = max(syms, default=0) + 1
        return cls(syms, alphabet_size)

    @classmethod
    def from_array(cls, arr, alphabet_size: int) -> "Word":
        return cls(tuple(int(x) for x in arr), alphabet_size)

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return self.render()

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Word(self.symbols[item], self.alphabet_size)
        return self.symbols[item]

    def render(self) -> str:
        if self.alphabet_size > 26:
            return " ".join(str(s) for s in self.symbols)
        return "".join(_LOWER[s] for s in self.symbols)

    def factor(self, i: int, j: int) -> "Word":
        """The factor ``W[i, j]``: ``j - i`` letters starting with the ``(i+1)``-th."""
        if not 0 <= i <= j <= len(self):
            raise IndexError(f"bad factor bounds ({i}, {j}) for length {len(self)}")
        return Word(self.symbols[i:j], self.alphabet_size)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int8)


class LetterStats(NamedTuple):
    length: int
    distinct: int
    repeats: int


def parse_pattern(text: str) -> Pattern:
    """Read a pattern from ASCII letters (case-sensitive), canonicalising names.

    >>> parse_pattern("huh").symbols
    (0, 1, 0)
    """
    if not text:
        raise ValueError("pattern text must be nonempty")
    if any(c not in string.ascii_letters for c in text):
        raise ValueError(f"pattern must consist of ASCII letters: {text!r}")
    return Pattern(tuple(text))


def letter_stats(w: Union[Word, Pattern, Sequence]) -> LetterStats:
    syms = w.symbols if isinstance(w, (Word, Pattern)) else tuple(w)
    distinct = len(set(syms))
    return LetterStats(len(syms), distinct, len(syms) - distinct)


def is_doubled(p: Pattern) -> bool:
    return p.is_doubled


def zimin(n: int) -> Pattern:
    """Zimin pattern ``Z_n`` with ``Z_1 = x_1`` and ``Z_{i+1} = Z_i x_{i+1} Z_i``."""
    if n < 1:
        raise ValueError("zimin(n) needs n >= 1; Z_0 is the empty word")
    syms: list[int] = []
    for i in range(n):
        syms = syms + [i] + syms
    return Pattern(tuple(syms))


def is_anagram(p1: Pattern, p2: Pattern) -> bool:
    """True when some variable bijection makes the multiplicity profiles agree."""
    return sorted(p1.multiplicities) == sorted(p2.multiplicities)
