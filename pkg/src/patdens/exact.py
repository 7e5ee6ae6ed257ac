"""Exact oracles: instance probabilities, expectations, composition counts and bounds.

Probabilities and expectations are :class:`fractions.Fraction` values.  Floats
only appear in the explicit bound formulas and in :func:`bordered_limit`.

Everything that enumerates the word space goes through a work-unit guard:
``q**n * n`` units per length, capped by :func:`work_budget`.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

from . import _kernels as K
from .matcher import _length_vectors
from .words import Pattern, Word

DEFAULT_BUDGET = 10**9
BUDGET_ENV = "PATDENS_BUDGET"

# below this many work units the generic kernels beat compiling a specialised one
_SPECIALISE_ABOVE = 1 << 22


class BudgetExceeded(RuntimeError):
    """Raised when an operation needs more work units than the guard allows."""

    def __init__(self, required: int, budget: int, what: str = "operation"):
        super().__init__(f"{what} needs {required:.3g} work units; budget is {budget:.3g} "
                         f"(raise it with {BUDGET_ENV})")
        self.required = required
        self.budget = budget


def work_budget(default: int = DEFAULT_BUDGET) -> int:
    """The work-unit guard: ``PATDENS_BUDGET`` if set, otherwise ``default``."""
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(float(raw))
    except ValueError:
        raise ValueError(f"{BUDGET_ENV} must be a number, got {raw!r}") from None
    if value <= 0:
        raise ValueError(f"{BUDGET_ENV} must be positive, got {raw!r}")
    return value


def check_budget(required: int, what: str = "operation", budget: int | None = None) -> None:
    limit = work_budget() if budget is None else budget
    if required > limit:
        raise BudgetExceeded(required, limit, what)


def default_workers() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class CompositionSpec:
    """Multiplicity vector (r_1, ..., r_k) of a pattern's variables."""

    multiplicities: tuple[int, ...]

    def __post_init__(self):
        r = tuple(int(x) for x in self.multiplicities)
        if not r or any(x < 1 for x in r):
            raise ValueError("multiplicities must be a nonempty tuple of positive integers")
        object.__setattr__(self, "multiplicities", r)

    @classmethod
    def from_pattern(cls, p: Pattern) -> "CompositionSpec":
        return cls(p.multiplicities)

    @property
    def k(self) -> int:
        return len(self.multiplicities)

    @cached_property
    def d(self) -> int:
        return math.gcd(*self.multiplicities)

    @property
    def r(self) -> int:
        return min(self.multiplicities)


def generalized_binomial(x: float, y: int) -> float:
    """(x choose y) as prod_{i<y} (x - i) / y!, defined for real x."""
    if y < 0:
        return 0.0
    num = 1.0
    for i in range(y):
        num *= x - i
    return num / math.factorial(y)


def _require_doubled(p: Pattern) -> None:
    if not p.is_doubled:
        raise ValueError(f"pattern {p} is not doubled; the bound needs every variable twice")


# --------------------------------------------------------------------------
# compositions


def count_compositions(spec: CompositionSpec, n: int) -> int:
    """Number of positive tuples (a_1..a_k) with sum a_i r_i = n."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    ways = [1] + [0] * n
    for r in spec.multiplicities:
        nxt = [0] * (n + 1)
        # at least one copy of r: shift by r, then allow any number more
        for t in range(r, n + 1):
            nxt[t] = ways[t - r] + nxt[t - r]
        ways = nxt
    return ways[n]


def frobenius_coeffs(spec: CompositionSpec, n: int) -> Optional[tuple[int, ...]]:
    """Positive a_i with sum a_i r_i = d n, or None when no such tuple exists.

    Ties are broken by minimising a_k first, then a_{k-1}, and so on.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    r = spec.multiplicities
    total = spec.d * n
    # reach[i][t]: t is a positive combination of r_1..r_i
    reach = [[False] * (total + 1)]
    reach[0][0] = True
    for ri in r:
        prev = reach[-1]
        cur = [False] * (total + 1)
        for t in range(ri, total + 1):
            cur[t] = prev[t - ri] or cur[t - ri]
        reach.append(cur)
    if not reach[-1][total]:
        return None
    coeffs = [0] * len(r)
    remaining = total
    for i in range(len(r) - 1, -1, -1):
        a = 1
        while not reach[i][remaining - a * r[i]]:
            a += 1
        coeffs[i] = a
        remaining -= a * r[i]
    return tuple(coeffs)


# --------------------------------------------------------------------------
# closed-form bounds


def instance_count_bound(p: Pattern, q: int, n: int) -> float:
    """Upper bound binom(n/d + k + 1, k + 1) q^{n(1 - r)/r} on I_n for doubled p."""
    _require_doubled(p)
    if q < 2:
        raise ValueError("the bound needs q >= 2")
    spec = CompositionSpec.from_pattern(p)
    k, d, r = spec.k, spec.d, spec.r
    return generalized_binomial(n / d + k + 1, k + 1) * q ** (n * (1 - r) / r)


def tail_bound(p: Pattern, q: int, n: int, f_value: float) -> float:
    """n^{k+3} q^{f (1 - r)/r}: bounds P(some instance factor is longer than f)."""
    _require_doubled(p)
    if not f_value > 0:
        raise ValueError("f_value must be positive")
    r = p.min_multiplicity
    if math.isinf(f_value):
        return 0.0
    return float(n) ** (p.k + 3) * q ** (f_value * (1 - r) / r)


def expected_hom(p: Pattern, q: int, n: int) -> Fraction:
    """E hom(p, W) for W uniform in q^n, from a polynomial in the image lengths."""
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    # coef[L] = sum over length vectors of total length L of q^{sum l - L}
    coef: list[Fraction] = [Fraction(1)] + [Fraction(0)] * n
    for r in p.multiplicities:
        nxt = [Fraction(0)] * (n + 1)
        for L, c in enumerate(coef):
            if not c:
                continue
            ell = 1
            while L + r * ell <= n:
                nxt[L + r * ell] += c * Fraction(1, q ** ((r - 1) * ell))
                ell += 1
        coef = nxt
    return sum(((n - L + 1) * c for L, c in enumerate(coef) if c), Fraction(0))


# --------------------------------------------------------------------------
# exhaustive enumeration


def _ranges(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    step, extra = divmod(total, parts)
    out, lo = [], 0
    for i in range(parts):
        hi = lo + step + (1 if i < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def _engine(p: Pattern, q: int, n: int):
    from ._codegen import engine_for

    return engine_for(p, q, n, specialise=q**n * n > _SPECIALISE_ABOVE)


def _fan_out(p: Pattern, q: int, n: int, job, workers: int | None):
    """Run job(engine, lo, hi) over contiguous slices of the word space."""
    total = q**n
    workers = workers or default_workers()
    # enough slices to balance, few enough that buffers stay cheap
    slices = _ranges(total, workers * 4 if total >= 1 << 14 else 1)
    if workers == 1 or len(slices) == 1:
        eng = _engine(p, q, n)
        return [job(eng, lo, hi) for lo, hi in slices]

    def run(span):
        return job(_engine(p, q, n), *span)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, slices))


def _guard(q: int, lengths, what: str) -> None:
    check_budget(sum(q**m * m for m in lengths), what)


@lru_cache(maxsize=4096)
def _instance_count(p: Pattern, q: int, n: int) -> int:
    if n < len(p):
        return 0
    if q == 1:
        return 1 if count_compositions(CompositionSpec.from_pattern(p), n) else 0
    parts = _fan_out(p, q, n, lambda e, lo, hi: e.exhaustive(lo, hi, K.MODE_SURJECTIVE)[0], None)
    return sum(parts)


def instance_probability(p: Pattern, q: int, n: int, workers: int | None = None) -> Fraction:
    """I_n: the fraction of the q^n words of length n that are instances of p."""
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    if n < len(p):
        return Fraction(0)
    if q > 1:
        _guard(q, [n], "instance_probability")
    return Fraction(_instance_count(p, q, n), q**n)


def expected_density(p: Pattern, q: int, n: int, workers: int | None = None) -> Fraction:
    """E delta(p, W) for W uniform in q^n, via sum_m (n + 1 - m) I_m."""
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    lengths = range(len(p), n + 1)
    if q > 1:
        _guard(q, lengths, "expected_density")
    total = sum((Fraction(n + 1 - m) * instance_probability(p, q, m, workers) for m in lengths),
                Fraction(0))
    return total / (n * (n + 1) // 2)


def count_histogram(p: Pattern, q: int, n: int, mode: int = K.MODE_DENSITY,
                    workers: int | None = None) -> dict[int, int]:
    """How many length-n words have each density numerator (or encounter count)."""
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    _guard(q, [n], "count_histogram")
    if mode == K.MODE_HOM:
        size = int(expected_hom(p, 1, n)) + 1  # q = 1 maximises hom
    else:
        size = n * (n + 1) // 2 + 1

    def job(eng, lo, hi):
        return eng.exhaustive(lo, hi, mode, size)[1]

    hist = np.zeros(size, dtype=np.int64)
    for part in _fan_out(p, q, n, job, workers):
        hist += part
    return {int(c): int(h) for c, h in enumerate(hist) if h}


def exhaustive_mean(p: Pattern, q: int, n: int, mode: int = K.MODE_DENSITY,
                    workers: int | None = None) -> Fraction:
    """Average density (or hom, or indicator) over all q^n words, by enumeration."""
    hist = count_histogram(p, q, n, mode, workers)
    total = sum(c * h for c, h in hist.items())
    denom = q**n * (n * (n + 1) // 2 if mode == K.MODE_DENSITY else 1)
    return Fraction(total, denom)


def enumerate_instances(p: Pattern, q: int, n: int, workers: int | None = None) -> list[Word]:
    """All length-n instances of p over q letters, in lexicographic order."""
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    if n < len(p):
        return []
    _guard(q, [n], "enumerate_instances")
    parts = _fan_out(p, q, n, lambda e, lo, hi: e.instances(lo, hi), workers)
    out = []
    for idx in np.concatenate(parts) if parts else []:
        out.append(Word(_index_digits(int(idx), q, n), q))
    return out


def _index_digits(index: int, q: int, n: int) -> tuple[int, ...]:
    digits = [0] * n
    for t in range(n - 1, -1, -1):
        index, digits[t] = divmod(index, q)
    return tuple(digits)


# --------------------------------------------------------------------------
# small-witness fraction


def base_symbols(p: Pattern) -> tuple[int, ...]:
    """p with every minimum-multiplicity variable deleted."""
    r = p.min_multiplicity
    return p.remove_variables(v for v, m in enumerate(p.multiplicities) if m == r)


def has_small_witness(w: Word, p: Pattern) -> bool:
    """Some witness phi for w has |phi(U)|^2 < |w|, U = :func:`base_symbols`."""
    mult = p.multiplicities
    r = p.min_multiplicity
    heavy = [v for v, m in enumerate(mult) if m != r]
    n = len(w)
    for lengths in _length_vectors(w.symbols, p.symbols):
        size = sum(mult[v] * lengths[v] for v in heavy)
        if size * size < n:
            return True
    return False


def lemma_base_fraction(p: Pattern, q: int, n: int, workers: int | None = None) -> Fraction:
    """Fraction of length-n instances with a witness satisfying |phi(U)| < sqrt(n).

    Only lengths divisible by the gcd d of the multiplicities are accepted.
    With U empty every witness qualifies and the result is 1.
    """
    d = CompositionSpec.from_pattern(p).d
    if n % d:
        raise ValueError(f"n = {n} is not a multiple of d = {d}")
    if not base_symbols(p):
        return Fraction(1)
    instances = enumerate_instances(p, q, n, workers)
    if not instances:
        raise ValueError(f"no length-{n} instances of {p} over {q} letters")
    good = sum(1 for w in instances if has_small_witness(w, p))
    return Fraction(good, len(instances))


# --------------------------------------------------------------------------
# the limit of I_n(aba)


def unbordered_counts(q: int, n_max: int) -> list[int]:
    """u[m] = number of unbordered words of length m (index 0 unused)."""
    if q < 1 or n_max < 1:
        raise ValueError("need q >= 1 and n_max >= 1")
    u = [0] * (n_max + 1)
    u[1] = q
    for m in range(2, n_max + 1):
        u[m] = q * u[m - 1] - (u[m // 2] if m % 2 == 0 else 0)
    return u


def bordered_limit(q: int, tol: float = 1e-7) -> float:
    """lim_n I_n(aba) = 1 - lim_n u_n / q^n, accurate to within ``tol``.

    v_m = u_m / q^m never increases, falls only at even m, and falls by
    v_{m/2} q^{-m/2} <= q^{-m/2} there; once the remaining drops sum to less
    than the tolerance the iteration stops.
    """
    if q < 2:
        raise ValueError("need q >= 2")
    if not tol > 0:
        raise ValueError("tol must be positive")
    # exact prefix, then floats once the terms are tiny
    v = [0.0, 1.0]
    m = 1
    while True:
        m += 1
        v.append(v[m - 1] - (v[m // 2] * q ** -(m // 2) if m % 2 == 0 else 0.0))
        # later drops happen at even m' > m, each at most q^{-m'/2}
        half = m // 2 + 1
        if q ** (1 - half) / (q - 1) < tol / 4:
            return 1.0 - v[m]
