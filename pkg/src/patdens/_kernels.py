"""Compiled matching, counting and sampling kernels.

Two counting strategies live here:

* ``match_window`` decides (or counts the homomorphisms of) one fixed window by
  backtracking over image lengths in first-occurrence order.  When the pattern
  starts and ends with the same variable, that variable's image is a border of
  the window, so its candidate lengths are read off the prefix-function chain.
* ``enumerate_from`` lists every instance window starting at a given position.
  It is only used for doubled patterns, where every image is bounded by the
  length of the longest repeated factor of the word.

All kernels release the GIL so callers may fan out over threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .words import Pattern

_JIT = dict(cache=True, nogil=True)

# Counting modes for the batch kernels.
MODE_DENSITY = 0
MODE_SURJECTIVE = 1
MODE_HOM = 2

# Longest gram cached in the next-occurrence chains.
_CHAIN_TABLE_LIMIT = 1 << 16


@dataclass(frozen=True)
class CompiledPattern:
    """Array form of a pattern, as consumed by the kernels."""

    pat: np.ndarray
    first: np.ndarray
    mult: np.ndarray
    suffix_w: np.ndarray
    suffix_gcd: np.ndarray
    seg_end: np.ndarray
    chain_var: np.ndarray
    use_border: bool
    doubled: bool

    @classmethod
    def from_pattern(cls, p: Pattern) -> "CompiledPattern":
        syms = p.symbols
        k = p.k
        plen = len(syms)
        first = [syms.index(i) for i in range(k)]
        mult = list(p.multiplicities)
        suffix_w = [sum(mult[i + 1:]) for i in range(k)]
        suffix_gcd = []
        for i in range(k):
            g = 0
            for r in mult[i + 1:]:
                g = math.gcd(g, r)
            suffix_gcd.append(g if g else 1)
        seg_end = [first[i + 1] if i + 1 < k else plen for i in range(k)]
        chain_var = []
        for i in range(k):
            nxt = first[i] + 1
            chain_var.append(syms[nxt] if nxt < plen and syms[nxt] < i else -1)
        i64 = lambda xs: np.asarray(xs, dtype=np.int64)
        return cls(
            pat=i64(syms),
            first=i64(first),
            mult=i64(mult),
            suffix_w=i64(suffix_w),
            suffix_gcd=i64(suffix_gcd),
            seg_end=i64(seg_end),
            chain_var=i64(chain_var),
            use_border=plen >= 2 and syms[0] == syms[-1],
            doubled=p.is_doubled,
        )

    @property
    def needs_chains(self) -> bool:
        return bool((self.chain_var >= 0).any())

    def args(self):
        return (self.pat, self.first, self.mult, self.suffix_w, self.suffix_gcd,
                self.seg_end, self.chain_var, self.use_border)


def chain_depth(q: int) -> int:
    """Largest gram length whose code table stays below the size limit."""
    kc = 1
    while q ** (kc + 1) <= _CHAIN_TABLE_LIMIT and kc < 10:
        kc += 1
    return kc


# --------------------------------------------------------------------------
# string primitives


@nb.njit(**_JIT)
def prefix_function(w, s, end, pi):
    """pi[t] = longest proper border of w[s:s+t+1] for t < end - s."""
    length = end - s
    if length <= 0:
        return
    pi[0] = 0
    for t in range(1, length):
        j = pi[t - 1]
        c = w[s + t]
        while j > 0 and c != w[s + j]:
            j = pi[j - 1]
        if c == w[s + j]:
            j += 1
        pi[t] = j


@nb.njit(**_JIT)
def longest_repeat(w, n, q):
    """Length of the longest factor occurring at two distinct positions.

    Exact unless more than 64 positions share their first K0 letters, in which
    case n is returned as an upper bound.

    Positions are sorted by a base-(q+1) code of their next K0 letters (the
    word is padded with the extra letter q).  Within K0 letters the longest
    common extension is realised by neighbours in that order; equal codes are
    resolved by direct comparison.
    """
    if n < 2:
        return 0
    base = q + 1
    k0 = 0
    top = 1
    while top <= (1 << 61) // base:
        top *= base
        k0 += 1
    # top == base ** k0; place value of the leading digit is base ** (k0 - 1)
    lead = top // base
    codes = np.empty(n, dtype=np.int64)
    # code of the all-padding suffix is top - 1; roll leftwards
    c = top - 1
    for t in range(n - 1, -1, -1):
        c = w[t] * lead + c // base
        codes[t] = c
    order = np.argsort(codes)
    places = np.empty(k0 + 1, dtype=np.int64)
    places[0] = top
    for L in range(1, k0 + 1):
        places[L] = places[L - 1] // base
    best = 0
    idx = 1
    while idx < n:
        i = order[idx - 1]
        j = order[idx]
        if codes[i] == codes[j]:
            g0 = idx - 1
            g1 = idx
            while g1 + 1 < n and codes[order[g1 + 1]] == codes[i]:
                g1 += 1
            if g1 - g0 + 1 > 64:
                return n
            for x in range(g0, g1 + 1):
                for y in range(x + 1, g1 + 1):
                    a = order[x]
                    b = order[y]
                    L = k0
                    while a + L < n and b + L < n and w[a + L] == w[b + L]:
                        L += 1
                    if L > best:
                        best = L
            idx = g1 + 1
            continue
        ci = codes[i]
        cj = codes[j]
        while best < k0 and ci // places[best + 1] == cj // places[best + 1]:
            best += 1
        idx += 1
    return best


@nb.njit(**_JIT)
def build_chains(w, n, q, kc, nxt, last, codes):
    """nxt[t, K-1] = next position > t holding the same K-gram, or -1."""
    for t in range(n):
        codes[t] = w[t]
    for K in range(1, kc + 1):
        if K > 1:
            for t in range(n - K + 1):
                codes[t] = codes[t] * q + w[t + K - 1]
        size = q ** K
        for c in range(size):
            last[c] = -1
        for t in range(max(n - K + 1, 0), n):
            nxt[t, K - 1] = -1
        for t in range(n - K, -1, -1):
            c = codes[t]
            nxt[t, K - 1] = last[c]
            last[c] = t


@nb.njit(**_JIT)
def _has_repeat(w, n, q, L, keys, stamps, box):
    """True when two distinct positions start the same L-gram."""
    if L >= n:
        return False
    box[0] += 1
    st = box[0]
    size = keys.shape[0]
    shift = np.uint64(64)
    s = size
    while s > 1:
        s >>= 1
        shift -= np.uint64(1)
    mask = size - 1
    top = q ** (L - 1)
    code = 0
    for t in range(L):
        code = code * q + w[t]
    for t in range(n - L + 1):
        if t > 0:
            code = (code - w[t - 1] * top) * q + w[t + L - 1]
        h = np.int64((np.uint64(code) * np.uint64(0x9E3779B97F4A7C15)) >> shift) & mask
        while stamps[h] == st:
            if keys[h] == code:
                return True
            h = (h + 1) & mask
        stamps[h] = st
        keys[h] = code
    return False


@nb.njit(**_JIT)
def repeat_bound(w, n, q, keys, stamps, box):
    """Upper bound on the longest repeated factor, usually within 2 of exact.

    ``keys`` and ``stamps`` form a hash table whose size is a power of two of
    at least 2n; ``box[0]`` is a running stamp.
    """
    if n < 2:
        return 0
    if q == 1:
        return n - 1
    cap = 0
    v = 1
    while v <= (1 << 62) // q:
        v *= q
        cap += 1
    guess = int(math.ceil(2.0 * math.log(n) / math.log(q))) - 1
    L = max(guess, 1)
    if L > cap:
        return longest_repeat(w, n, q)
    if _has_repeat(w, n, q, L, keys, stamps, box):
        L += 2
        while L <= cap and _has_repeat(w, n, q, L, keys, stamps, box):
            L += 2
        if L > cap:
            return longest_repeat(w, n, q)
    return L - 1


# --------------------------------------------------------------------------
# matching


@nb.njit(**_JIT)
def _check_segment(w, end, pat, lo, hi, pos, lens, starts):
    for idx in range(lo, hi):
        v = pat[idx]
        L = lens[v]
        src = starts[v]
        if pos + L > end:
            return -1
        for t in range(L):
            if w[pos + t] != w[src + t]:
                return -1
        pos += L
    return pos


@nb.njit(**_JIT)
def match_window(w, s, m, pat, first, mult, suffix_w, suffix_gcd, seg_end,
                 chain_var, use_border, pi, count_all, lens, starts, used, cur):
    """Decide whether w[s:s+m] is an instance; with count_all, count homomorphisms.

    ``pi`` must hold the prefix function of ``w[s:]`` for at least m letters
    whenever ``use_border`` is set.
    """
    plen = pat.shape[0]
    if m < plen:
        return 0
    k = mult.shape[0]
    end = s + m
    total = 0
    starts[0] = s
    used[0] = 0
    cur[0] = -1
    level = 0
    while level >= 0:
        i = level
        rem = m - used[i]
        r = mult[i]
        ell = 0
        if i == k - 1:
            if cur[i] == -1:
                cur[i] = 0
                if rem >= r and rem % r == 0:
                    ell = rem // r
        else:
            hi = (rem - suffix_w[i]) // r
            g = suffix_gcd[i]
            if i == 0 and use_border:
                if cur[0] != 0:
                    b = pi[m - 1] if cur[0] == -1 else pi[cur[0] - 1]
                    while b > 0 and (b > hi or (rem - r * b) % g != 0):
                        b = pi[b - 1]
                    cur[0] = b
                    ell = b
            else:
                c0 = 1 if cur[i] == -1 else cur[i] + 1
                while c0 <= hi and (rem - r * c0) % g != 0:
                    c0 += 1
                if c0 <= hi:
                    ell = c0
                    cur[i] = c0
                else:
                    cur[i] = hi + 1
        if ell == 0:
            level -= 1
            continue
        lens[i] = ell
        pos = _check_segment(w, end, pat, first[i] + 1, seg_end[i],
                             starts[i] + ell, lens, starts)
        if pos < 0:
            continue
        if i == k - 1:
            total += 1
            if not count_all:
                return 1
            continue
        level = i + 1
        starts[level] = pos
        used[level] = used[i] + r * ell
        cur[level] = -1
    return total


@nb.njit(**_JIT)
def enumerate_from(w, n, a, pat, first, mult, seg_end, chain_var, bound,
                   nxt, kc, seen, stamp, lens, starts, cur):
    """Count (windows, encounters) of a doubled pattern starting at position a.

    Every image length is at most ``bound``.  Distinct end positions are
    tracked in ``seen`` using ``stamp``.
    """
    plen = pat.shape[0]
    k = mult.shape[0]
    windows = 0
    encounters = 0
    starts[0] = a
    cur[0] = -1
    level = 0
    while level >= 0:
        i = level
        p = starts[i]
        hi = n - p - (plen - first[i] - 1)
        if hi > bound:
            hi = bound
        ell = 0
        u = chain_var[i]
        if u >= 0 and kc > 0:
            K = lens[u]
            if K > kc:
                K = kc
            row = K - 1
            if cur[i] == -1:
                t = starts[u]
                while t != -1 and t <= p:
                    t = nxt[t, row]
            elif cur[i] == -2:
                t = -1
            else:
                t = nxt[cur[i], row]
            if t != -1 and t - p <= hi:
                ell = t - p
                cur[i] = t
            else:
                cur[i] = -2
        else:
            c0 = 1 if cur[i] == -1 else cur[i] + 1
            if c0 <= hi:
                ell = c0
                cur[i] = c0
            else:
                cur[i] = hi + 1
        if ell == 0:
            level -= 1
            continue
        lens[i] = ell
        pos = _check_segment(w, n, pat, first[i] + 1, seg_end[i], p + ell,
                             lens, starts)
        if pos < 0:
            continue
        if i == k - 1:
            encounters += 1
            if seen[pos] != stamp:
                seen[pos] = stamp
                windows += 1
            continue
        level = i + 1
        starts[level] = pos
        cur[level] = -1
    return windows, encounters


# --------------------------------------------------------------------------
# whole-word statistics


@nb.njit(**_JIT)
def word_count(w, n, q, mode, pat, first, mult, suffix_w, suffix_gcd, seg_end,
               chain_var, use_border, doubled, method, pi, lens, starts, used,
               cur, seen, nxt, last, kc):
    """Numerator of the density, the whole-word indicator, or the encounter count.

    method 0 sweeps every window with ``match_window``; method 1 enumerates
    from each start with ``enumerate_from`` (doubled patterns only).
    """
    plen = pat.shape[0]
    if mode == MODE_SURJECTIVE:
        if n < plen:
            return 0
        if use_border:
            prefix_function(w, 0, n, pi)
        return match_window(w, 0, n, pat, first, mult, suffix_w, suffix_gcd,
                            seg_end, chain_var, use_border, pi, False, lens,
                            starts, used, cur)
    if doubled and method == 1:
        bound = longest_repeat(w, n, q)
        k_used = 0
        if kc > 0:
            k_used = kc
            build_chains(w, n, q, kc, nxt, last, pi)
        for b in range(n + 1):
            seen[b] = -1
        windows = 0
        encounters = 0
        for a in range(n - plen + 1):
            wn, en = enumerate_from(w, n, a, pat, first, mult, seg_end,
                                    chain_var, bound, nxt, k_used, seen, a,
                                    lens, starts, cur)
            windows += wn
            encounters += en
        if mode == MODE_HOM:
            return encounters
        return windows
    count_all = mode == MODE_HOM
    total = 0
    for a in range(n - plen + 1):
        if use_border:
            prefix_function(w, a, n, pi)
        for m in range(plen, n - a + 1):
            total += match_window(w, a, m, pat, first, mult, suffix_w,
                                  suffix_gcd, seg_end, chain_var, use_border,
                                  pi, count_all, lens, starts, used, cur)
    return total


class Workspace:
    """Scratch buffers for ``word_count`` sized for words of length n."""

    def __init__(self, cp: CompiledPattern, q: int, n: int, method: int = 1):
        k = len(cp.mult)
        self.pi = np.zeros(max(n, 1), dtype=np.int64)
        self.lens = np.zeros(k, dtype=np.int64)
        self.starts = np.zeros(k, dtype=np.int64)
        self.used = np.zeros(k, dtype=np.int64)
        self.cur = np.zeros(k, dtype=np.int64)
        self.seen = np.zeros(n + 1, dtype=np.int64)
        self.kc = chain_depth(q) if (cp.needs_chains and method == 1 and q >= 2) else 0
        rows = max(self.kc, 1)
        self.nxt = np.full((max(n, 1), rows), -1, dtype=np.int32)
        self.last = np.zeros(q ** self.kc if self.kc else 1, dtype=np.int64)

    def args(self):
        return (self.pi, self.lens, self.starts, self.used, self.cur,
                self.seen, self.nxt, self.last, self.kc)


def count_word(cp: CompiledPattern, w: np.ndarray, q: int, mode: int,
               method: int = 1, ws: Workspace | None = None) -> int:
    w = np.ascontiguousarray(w, dtype=np.int8)
    n = w.shape[0]
    if ws is None:
        ws = Workspace(cp, q, n, method)
    return int(word_count(w, n, q, mode, *cp.args(), cp.doubled, method,
                          *ws.args()))


# --------------------------------------------------------------------------
# random words


@nb.njit(**_JIT)
def _splitmix(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@nb.njit(**_JIT)
def stream_state(seed, index):
    """Independent starting state for sample ``index`` under master ``seed``."""
    _, h = _splitmix(np.uint64(index))
    _, s = _splitmix(np.uint64(seed) ^ h)
    return s


def symbol_bits(q: int) -> int:
    b = 1
    while (1 << b) < q:
        b += 1
    return b


def pack_masks(q: int) -> np.ndarray:
    """masks[l] selects the low l symbols of a packed code."""
    bps = symbol_bits(q)
    cap = 64 // bps
    out = np.zeros(cap + 1, dtype=np.uint64)
    for ell in range(1, cap + 1):
        bits = ell * bps
        out[ell] = np.uint64((1 << bits) - 1) if bits < 64 else np.uint64(2**64 - 1)
    return out


@nb.njit(**_JIT)
def pack_word(w, n, q, pk):
    """pk[t] packs w[t], w[t+1], ... little-end first; returns symbols per code."""
    bps = 1
    while (1 << bps) < q:
        bps += 1
    cap = 64 // bps
    if cap * bps == 64:
        full = np.uint64(0xFFFFFFFFFFFFFFFF)
    else:
        full = (np.uint64(1) << np.uint64(cap * bps)) - np.uint64(1)
    shift = np.uint64(bps)
    acc = np.uint64(0)
    for t in range(n - 1, -1, -1):
        acc = ((acc << shift) | np.uint64(w[t])) & full
        pk[t] = acc
    return cap


@nb.njit(**_JIT)
def fill_random_word(state, q, out, n):
    """Fill out[:n] with uniform letters in [0, q); returns the new state."""
    if q == 1:
        for t in range(n):
            out[t] = 0
        return state
    bits = 0
    while (1 << bits) < q:
        bits += 1
    if (1 << bits) == q:
        per = 64 // bits
        mask = np.uint64((1 << bits) - 1)
        t = 0
        while t < n:
            state, x = _splitmix(state)
            for _ in range(per):
                if t >= n:
                    break
                out[t] = np.int8(x & mask)
                x = x >> np.uint64(bits)
                t += 1
        return state
    # Lemire's multiply-and-reject on 32-bit draws
    qq = np.uint64(q)
    two32 = np.uint64(1) << np.uint64(32)
    threshold = (two32 - qq) % qq
    low_mask = two32 - np.uint64(1)
    t = 0
    while t < n:
        state, x = _splitmix(state)
        for half in range(2):
            if t >= n:
                break
            r = (x >> np.uint64(32)) if half == 0 else (x & low_mask)
            prod = r * qq
            if (prod & low_mask) < threshold:
                continue
            out[t] = np.int8(prod >> np.uint64(32))
            t += 1
    return state


@nb.njit(**_JIT)
def sample_counts(seed, i0, i1, q, n, mode, pat, first, mult, suffix_w,
                  suffix_gcd, seg_end, chain_var, use_border, doubled, method,
                  pi, lens, starts, used, cur, seen, nxt, last, kc, out):
    """out[i - i0] = count for the random word of sample index i in [i0, i1)."""
    w = np.empty(n, dtype=np.int8)
    for i in range(i0, i1):
        st = stream_state(seed, i)
        fill_random_word(st, q, w, n)
        out[i - i0] = word_count(w, n, q, mode, pat, first, mult, suffix_w,
                                 suffix_gcd, seg_end, chain_var, use_border,
                                 doubled, method, pi, lens, starts, used, cur,
                                 seen, nxt, last, kc)


# --------------------------------------------------------------------------
# exhaustive enumeration of the word space


@nb.njit(**_JIT)
def _digits(index, q, n, w):
    for t in range(n - 1, -1, -1):
        w[t] = index % q
        index //= q


@nb.njit(**_JIT)
def _increment(w, q, n):
    t = n - 1
    while t >= 0:
        if w[t] + 1 < q:
            w[t] += 1
            return
        w[t] = 0
        t -= 1


@nb.njit(**_JIT)
def exhaustive_counts(lo, hi, q, n, mode, pat, first, mult, suffix_w,
                      suffix_gcd, seg_end, chain_var, use_border, doubled,
                      method, pi, lens, starts, used, cur, seen, nxt, last, kc,
                      hist):
    """Sum of counts over words with index in [lo, hi); also hist[c] += 1.

    Word indices are base-q numerals, most significant letter first, so index
    order is lexicographic order.  Pass an empty ``hist`` to skip the
    histogram.
    """
    w = np.empty(n, dtype=np.int8)
    _digits(lo, q, n, w)
    record = hist.shape[0] > 0
    total = 0
    for _ in range(lo, hi):
        c = word_count(w, n, q, mode, pat, first, mult, suffix_w, suffix_gcd,
                       seg_end, chain_var, use_border, doubled, method, pi,
                       lens, starts, used, cur, seen, nxt, last, kc)
        total += c
        if record:
            if c >= hist.shape[0]:
                raise ValueError("histogram too small")
            hist[c] += 1
        _increment(w, q, n)
    return total


@nb.njit(**_JIT)
def exhaustive_instances(lo, hi, q, n, pat, first, mult, suffix_w, suffix_gcd,
                         seg_end, chain_var, use_border, pi, lens, starts,
                         used, cur, out):
    """Write the indices of instance words in [lo, hi) to out; return how many."""
    w = np.empty(n, dtype=np.int8)
    _digits(lo, q, n, w)
    found = 0
    for index in range(lo, hi):
        ok = 0
        if n >= pat.shape[0]:
            if use_border:
                prefix_function(w, 0, n, pi)
            ok = match_window(w, 0, n, pat, first, mult, suffix_w, suffix_gcd,
                              seg_end, chain_var, use_border, pi, False, lens,
                              starts, used, cur)
        if ok:
            out[found] = index
            found += 1
        _increment(w, q, n)
    return found


class GenericEngine:
    """Same interface as the generated-kernel engine, driven by the generic kernels."""

    def __init__(self, p, q: int, n: int):
        self.pattern = p
        self.q = q
        self.n = n
        self.cp = CompiledPattern.from_pattern(p)
        self.method = 1 if self.cp.doubled else 0
        self.ws = Workspace(self.cp, q, n, self.method)

    def _call_args(self):
        return (*self.cp.args(), self.cp.doubled, self.method, *self.ws.args())

    def count(self, w: np.ndarray, mode: int) -> int:
        w = np.ascontiguousarray(w, dtype=np.int8)
        if w.shape[0] != self.n:
            raise ValueError(f"engine sized for n={self.n}, got {w.shape[0]}")
        return int(word_count(w, self.n, self.q, mode, *self._call_args()))

    def sample(self, seed: int, i0: int, i1: int, mode: int) -> np.ndarray:
        out = np.zeros(i1 - i0, dtype=np.int64)
        sample_counts(seed, i0, i1, self.q, self.n, mode, *self._call_args(), out)
        return out

    def exhaustive(self, lo: int, hi: int, mode: int, hist_size: int = 0):
        hist = np.zeros(hist_size, dtype=np.int64)
        total = exhaustive_counts(lo, hi, self.q, self.n, mode, *self._call_args(), hist)
        return int(total), hist

    def instances(self, lo: int, hi: int) -> np.ndarray:
        out = np.zeros(hi - lo, dtype=np.int64)
        ws = self.ws
        found = exhaustive_instances(lo, hi, self.q, self.n, *self.cp.args(), ws.pi,
                                     ws.lens, ws.starts, ws.used, ws.cur, out)
        return out[:found]
