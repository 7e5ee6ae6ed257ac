"""Per-pattern specialised kernels.

The generic kernels in :mod:`patdens._kernels` interpret the pattern at run
time.  For Monte Carlo runs the backtracking is instead unrolled into one
nested loop per distinct variable, with every equality check written inline,
and compiled with numba.  The generated source is written to a cache
directory so numba's on-disk cache can reuse the machine code across
processes.

Generated modules expose the same driver functions as the generic kernels:
``word_count``, ``sample_counts``, ``exhaustive_counts`` and
``exhaustive_instances``.
"""

from __future__ import annotations

import hashlib
import importlib.util
import logging
import os
import sys
import tempfile
import types
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._kernels import CompiledPattern, GenericEngine, chain_depth, pack_masks
from .words import Pattern

log = logging.getLogger(__name__)

# Deeper patterns fall back to the generic kernels (Python caps nested blocks at 20).
MAX_GENERATED_VARIABLES = 12

_GENERATOR_VERSION = "7"


class _Src:
    def __init__(self):
        self.lines: list[str] = []

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _emit_segment(src: _Src, d: int, pat, lo: int, hi: int, bound: str) -> None:
    # images of at most `cap` symbols are compared as one masked xor of packed codes
    for idx in range(lo, hi):
        v = pat[idx]
        src.emit(d, f"if pos + l{v} > {bound}:")
        src.emit(d + 1, "continue")
        src.emit(d, f"if l{v} <= cap:")
        src.emit(d + 1, f"if (pk[pos] ^ pk[s{v}]) & masks[l{v}]:")
        src.emit(d + 2, "continue")
        src.emit(d, "else:")
        src.emit(d + 1, "ok = True")
        src.emit(d + 1, f"for tt in range(l{v}):")
        src.emit(d + 2, f"if w[pos + tt] != w[s{v} + tt]:")
        src.emit(d + 3, "ok = False")
        src.emit(d + 3, "break")
        src.emit(d + 1, "if not ok:")
        src.emit(d + 2, "continue")
        src.emit(d, f"pos += l{v}")


def _emit_starts_level(src: _Src, cp: CompiledPattern, i: int, d: int) -> None:
    pat = [int(x) for x in cp.pat]
    plen = len(pat)
    k = len(cp.mult)
    first = int(cp.first[i])
    tail = plen - first - 1
    src.emit(d, f"hi{i} = n - s{i} - {tail}")
    src.emit(d, f"if hi{i} > bound:")
    src.emit(d + 1, f"hi{i} = bound")
    follower = pat[first + 1] if first + 1 < plen else -1
    if 0 <= follower < i:
        u = follower
        src.emit(d, f"row{i} = (l{u} if l{u} < kc else kc) - 1")
        src.emit(d, f"t{i} = s{u}")
        src.emit(d, f"while t{i} != -1 and t{i} <= s{i}:")
        src.emit(d + 1, f"t{i} = nxt[t{i}, row{i}]")
        src.emit(d, f"while t{i} != -1 and t{i} - s{i} <= hi{i}:")
        src.emit(d + 1, f"l{i} = t{i} - s{i}")
        src.emit(d + 1, f"t{i} = nxt[t{i}, row{i}]")
    else:
        src.emit(d, f"for l{i} in range(1, hi{i} + 1):")
    b = d + 1
    src.emit(b, f"pos = s{i} + l{i}")
    _emit_segment(src, b, pat, first + 1, int(cp.seg_end[i]), "n")
    if i == k - 1:
        src.emit(b, "encounters += 1")
        src.emit(b, "if seen[pos] != a:")
        src.emit(b + 1, "seen[pos] = a")
        src.emit(b + 1, "windows += 1")
    else:
        src.emit(b, f"s{i + 1} = pos")
        _emit_starts_level(src, cp, i + 1, b)


def _emit_window_level(src: _Src, cp: CompiledPattern, i: int, d: int) -> None:
    pat = [int(x) for x in cp.pat]
    k = len(cp.mult)
    r = int(cp.mult[i])
    first = int(cp.first[i])
    src.emit(d, f"rem{i} = m - used{i}")
    if i == k - 1:
        src.emit(d, f"lo{i} = rem{i} // {r}")
        src.emit(d, f"hi{i} = lo{i} if (rem{i} % {r} == 0 and lo{i} >= 1) else lo{i} - 1")
        src.emit(d, f"for l{i} in range(lo{i}, hi{i} + 1):")
    else:
        g = int(cp.suffix_gcd[i])
        src.emit(d, f"hi{i} = (rem{i} - {int(cp.suffix_w[i])}) // {r}")
        if i == 0 and cp.use_border:
            src.emit(d, "b0 = pi[m - 1]")
            src.emit(d, "while b0 > 0:")
            src.emit(d + 1, "l0 = b0")
            src.emit(d + 1, "b0 = pi[b0 - 1]")
            src.emit(d + 1, "if l0 > hi0:")
            src.emit(d + 2, "continue")
        else:
            src.emit(d, f"for l{i} in range(1, hi{i} + 1):")
        if g > 1:
            src.emit(d + 1, f"if (rem{i} - {r} * l{i}) % {g} != 0:")
            src.emit(d + 2, "continue")
    b = d + 1
    src.emit(b, f"pos = s{i} + l{i}")
    _emit_segment(src, b, pat, first + 1, int(cp.seg_end[i]), "end")
    if i == k - 1:
        src.emit(b, "if not count_all:")
        src.emit(b + 1, "return 1")
        src.emit(b, "found += 1")
    else:
        src.emit(b, f"s{i + 1} = pos")
        src.emit(b, f"used{i + 1} = used{i} + {r} * l{i}")
        _emit_window_level(src, cp, i + 1, b)


_DRIVERS = '''

@nb.njit(cache=True, nogil=True)
def word_count(w, n, q, mode, pi, seen, nxt, last, kc, keys, stamps, box, pk,
               masks):
    cap = pack_word(w, n, q, pk)
    if mode == MODE_SURJECTIVE:
        if n < PLEN:
            return 0
        if USE_BORDER:
            prefix_function(w, 0, n, pi)
        return window_match(w, 0, n, pi, False, pk, masks, cap)
    if DOUBLED:
        bound = repeat_bound(w, n, q, keys, stamps, box)
        if kc > 0:
            build_chains(w, n, q, kc, nxt, last, pi)
        return starts_count(w, n, bound, nxt, kc, seen, mode == MODE_HOM, pk,
                            masks, cap)
    return sweep_count(w, n, pi, mode == MODE_HOM, pk, masks, cap, seen)


@nb.njit(cache=True, nogil=True)
def sample_counts(seed, i0, i1, q, n, mode, pi, seen, nxt, last, kc, keys,
                  stamps, box, pk, masks, out):
    w = np.empty(n, dtype=np.int8)
    for i in range(i0, i1):
        st = stream_state(seed, i)
        fill_random_word(st, q, w, n)
        out[i - i0] = word_count(w, n, q, mode, pi, seen, nxt, last, kc, keys,
                                 stamps, box, pk, masks)


@nb.njit(cache=True, nogil=True)
def exhaustive_counts(lo, hi, q, n, mode, pi, seen, nxt, last, kc, keys,
                      stamps, box, pk, masks, hist):
    w = np.empty(n, dtype=np.int8)
    digits(lo, q, n, w)
    record = hist.shape[0] > 0
    total = 0
    for _ in range(lo, hi):
        c = word_count(w, n, q, mode, pi, seen, nxt, last, kc, keys, stamps,
                       box, pk, masks)
        total += c
        if record:
            if c >= hist.shape[0]:
                raise ValueError("histogram too small")
            hist[c] += 1
        increment(w, q, n)
    return total


@nb.njit(cache=True, nogil=True)
def exhaustive_instances(lo, hi, q, n, pi, pk, masks, out):
    w = np.empty(n, dtype=np.int8)
    digits(lo, q, n, w)
    found = 0
    for index in range(lo, hi):
        ok = 0
        if n >= PLEN:
            cap = pack_word(w, n, q, pk)
            if USE_BORDER:
                prefix_function(w, 0, n, pi)
            ok = window_match(w, 0, n, pi, False, pk, masks, cap)
        if ok:
            out[found] = index
            found += 1
        increment(w, q, n)
    return found
'''


def generate_source(p: Pattern) -> str:
    cp = CompiledPattern.from_pattern(p)
    plen = len(p)
    src = _Src()
    src.emit(0, f"# generated for pattern {p.symbols}; do not edit")
    src.emit(0, "import numba as nb")
    src.emit(0, "import numpy as np")
    src.emit(0, "from patdens._kernels import (MODE_HOM, MODE_SURJECTIVE, build_chains,")
    src.emit(0, "    fill_random_word, pack_word, prefix_function, repeat_bound, stream_state,")
    src.emit(0, "    _digits as digits, _increment as increment)")
    src.emit(0, "")
    src.emit(0, f"PLEN = {plen}")
    src.emit(0, f"USE_BORDER = {bool(cp.use_border)}")
    src.emit(0, f"DOUBLED = {bool(cp.doubled)}")
    src.emit(0, "")
    src.emit(0, "")
    src.emit(0, "@nb.njit(cache=True, nogil=True, inline='always')")
    src.emit(0, "def window_match(w, s, m, pi, count_all, pk, masks, cap):")
    src.emit(1, f"if m < {plen}:")
    src.emit(2, "return 0")
    src.emit(1, "end = s + m")
    src.emit(1, "found = 0")
    src.emit(1, "s0 = s")
    src.emit(1, "used0 = 0")
    _emit_window_level(src, cp, 0, 1)
    src.emit(1, "return found")
    src.emit(0, "")
    src.emit(0, "")
    src.emit(0, "@nb.njit(cache=True, nogil=True)")
    src.emit(0, "def sweep_count(w, n, pi, count_all, pk, masks, cap, sb):")
    src.emit(1, "total = 0")
    mult = [int(x) for x in cp.mult]
    if plen >= 2 and mult[0] == 2 and p.symbols[-1] == 0 and all(r == 1 for r in mult[1:]):
        # x y_1..y_j x: an instance iff the shortest border b leaves m - 2b >= j
        mid = plen - 2
        src.emit(1, "if not count_all:")
        src.emit(2, "sb[0] = 0")
        src.emit(2, f"for a in range(n - {plen} + 1):")
        src.emit(3, "prefix_function(w, a, n, pi)")
        src.emit(3, "for m in range(1, n - a + 1):")
        src.emit(4, "b = pi[m - 1]")
        src.emit(4, "sh = sb[b] if b > 0 and sb[b] > 0 else b")
        src.emit(4, "sb[m] = sh")
        src.emit(4, f"if m >= {plen} and sh > 0 and m - 2 * sh >= {mid}:")
        src.emit(5, "total += 1")
        src.emit(2, "return total")
    src.emit(1, f"for a in range(n - {plen} + 1):")
    if cp.use_border:
        src.emit(2, "prefix_function(w, a, n, pi)")
    src.emit(2, f"for m in range({plen}, n - a + 1):")
    src.emit(3, "total += window_match(w, a, m, pi, count_all, pk, masks, cap)")
    src.emit(1, "return total")
    src.emit(0, "")
    src.emit(0, "")
    src.emit(0, "@nb.njit(cache=True, nogil=True)")
    src.emit(0, "def starts_count(w, n, bound, nxt, kc, seen, want_hom, pk, masks, cap):")
    src.emit(1, "windows = 0")
    src.emit(1, "encounters = 0")
    if cp.doubled:
        src.emit(1, "for b in range(n + 1):")
        src.emit(2, "seen[b] = -1")
        src.emit(1, f"for a in range(n - {plen} + 1):")
        src.emit(2, "s0 = a")
        _emit_starts_level(src, cp, 0, 2)
    src.emit(1, "if want_hom:")
    src.emit(2, "return encounters")
    src.emit(1, "return windows")
    return src.text() + _DRIVERS


def chain_rows(p: Pattern, q: int) -> int:
    """Number of next-occurrence chain rows the generated kernel reads."""
    if not p.is_doubled:
        return 0
    cp = CompiledPattern.from_pattern(p)
    rows = 0
    for i in range(p.k):
        f = int(cp.first[i])
        follower = p.symbols[f + 1] if f + 1 < len(p) else -1
        if 0 <= follower < i:
            rows = max(rows, chain_depth(q))
    return rows


def _cache_dir() -> Path | None:
    candidates = []
    if os.environ.get("PATDENS_CACHE"):
        candidates.append(Path(os.environ["PATDENS_CACHE"]))
    candidates.append(Path.home() / ".cache" / "patdens")
    candidates.append(Path(tempfile.gettempdir()) / "patdens-cache")
    for c in candidates:
        try:
            c.mkdir(parents=True, exist_ok=True)
            probe = c / ".probe"
            probe.write_text("")
            probe.unlink()
            return c
        except OSError:
            continue
    return None


@lru_cache(maxsize=None)
def compile_pattern(p: Pattern):
    """Import (generating if needed) the specialised kernel module for ``p``."""
    if p.k > MAX_GENERATED_VARIABLES:
        raise ValueError(f"too many variables ({p.k}) for a generated kernel")
    source = generate_source(p)
    digest = hashlib.sha1((_GENERATOR_VERSION + source).encode()).hexdigest()[:16]
    name = f"patdens_gen_{digest}"
    cache = _cache_dir()
    if cache is None:
        log.debug("no writable cache directory; compiling %s in memory", name)
        module = types.ModuleType(name)
        exec(compile(source, name, "exec"), module.__dict__)
        return module
    path = cache / f"{name}.py"
    if not path.exists() or path.read_text() != source:
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        tmp.write_text(source)
        os.replace(tmp, path)
    if name in sys.modules:
        return sys.modules[name]
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    # numba's cache pickles the defining module by name, so it must be importable
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


class Engine:
    """A compiled pattern plus scratch buffers for words of one length."""

    def __init__(self, p: Pattern, q: int, n: int):
        self.pattern = p
        self.q = q
        self.n = n
        self.module = compile_pattern(p)
        self.kc = chain_rows(p, q) if q >= 2 else (1 if chain_rows(p, 2) else 0)
        size = 4
        while size < 2 * max(n, 1):
            size *= 2
        self.pi = np.zeros(max(n, 1), dtype=np.int64)
        self.seen = np.zeros(n + 1, dtype=np.int64)
        self.nxt = np.full((max(n, 1), max(self.kc, 1)), -1, dtype=np.int32)
        self.last = np.zeros(q ** self.kc if self.kc else 1, dtype=np.int64)
        self.keys = np.zeros(size, dtype=np.int64)
        self.stamps = np.zeros(size, dtype=np.int64)
        self.box = np.zeros(1, dtype=np.int64)
        self.pk = np.zeros(max(n, 1), dtype=np.uint64)
        self.masks = pack_masks(q)

    def _ws(self):
        return (self.pi, self.seen, self.nxt, self.last, self.kc, self.keys,
                self.stamps, self.box, self.pk, self.masks)

    def count(self, w: np.ndarray, mode: int) -> int:
        w = np.ascontiguousarray(w, dtype=np.int8)
        if w.shape[0] != self.n:
            raise ValueError(f"engine sized for n={self.n}, got {w.shape[0]}")
        return int(self.module.word_count(w, self.n, self.q, mode, *self._ws()))

    def sample(self, seed: int, i0: int, i1: int, mode: int) -> np.ndarray:
        out = np.zeros(i1 - i0, dtype=np.int64)
        self.module.sample_counts(seed, i0, i1, self.q, self.n, mode, *self._ws(), out)
        return out

    def exhaustive(self, lo: int, hi: int, mode: int, hist_size: int = 0):
        hist = np.zeros(hist_size, dtype=np.int64)
        total = self.module.exhaustive_counts(lo, hi, self.q, self.n, mode,
                                              *self._ws(), hist)
        return int(total), hist

    def instances(self, lo: int, hi: int) -> np.ndarray:
        out = np.zeros(hi - lo, dtype=np.int64)
        found = self.module.exhaustive_instances(lo, hi, self.q, self.n, self.pi, self.pk,
                                                 self.masks, out)
        return out[:found]


def engine_for(p: Pattern, q: int, n: int, specialise: bool = True):
    """A generated-kernel engine when worthwhile, else the generic one."""
    if specialise and p.k <= MAX_GENERATED_VARIABLES:
        return Engine(p, q, n)
    return GenericEngine(p, q, n)
