"""Seeded Monte Carlo estimates over uniformly random words, and experiment drivers.

Sample ``i`` of a run with master seed ``s`` is generated from its own
counter-based substream, so the words (and therefore every statistic) do not
depend on how the sample range is split across worker threads.  Each grid
point of a trajectory gets its own master seed derived from ``(s, n)``.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels as K
from .exact import check_budget, default_workers, enumerate_instances, has_small_witness, work_budget
from .words import Pattern, Word

MC_DEFAULT_BUDGET = 10**10
CONFIDENCE = 0.99
Z_SCORE = statistics.NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)
SEED_LIMIT = 2**63

# samples per engine call; also the unit of work handed to threads
_BLOCK = 4096


@dataclass(frozen=True)
class EstimationResult:
    """Summary of a Monte Carlo run.  Moment tuples are indexed by order - 1."""

    pattern: str
    q: int
    n: int
    sample_count: int
    seed: int
    statistic: str
    mean: float
    variance: float
    raw_moments: tuple[float, ...]
    central_moments: tuple[float, ...]
    ci_half_width: float

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.variance / self.sample_count)

    def raw_moment(self, order: int) -> float:
        return self.raw_moments[order - 1]

    def central_moment(self, order: int) -> float:
        """E|X - mean|^order over the sample."""
        return self.central_moments[order - 1]


@dataclass(frozen=True)
class TrajectoryRow:
    n: int
    estimate: float
    scaled_estimate: float
    ci_half_width: float
    sample_count: int
    order: int = field(default=1)


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < SEED_LIMIT:
        raise ValueError(f"seed must lie in [0, 2**63), got {seed}")
    return seed


def grid_seed(seed: int, n: int) -> int:
    """Master seed for the grid point of length n in a run seeded with ``seed``."""
    state = np.random.SeedSequence([_check_seed(seed), n]).generate_state(1, dtype=np.uint64)
    return int(state[0]) % SEED_LIMIT


def sample_word(q: int, n: int, seed: int, index: int = 0) -> Word:
    """The uniform random word for sample ``index`` of the stream seeded by ``seed``."""
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    if q > 127:
        raise ValueError("alphabets larger than 127 letters are not supported")
    out = np.empty(n, dtype=np.int8)
    K.fill_random_word(np.uint64(K.stream_state(_check_seed(seed), index)), q, out, n)
    return Word.from_array(out, q)


def work_units(p: Pattern, n: int, samples: int, statistic: str) -> int:
    """Cost model for the budget guard.

    Whole-word checks cost about n per sample.  Densities of doubled patterns
    are enumerated from each start with image lengths capped by the longest
    repeat, about n |p| per sample; other densities sweep all n^2 windows.
    """
    if statistic == "instance":
        return samples * n
    if p.is_doubled:
        return samples * n * len(p)
    return samples * n * n


def _engine(p: Pattern, q: int, n: int):
    from ._codegen import engine_for

    return engine_for(p, q, n)


@lru_cache(maxsize=64)
def _counts(p: Pattern, q: int, n: int, samples: int, seed: int, mode: int,
            workers: int) -> np.ndarray:
    blocks = [(lo, min(lo + _BLOCK, samples)) for lo in range(0, samples, _BLOCK)]
    out = np.zeros(samples, dtype=np.int64)
    if workers <= 1 or len(blocks) == 1:
        eng = _engine(p, q, n)
        for lo, hi in blocks:
            out[lo:hi] = eng.sample(seed, lo, hi, mode)
    else:
        # contiguous runs of blocks per thread, each with its own buffers
        per = [blocks[i::workers] for i in range(workers)]

        def run(mine):
            eng = _engine(p, q, n)
            for lo, hi in mine:
                out[lo:hi] = eng.sample(seed, lo, hi, mode)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, [m for m in per if m]))
    out.flags.writeable = False
    return out


def sample_counts(p: Pattern, q: int, n: int, samples: int, seed: int, mode: int,
                  workers: int | None = None) -> np.ndarray:
    """Per-sample integer statistic (density numerator, indicator or hom count)."""
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    if q > 127:
        raise ValueError("alphabets larger than 127 letters are not supported")
    # the per-sample values do not depend on the worker count, so it is not a cache key
    w = workers or default_workers()
    return _counts(p, q, n, int(samples), _check_seed(seed), mode, 1 if w <= 1 else w)


def summarise(values: np.ndarray, *, pattern: str, q: int, n: int, seed: int,
              statistic: str, p_max: int) -> EstimationResult:
    """Moments of a sample of reals, summed in sample order for reproducibility."""
    x = np.asarray(values, dtype=np.float64)
    count = x.shape[0]
    mean = math.fsum(x) / count
    dev = x - mean
    variance = math.fsum(dev * dev) / (count - 1) if count > 1 else 0.0
    raw = tuple(math.fsum(x**p) / count for p in range(1, p_max + 1))
    absdev = np.abs(dev)
    central = tuple(math.fsum(absdev**p) / count for p in range(1, p_max + 1))
    ci = Z_SCORE * math.sqrt(variance / count) if count > 1 else math.inf
    return EstimationResult(pattern, q, n, count, seed, statistic, mean, variance,
                            raw, central, ci)


def estimate_density_moments(p: Pattern, q: int, n: int, samples: int, seed: int,
                             p_max: int = 4, workers: int | None = None) -> EstimationResult:
    """Mean, variance and moments of delta(p, W) over ``samples`` random words."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if p_max < 1:
        raise ValueError("p_max must be at least 1")
    check_budget(work_units(p, n, samples, "density"), "estimate_density_moments",
                 work_budget(MC_DEFAULT_BUDGET))
    counts = sample_counts(p, q, n, samples, seed, K.MODE_DENSITY, workers)
    return summarise(counts / (n * (n + 1) // 2), pattern=p.render(), q=q, n=n,
                     seed=seed, statistic="density", p_max=p_max)


def estimate_instance_probability(p: Pattern, q: int, n: int, samples: int, seed: int,
                                  workers: int | None = None) -> EstimationResult:
    """Fraction of ``samples`` random words that are instances of p."""
    if samples < 1:
        raise ValueError("need at least 1 sample")
    check_budget(work_units(p, n, samples, "instance"), "estimate_instance_probability",
                 work_budget(MC_DEFAULT_BUDGET))
    counts = sample_counts(p, q, n, samples, seed, K.MODE_SURJECTIVE, workers)
    return summarise(counts, pattern=p.render(), q=q, n=n, seed=seed,
                     statistic="instance", p_max=2)


# --------------------------------------------------------------------------
# experiments


def _check_grid(n_list: Sequence[int]) -> list[int]:
    grid = [int(n) for n in n_list]
    if not grid:
        raise ValueError("the n grid is empty")
    if grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("the n grid must be positive and strictly increasing")
    return grid


def _check_grid_budget(p: Pattern, grid: list[int], samples: int) -> None:
    need = sum(work_units(p, n, samples, "density") for n in grid)
    check_budget(need, "experiment", work_budget(MC_DEFAULT_BUDGET))


def _grid_estimates(p, q, grid, samples, seed, p_max, workers):
    _check_grid_budget(p, grid, samples)
    return [estimate_density_moments(p, q, n, samples, grid_seed(seed, n), p_max, workers)
            for n in grid]


def dichotomy_trajectory(p: Pattern, q: int, n_list: Sequence[int], samples: int, seed: int,
                         workers: int | None = None) -> list[TrajectoryRow]:
    """Mean density per n, with n * mean as the scaled column."""
    grid = _check_grid(n_list)
    return [TrajectoryRow(e.n, e.mean, e.n * e.mean, e.ci_half_width, e.sample_count)
            for e in _grid_estimates(p, q, grid, samples, seed, 1, workers)]


def _variance_ci(e: EstimationResult) -> float:
    # normal approximation to the sampling error of the unbiased variance
    count = e.sample_count
    s2 = e.variance
    m4 = e.central_moment(4)
    spread = m4 - s2 * s2 * (count - 3) / (count - 1)
    return Z_SCORE * math.sqrt(max(spread, 0.0) / count)


def variance_scaling(p: Pattern, q: int, n_list: Sequence[int], samples: int, seed: int,
                     workers: int | None = None, exploratory: bool = False) -> list[TrajectoryRow]:
    """Var delta per n, scaled by n / ((log n)^3 mean^2).

    Nondoubled patterns are rejected unless ``exploratory`` is set.
    """
    if not p.is_doubled and not exploratory:
        raise ValueError(f"pattern {p} is not doubled (pass exploratory=True to run anyway)")
    grid = _check_grid(n_list)
    rows = []
    for e in _grid_estimates(p, q, grid, samples, seed, 4, workers):
        n = e.n
        denom = math.log(n) ** 3 * e.mean**2
        scaled = e.variance * n / denom if denom > 0 else math.nan
        rows.append(TrajectoryRow(n, e.variance, scaled, _variance_ci(e), e.sample_count))
    return rows


def moment_scaling(p: Pattern, q: int, n_list: Sequence[int], samples: int, seed: int,
                   p_max: int = 3, central: bool = True,
                   workers: int | None = None) -> dict[int, list[TrajectoryRow]]:
    """Per order p, the p-th moment of delta scaled by (n / log n)^p.

    Order 1 is always the mean; higher orders use E|delta - mean|^p, or the raw
    moment when ``central`` is false.
    """
    if not p.is_doubled:
        raise ValueError(f"pattern {p} is not doubled")
    if not 1 <= p_max <= 4:
        raise ValueError("p_max must be between 1 and 4")
    grid = _check_grid(n_list)
    out: dict[int, list[TrajectoryRow]] = {order: [] for order in range(1, p_max + 1)}
    for e in _grid_estimates(p, q, grid, samples, seed, max(p_max, 2) * 2, workers):
        n = e.n
        factor = n / math.log(n) if n > 1 else math.nan
        for order in range(1, p_max + 1):
            if order == 1 or not central:
                value = e.raw_moment(order)
                spread = e.raw_moment(2 * order) - value**2
            else:
                value = e.central_moment(order)
                spread = e.central_moment(2 * order) - value**2
            ci = Z_SCORE * math.sqrt(max(spread, 0.0) / e.sample_count)
            out[order].append(TrajectoryRow(n, value, value * factor**order, ci * factor**order,
                                            e.sample_count, order))
    return out


def lemma_base_diagnostic(p: Pattern, q: int, n_list: Sequence[int], samples: int, seed: int,
                          workers: int | None = None) -> list[TrajectoryRow]:
    """Fraction of uniformly drawn length-n instances with a small-base witness.

    Instances are drawn with replacement from the exhaustive list, so only
    small n are feasible.
    """
    grid = _check_grid(n_list)
    if samples < 1:
        raise ValueError("need at least 1 sample")
    rows = []
    for n in grid:
        instances = enumerate_instances(p, q, n, workers)
        if not instances:
            raise ValueError(f"no length-{n} instances of {p} over {q} letters")
        rng = np.random.default_rng(grid_seed(seed, n))
        picks = rng.integers(0, len(instances), size=samples)
        memo: dict[int, bool] = {}
        hits = 0
        for i in picks.tolist():
            if i not in memo:
                memo[i] = has_small_witness(instances[i], p)
            hits += memo[i]
        frac = hits / samples
        ci = Z_SCORE * math.sqrt(frac * (1 - frac) / samples)
        rows.append(TrajectoryRow(n, frac, frac, ci, samples))
    return rows


def band_ratio(rows: Sequence[TrajectoryRow]) -> float:
    """max / min of the scaled column over the tail half of the grid."""
    if not rows:
        raise ValueError("no rows")
    tail = [r.scaled_estimate for r in rows[len(rows) // 2:]]
    lo, hi = min(tail), max(tail)
    if lo <= 0:
        return math.inf
    return hi / lo
