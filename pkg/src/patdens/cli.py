"""Command-line interface.

Exit codes: 0 success (or "is an instance"), 1 clean negative, 2 usage
error, 3 work budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from . import __version__
from . import exact, montecarlo
from .matcher import MatchError, density, find_witness
from .words import Pattern, Word, parse_pattern

log = logging.getLogger("patdens")

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3

TOOL = "patdens"
EXPERIMENTS = ("dichotomy", "variance", "moments", "lemma-base")
FORMATS = ("csv", "json")


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# parsing helpers


def parse_n_range(text: str) -> list[int]:
    """Parse ``7``, ``2,4,8``, ``1:12``, ``1:12:+2`` or ``64:4096:x2`` (stop inclusive)."""
    text = text.strip()
    try:
        if "," in text:
            values = [int(part) for part in text.split(",")]
        elif ":" in text:
            parts = text.split(":")
            if len(parts) not in (2, 3):
                raise ValueError
            start, stop = int(parts[0]), int(parts[1])
            step = parts[2] if len(parts) == 3 else "+1"
            values = []
            if step.startswith("x"):
                factor = int(step[1:])
                if factor < 2 or start < 1:
                    raise ValueError
                v = start
                while v <= stop:
                    values.append(v)
                    v *= factor
            elif step.startswith("+"):
                inc = int(step[1:])
                if inc < 1:
                    raise ValueError
                values = list(range(start, stop + 1, inc))
            else:
                raise ValueError
        else:
            values = [int(text)]
    except ValueError:
        raise UsageError(f"bad range {text!r}; use N, A,B,C, START:STOP, START:STOP:+K or START:STOP:xK") from None
    if not values:
        raise UsageError(f"range {text!r} is empty")
    if values[0] < 1 or any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError(f"range {text!r} must be positive and strictly increasing")
    return values


def _pattern(text: str) -> Pattern:
    try:
        return parse_pattern(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _word(text: str, q: Optional[int]) -> Word:
    try:
        w = Word.from_text(text, q)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(w) == 0:
        raise UsageError("the word must be nonempty")
    return w


# --------------------------------------------------------------------------
# tables


def fmt_real(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_real(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, int)) or v is None:
        return v
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return fmt_real(v)
        return float(fmt_real(v))
    return str(v)


@dataclass
class ResultTable:
    """Header (tool, version, config), fixed columns, rows and a footer."""

    config: list[tuple[str, str]]
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    footer: list[tuple[str, object]] = field(default_factory=list)

    def header_lines(self) -> list[str]:
        return [f"# {TOOL} {__version__}"] + [f"# {k}={v}" for k, v in self.config]

    def csv_lines(self) -> Iterator[str]:
        yield from self.header_lines()
        yield ",".join(self.columns)
        for row in self.rows:
            yield self.csv_row(row)
        for k, v in self.footer:
            yield f"# {k}={_csv_cell(v)}"

    @staticmethod
    def csv_row(row: Sequence) -> str:
        return ",".join(_csv_cell(v) for v in row)

    def to_json(self) -> str:
        doc = {
            "tool": TOOL,
            "version": __version__,
            "config": dict(self.config),
            "columns": self.columns,
            "rows": [[_json_cell(v) for v in row] for row in self.rows],
            "footer": {k: _json_cell(v) for k, v in self.footer},
        }
        return json.dumps(doc, indent=2)

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json() + "\n"
        return "\n".join(self.csv_lines()) + "\n"


def _emit(text: str, out) -> None:
    out.write(text)
    out.flush()


# --------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment's output.  Keys match flag names."""

    kind: str = "dichotomy"
    pattern: str = "xx"
    q: int = 2
    n: str = "64:1024:x2"
    samples: int = 1000
    seed: int = 0
    p_max: int = 3
    tolerance: Optional[float] = None
    format: str = "csv"
    budget: Optional[int] = None
    exploratory: bool = False

    @staticmethod
    def key(name: str) -> str:
        return name.replace("_", "-")

    def items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                v = "none"
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append((self.key(f.name), str(v)))
        return out

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.items())

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "ExperimentConfig":
        cfg = cls()
        names = {cls.key(f.name): f for f in fields(cls)}
        for key, value in raw.items():
            if key not in names:
                raise UsageError(f"unknown config key {key!r}")
            f = names[key]
            setattr(cfg, f.name, _convert(f.name, value))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.kind not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.kind!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.format not in FORMATS:
            raise UsageError(f"unknown format {self.format!r}")
        _pattern(self.pattern)
        parse_n_range(self.n)
        if not 1 <= self.q <= 127:
            raise UsageError("q must be between 1 and 127")
        if self.samples < 2:
            raise UsageError("samples must be at least 2")
        if not 0 <= self.seed < montecarlo.SEED_LIMIT:
            raise UsageError("seed must lie in [0, 2**63)")
        if not 1 <= self.p_max <= 4:
            raise UsageError("p-max must be between 1 and 4")
        if self.budget is not None and self.budget <= 0:
            raise UsageError("budget must be positive")


def _convert(name: str, value: str):
    value = value.strip()
    try:
        if name in ("q", "samples", "seed", "p_max"):
            return int(value)
        if name == "budget":
            return None if value.lower() == "none" else int(float(value))
        if name == "tolerance":
            return None if value.lower() == "none" else float(value)
        if name == "exploratory":
            if value.lower() not in ("true", "false"):
                raise ValueError
            return value.lower() == "true"
    except ValueError:
        raise UsageError(f"bad value {value!r} for {name.replace('_', '-')}") from None
    return value


def read_config(path: str | Path) -> dict[str, str]:
    """key=value lines; ``#`` comments may themselves hold key=value pairs.

    That makes the header of a previous CSV run a valid config file.  Lines
    without ``=`` are ignored.
    """
    known = {ExperimentConfig.key(f.name) for f in fields(ExperimentConfig)}
    raw: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for line in text.splitlines():
        line = line.strip()
        commented = line.startswith("#")
        if commented:
            line = line[1:].strip()
        if "=" not in line:
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in known:
            if commented:
                continue
            raise UsageError(f"unknown config key {key!r} in {path}")
        raw[key] = value
    return raw


# --------------------------------------------------------------------------
# commands


def cmd_match(args, out) -> int:
    p = _pattern(args.pattern)
    w = _word(args.word, args.q)
    phi = find_witness(w, p)
    if phi is None:
        _emit(f"{w.render()} is not an instance of {args.pattern}\n", out)
        return EXIT_NEGATIVE
    _emit(phi.render(names=args.pattern) + "\n", out)
    return EXIT_OK


def cmd_density(args, out) -> int:
    p = _pattern(args.pattern)
    w = _word(args.word, args.q)
    d = density(p, w)
    table = ResultTable(
        config=[("command", "density"), ("pattern", args.pattern), ("word", args.word)],
        columns=["pattern", "word", "instances", "substrings", "density", "decimal"],
        rows=[[args.pattern, args.word, d.numerator, d.denominator, d.value, float(d)]],
    )
    _emit(table.render(args.format), out)
    return EXIT_OK


def _exact_rows(args) -> tuple[list[tuple[str, str]], list[str], Iterable[list]]:
    sub = args.exact_command
    if sub == "z2limit":
        qs = parse_n_range(args.q)
        if qs[0] < 2:
            raise UsageError("z2limit needs q >= 2")
        if not args.tol > 0:
            raise UsageError("tol must be positive")
        places = max(0, math.ceil(-math.log10(args.tol)))

        def z2():
            for q in qs:
                value = exact.bordered_limit(q, args.tol)
                yield [q, value, f"{value:.{places}f}"]

        return ([("q", args.q), ("tol", repr(args.tol))], ["q", "limit", "rounded"], z2())

    p = _pattern(args.pattern)
    ns = parse_n_range(args.n)
    config = [("pattern", args.pattern), ("q", str(args.q)), ("n", args.n)]
    if args.q < 1:
        raise UsageError("q must be at least 1")
    if sub in ("instprob", "expdens", "exphom"):
        fn = {"instprob": exact.instance_probability,
              "expdens": exact.expected_density,
              "exphom": exact.expected_hom}[sub]

        def rational():
            for n in ns:
                value = fn(p, args.q, n) if sub == "exphom" else fn(p, args.q, n, args.workers)
                yield [n, value, float(value)]

        return config, ["n", "value", "decimal"], rational()
    if not p.is_doubled:
        raise UsageError(f"pattern {args.pattern} is not doubled")
    if sub == "bound":
        if args.q < 2:
            raise UsageError("the bound needs q >= 2")
        return config, ["n", "bound"], ([n, exact.instance_count_bound(p, args.q, n)] for n in ns)
    if not args.f > 0:
        raise UsageError("f must be positive")
    config.append(("f", repr(args.f)))
    return (config, ["n", "f", "bound"],
            ([n, args.f, exact.tail_bound(p, args.q, n, args.f)] for n in ns))


def cmd_exact(args, out) -> int:
    config, columns, rows = _exact_rows(args)
    table = ResultTable([("command", f"exact {args.exact_command}")] + config, columns)
    if args.format == "csv":
        # rows are streamed as they are computed
        _emit("\n".join(table.header_lines() + [",".join(columns)]) + "\n", out)
        for row in rows:
            _emit(ResultTable.csv_row(row) + "\n", out)
        return EXIT_OK
    table.rows = list(rows)
    _emit(table.render("json"), out)
    return EXIT_OK


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> ResultTable:
    """Run the configured experiment and return its table (deterministic in cfg)."""
    p = _pattern(cfg.pattern)
    grid = parse_n_range(cfg.n)
    columns = ["n", "estimate", "scaled", "ci_half_width", "samples"]
    table = ResultTable(cfg.items(), columns)
    if cfg.kind == "lemma-base":
        rows = montecarlo.lemma_base_diagnostic(p, cfg.q, grid, cfg.samples, cfg.seed, workers)
        units = sum(cfg.q**n * n for n in grid)
    else:
        units = sum(montecarlo.work_units(p, n, cfg.samples, "density") for n in grid)
        if cfg.kind == "dichotomy":
            rows = montecarlo.dichotomy_trajectory(p, cfg.q, grid, cfg.samples, cfg.seed, workers)
        elif cfg.kind == "variance":
            rows = montecarlo.variance_scaling(p, cfg.q, grid, cfg.samples, cfg.seed, workers,
                                               exploratory=cfg.exploratory)
        else:
            by_order = montecarlo.moment_scaling(p, cfg.q, grid, cfg.samples, cfg.seed,
                                                 cfg.p_max, workers=workers)
            table.columns = ["n", "order"] + columns[1:]
            for order, series in by_order.items():
                for r in series:
                    table.rows.append([r.n, order, r.estimate, r.scaled_estimate,
                                       r.ci_half_width, r.sample_count])
                ratio = montecarlo.band_ratio(series)
                table.footer.append((f"band_ratio_order{order}", ratio))
                if cfg.tolerance is not None:
                    table.footer.append((f"within_tolerance_order{order}", ratio <= cfg.tolerance))
            table.footer.append(("work_units", units))
            return table
    for r in rows:
        table.rows.append([r.n, r.estimate, r.scaled_estimate, r.ci_half_width, r.sample_count])
    ratio = montecarlo.band_ratio(rows)
    table.footer.append(("band_ratio", ratio))
    if cfg.tolerance is not None:
        table.footer.append(("within_tolerance", ratio <= cfg.tolerance))
    table.footer.append(("work_units", units))
    return table


def cmd_experiment(args, out) -> int:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(read_config(args.config))
    if args.kind:
        raw["kind"] = args.kind
    for f in fields(ExperimentConfig):
        key = ExperimentConfig.key(f.name)
        if f.name == "kind":
            continue
        value = getattr(args, f.name, None)
        if value is not None and value is not False:
            raw[key] = str(value).lower() if isinstance(value, bool) else str(value)
    if "kind" not in raw:
        raise UsageError("give an experiment kind or a config file that sets kind")
    cfg = ExperimentConfig.from_mapping(raw)
    if cfg.budget is None:
        default = exact.DEFAULT_BUDGET if cfg.kind == "lemma-base" else montecarlo.MC_DEFAULT_BUDGET
        cfg.budget = exact.work_budget(default)
    if args.write_config:
        Path(args.write_config).write_text(cfg.to_text())
    started = time.perf_counter()
    previous = os.environ.get(exact.BUDGET_ENV)
    os.environ[exact.BUDGET_ENV] = str(cfg.budget)
    try:
        table = run_experiment(cfg, args.workers)
    finally:
        if previous is None:
            del os.environ[exact.BUDGET_ENV]
        else:
            os.environ[exact.BUDGET_ENV] = previous
    # wall time goes to the log so that reruns stay byte-identical
    log.info("wall time %.3f s", time.perf_counter() - started)
    _emit(table.render(cfg.format), out)
    if args.figure:
        from .plotting import plot_rows

        plot_rows(args.figure, table.columns, table.rows,
                  f"{cfg.kind}: {cfg.pattern}, q={cfg.q}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="is WORD an instance of PATTERN? prints a witness")
    m.add_argument("pattern")
    m.add_argument("word")
    m.add_argument("--q", type=int, default=None, help="alphabet size (default: largest letter)")
    m.set_defaults(func=cmd_match)

    d = sub.add_parser("density", help="exact density of PATTERN in WORD")
    d.add_argument("pattern")
    d.add_argument("word")
    d.add_argument("--q", type=int, default=None)
    d.add_argument("--format", choices=FORMATS, default="csv")
    d.set_defaults(func=cmd_density)

    e = sub.add_parser("exact", help="exact oracles and bounds over an n range")
    esub = e.add_subparsers(dest="exact_command", required=True)
    for name, text in [("instprob", "probability that a random word is an instance"),
                       ("expdens", "expected density"),
                       ("exphom", "expected encounter count"),
                       ("bound", "instance-count upper bound (doubled patterns)"),
                       ("tailbound", "tail bound on long instance factors (doubled patterns)")]:
        s = esub.add_parser(name, help=text)
        s.add_argument("--pattern", required=True)
        s.add_argument("--q", type=int, required=True)
        s.add_argument("--n", required=True, help="length or range, e.g. 1:12 or 64:4096:x2")
        s.add_argument("--format", choices=FORMATS, default="csv")
        s.add_argument("--workers", type=int, default=None)
        if name == "tailbound":
            s.add_argument("--f", type=float, required=True, help="factor-length threshold")
        s.set_defaults(func=cmd_exact)
    z = esub.add_parser("z2limit", help="limit of the probability that a word is an aba instance")
    z.add_argument("--q", required=True, help="alphabet size or range")
    z.add_argument("--tol", type=float, default=1e-7)
    z.add_argument("--format", choices=FORMATS, default="csv")
    z.set_defaults(func=cmd_exact)

    x = sub.add_parser("experiment", help="Monte Carlo experiment over an n grid")
    x.add_argument("kind", nargs="?", choices=EXPERIMENTS)
    x.add_argument("--config", help="key=value file (a previous CSV header works too)")
    x.add_argument("--write-config", help="save the resolved config here")
    x.add_argument("--pattern")
    x.add_argument("--q", type=int)
    x.add_argument("--n", help="grid, e.g. 64:4096:x2")
    x.add_argument("--samples", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--p-max", dest="p_max", type=int)
    x.add_argument("--tolerance", type=float, help="report whether the band ratio is within this")
    x.add_argument("--format", choices=FORMATS)
    x.add_argument("--budget", type=int, help=f"work-unit guard (also {exact.BUDGET_ENV})")
    x.add_argument("--exploratory", action="store_true",
                   help="allow nondoubled patterns in the variance experiment")
    x.add_argument("--workers", type=int, default=None, help="threads (does not change results)")
    x.add_argument("--figure", help="also save a plot of the scaled column (needs matplotlib)")
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print(f"{TOOL}: error: workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except exact.BudgetExceeded as exc:
        print(f"{TOOL}: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, MatchError, ValueError) as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
