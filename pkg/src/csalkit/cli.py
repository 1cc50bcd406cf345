"""Command-line entry point wiring the toolkit into one workflow.

Four subcommands cover the pipeline from feature file to report:
``select`` runs one strategy and writes a query set, ``bench`` runs the
synthetic benchmark grid, ``inspect`` summarizes and validates a feature
bank, and ``convert`` translates between the binary and csv formats.

Every option is a long kebab-case flag. A flag left unset falls back to
the environment variable ``MEDCAL_<FLAG>`` (upper snake case), then to
its documented default. Exit codes: 0 success, 2 input error, 3
operation error. Output files are byte-identical across reruns with the
same flags and inputs; stdout is a human-readable summary only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .bank import load_feature_bank, normalize, save_feature_bank, validate
from .errors import AlreadyNormalized, InputError, IoFailure, OperationError
from .harness import SyntheticSpec, benchmark_matrix, emit_report
from .strategies import STRATEGY_NAMES, StrategyConfig, run_strategy

ENV_PREFIX = "MEDCAL_"

DEFAULT_BUDGETS = (0.02, 0.04, 0.1)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


def _split_list(text: str) -> list[str]:
    items = [token.strip() for token in text.split(",") if token.strip()]
    if not items:
        raise ValueError("expected a comma-separated list")
    return items


def _parse_names(text: str) -> list[str]:
    return _split_list(text)


def _parse_floats(text: str) -> list[float]:
    return [float(token) for token in _split_list(text)]


def _parse_ints(text: str) -> list[int]:
    return [int(token) for token in _split_list(text)]


def _parse_budget(text: str) -> int | float:
    """Integer strings are absolute counts, anything else is a fraction."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ValueError(
            f"budget must be an integer count or a float fraction, got {text!r}"
        ) from None


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice_of(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"must be one of {', '.join(allowed)}, got {text!r}")
        return text

    return parse


@dataclass(frozen=True)
class _Option:
    name: str
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    is_flag: bool = False
    help: str = ""

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")

    @property
    def env_var(self) -> str:
        return ENV_PREFIX + self.dest.upper()


def _add_options(parser: argparse.ArgumentParser, options: tuple[_Option, ...]) -> None:
    for opt in options:
        if opt.is_flag:
            parser.add_argument(
                f"--{opt.name}",
                dest=opt.dest,
                action="store_const",
                const=True,
                default=None,
                help=opt.help,
            )
        else:
            parser.add_argument(
                f"--{opt.name}",
                dest=opt.dest,
                type=opt.parse,
                default=None,
                help=opt.help,
            )


def _resolve_options(ns: argparse.Namespace, options: tuple[_Option, ...]):
    """Apply the flag > environment > default precedence for each option.

    Returns the resolved values keyed by flag name, plus where each value
    came from ("flag", "env", or "default") so a command can tell an
    explicit request apart from a fallback.
    """
    values: dict[str, Any] = {}
    sources: dict[str, str] = {}
    for opt in options:
        given = getattr(ns, opt.dest)
        if given is not None:
            values[opt.name], sources[opt.name] = given, "flag"
            continue
        raw = os.environ.get(opt.env_var)
        if raw is not None:
            try:
                values[opt.name] = opt.parse(raw)
            except ValueError as exc:
                raise InputError(f"{opt.env_var}: {exc}") from exc
            sources[opt.name] = "env"
            continue
        if opt.required:
            raise InputError(
                f"missing required option --{opt.name} (or {opt.env_var})"
            )
        values[opt.name], sources[opt.name] = opt.default, "default"
    return values, sources


_SELECT_OPTIONS = (
    _Option("features", Path, required=True, help="input feature bank (binary format)"),
    _Option("out", Path, required=True, help="where to write the query-set JSON"),
    _Option("strategy", str, required=True, help=f"one of: {', '.join(STRATEGY_NAMES)}"),
    _Option("budget", _parse_budget, required=True,
            help="fraction in (0, 1] or an absolute count"),
    _Option("seed", int, default=0, help="selection seed (default 0)"),
    _Option("metric", str, default="euclidean", help="euclidean or cosine"),
    _Option("normalize", _choice_of("l2", "zscore", "raw"), default="l2",
            help="normalization applied to raw banks before selection "
                 "(default l2; already-tagged banks are left as stored)"),
    _Option("typicality-knn", int, help="neighbor count for typicality scores"),
    _Option("probcover-delta", float, help="explicit coverage radius"),
    _Option("probcover-quantile", float,
            help="distance quantile used when no radius is given"),
    _Option("repdiv-lambda", float, help="diversity weight"),
    _Option("fps-probabilistic", _parse_bool, is_flag=True,
            help="seed farthest-point traversal from a distance-weighted draw"),
    _Option("kmeans-restarts", int, help="k-means restarts per fit"),
    _Option("kmeans-max-iters", int, help="k-means iteration cap"),
    _Option("kmeans-tol", float, help="k-means convergence tolerance"),
)

_BENCH_OPTIONS = (
    _Option("out", Path, required=True, help="where to write the report"),
    _Option("format", _choice_of("csv", "json", "markdown"), default="markdown",
            help="report format (default markdown)"),
    _Option("strategies", _parse_names, default=list(STRATEGY_NAMES),
            help="comma-separated strategy names (default: all)"),
    _Option("budgets", _parse_floats, default=list(DEFAULT_BUDGETS),
            help="comma-separated budget fractions (default: 0.02,0.04,0.1)"),
    _Option("seeds", _parse_ints, default=list(DEFAULT_SEEDS),
            help="comma-separated grid seeds (default: 0,1,2,3,4)"),
    _Option("metric", str, default="euclidean", help="euclidean or cosine"),
    _Option("n-classes", int, default=10, help="mixture classes (default 10)"),
    _Option("samples-per-class", int, default=100,
            help="training samples per class (default 100)"),
    _Option("dim", int, default=32, help="feature dimension (default 32)"),
    _Option("separation", float, default=4.0,
            help="distance between adjacent class means, in sd units"),
    _Option("sd", float, default=1.0, help="within-class standard deviation"),
    _Option("mixture-seed", int, default=0, help="mixture construction seed"),
)

_INSPECT_OPTIONS = (
    _Option("features", Path, required=True, help="feature bank to inspect"),
)

_CONVERT_OPTIONS = (
    _Option("in", Path, required=True, help="input feature file"),
    _Option("out", Path, required=True, help="output feature file"),
    _Option("in-format", _choice_of("binary", "csv"), default="binary",
            help="input format (default binary)"),
    _Option("out-format", _choice_of("binary", "csv"), default="binary",
            help="output format (default binary)"),
    _Option("normalize", _choice_of("l2", "zscore"),
            help="normalize features before writing"),
)


def _bank_for_selection(bank, mode: str, explicit: bool):
    """Resolve the pre-selection normalization against the bank's tag.

    The default mode only applies to raw banks; a bank that arrives
    already normalized is used as stored unless the caller explicitly
    requested a conflicting mode, which is an error.
    """
    if mode == "raw" or bank.normalization == mode:
        return bank
    if bank.normalization == "raw":
        return normalize(bank, mode)
    if explicit:
        raise AlreadyNormalized(
            f"bank is already {bank.normalization}-normalized; cannot apply {mode}"
        )
    return bank


_CONFIG_FIELDS = (
    ("typicality-knn", "typicality_knn"),
    ("probcover-delta", "probcover_delta"),
    ("probcover-quantile", "probcover_delta_quantile"),
    ("repdiv-lambda", "repdiv_lambda"),
    ("kmeans-restarts", "kmeans_n_restarts"),
    ("kmeans-max-iters", "kmeans_max_iters"),
    ("kmeans-tol", "kmeans_tol"),
)


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def cmd_select(options: dict, sources: dict) -> int:
    bank = load_feature_bank(options["features"])
    work = _bank_for_selection(
        bank, options["normalize"], sources["normalize"] != "default"
    )
    cfg_kwargs: dict[str, Any] = {
        "seed": options["seed"],
        "metric": options["metric"],
    }
    for flag, field in _CONFIG_FIELDS:
        if options[flag] is not None:
            cfg_kwargs[field] = options[flag]
    if options["fps-probabilistic"]:
        cfg_kwargs["fps_probabilistic_seeding"] = True

    query = run_strategy(
        options["strategy"], work, options["budget"], StrategyConfig(**cfg_kwargs)
    )
    _write_text(options["out"], query.to_json() + "\n")

    print(f"strategy: {query.strategy}")
    print(f"M: {len(query.indices)}")
    print(f"seed: {query.seed}")
    print(f"normalization: {work.normalization}")
    for key in sorted(query.params):
        print(f"{key}: {query.params[key]}")
    print(f"out: {options['out']}")
    return 0


def cmd_bench(options: dict, sources: dict) -> int:
    spec = SyntheticSpec(
        n_classes=options["n-classes"],
        samples_per_class=options["samples-per-class"],
        dim=options["dim"],
        class_separation=options["separation"],
        within_class_sd=options["sd"],
        seed=options["mixture-seed"],
    )
    report = benchmark_matrix(
        spec,
        options["strategies"],
        options["budgets"],
        options["seeds"],
        metric=options["metric"],
    )
    emit_report(report, options["out"], format=options["format"])

    print(f"strategies: {','.join(options['strategies'])}")
    print(f"budgets: {','.join(str(f) for f in options['budgets'])}")
    print(f"seeds: {','.join(str(s) for s in options['seeds'])}")
    print(f"rows: {len(report.rows)}")
    print(f"out: {options['out']}")
    return 0


def cmd_inspect(options: dict, sources: dict) -> int:
    bank = load_feature_bank(options["features"])
    print(f"n_samples: {bank.n_samples}")
    print(f"dim: {bank.dim}")
    print(f"normalization: {bank.normalization}")
    print("manifest: " + json.dumps(bank.manifest.to_dict(), sort_keys=True))
    if bank.group_ids is not None:
        counts = Counter(bank.group_ids)
        print("groups:")
        for gid in sorted(counts):
            print(f"  {gid}: {counts[gid]}")

    report = validate(bank)
    for issue in report.issues:
        print(f"{issue.severity}: {issue.message}")
    if report.ok:
        print("OK")
        return 0
    print(f"invalid: {len(report.errors)} error(s)")
    return 2


def cmd_convert(options: dict, sources: dict) -> int:
    bank = load_feature_bank(options["in"], format=options["in-format"])
    if options["normalize"] is not None:
        bank = normalize(bank, options["normalize"])
    save_feature_bank(bank, options["out"], format=options["out-format"])

    print(f"n_samples: {bank.n_samples}")
    print(f"dim: {bank.dim}")
    print(f"normalization: {bank.normalization}")
    print(f"out: {options['out']}")
    return 0


_COMMANDS: dict[str, tuple[tuple[_Option, ...], Callable[[dict, dict], int], str]] = {
    "select": (_SELECT_OPTIONS, cmd_select,
               "run one selection strategy and write a query-set JSON file"),
    "bench": (_BENCH_OPTIONS, cmd_bench,
              "run the strategy/budget/seed benchmark grid and write a report"),
    "inspect": (_INSPECT_OPTIONS, cmd_inspect,
                "summarize a feature bank and validate its invariants"),
    "convert": (_CONVERT_OPTIONS, cmd_convert,
                "convert between binary and csv feature formats"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csalkit",
        description="Cold-start selection toolkit: pick which samples to "
                    "annotate first from a bank of extracted features.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (options, handler, description) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=description, description=description)
        _add_options(sub, options)
        sub.set_defaults(handler=handler, options_table=options)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, int):
            return exc.code
        return 0 if exc.code is None else 2

    try:
        options, sources = _resolve_options(ns, ns.options_table)
        return ns.handler(options, sources)
    except InputError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except OperationError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
