"""The rare-type-lr command line.

Exit codes are 0 on success, 1 when a result is flagged (boundary or
non-converged estimates) and 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, TextIO

from . import __version__
from .experiments import ExperimentSpec, run_experiment
from .inference import Hyperprior, QuadratureOptions, lr_bayes, mle_fit
from .oracle import (
    MhConfig,
    PopulationFreqs,
    oracle_report,
    true_lr,
    true_lr_exhaustive,
    write_chain_trace,
)
from .partitions import (
    DEFAULT_LOCI,
    IntegerPartition,
    extend_with_suspect,
    ingest_database,
    to_integer_partition,
)
from .pyp import (
    HyperParams,
    crp_labels,
    crp_sample_batch,
    iter_block_growth,
    stick_breaking_sample,
)

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FLAGGED = 1
EXIT_USAGE = 2

# flags a command can't run without, from the command line or --config
_REQUIRED = {"fit": ("db",), "lr": ("db",), "oracle": ("freqs",)}

# never part of the hashed configuration
_RUN_ONLY = ("command", "config", "out", "threads", "verbose")


class UsageError(ValueError):
    """The command line or config file can't be used."""


def _loci(text: str | Sequence[str]) -> tuple[str, ...]:
    if isinstance(text, str):
        return tuple(s.strip() for s in text.split(",") if s.strip())
    return tuple(text)


def _row_filter(text: str) -> tuple[str, str]:
    column, sep, value = text.partition("=")
    if not sep or not column:
        msg = f"expected COLUMN=VALUE, got {text!r}"
        raise argparse.ArgumentTypeError(msg)
    return (column, value)


def _block_sizes(text: str) -> IntegerPartition:
    try:
        sizes = [int(s) for s in text.split(",")]
        return IntegerPartition.from_sizes(sizes)
    except ValueError as e:
        msg = f"expected comma separated block sizes, got {text!r}"
        raise argparse.ArgumentTypeError(msg) from e


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file of flag values")
    parser.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    parser.add_argument("--out", type=Path, help="output file or directory (default: stdout)")
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker processes, results don't depend on it (default: 1)",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log INFO, repeat for DEBUG",
    )


def _database(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--db", type=Path, help="tab separated database")
    parser.add_argument(
        "--loci",
        type=_loci,
        default=DEFAULT_LOCI,
        help="comma separated locus columns (default: the seven minimal haplotype loci)",
    )
    parser.add_argument(
        "--filter",
        type=_row_filter,
        help="keep only rows where COLUMN=VALUE",
    )


def build_parser() -> argparse.ArgumentParser:
    """The top level parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="rare-type-lr",
        description="Bayesian nonparametric likelihood ratios for rare type matches.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="maximum likelihood (alpha, theta) of a database")
    _database(fit)
    fit.add_argument("--allow-boundary", action="store_true", help="exit 0 on flagged fits")
    _common(fit)

    lr = sub.add_parser("lr", help="Bayesian LR for a new matching type")
    _database(lr)
    lr.add_argument(
        "--prior",
        default="default",
        help="default | point:A,T | uniform:ALO,AHI:TLO,THI | independent:ALO,AHI:DENSITY:P1[,P2]",
    )
    lr.add_argument("--tolerance", type=float, default=1e-6, help="quadrature tolerance")
    lr.add_argument("--allow-boundary", action="store_true", help="exit 0 on flagged results")
    _common(lr)

    oracle = sub.add_parser("oracle", help="LR with known population frequencies")
    oracle.add_argument("--freqs", type=Path, help="one frequency or count per line")
    oracle.add_argument(
        "--partition",
        type=_block_sizes,
        help="block sizes of database plus suspect, e.g. 1,1,2,3",
    )
    _database(oracle)
    oracle.add_argument("--iterations", type=int, default=100_000)
    oracle.add_argument("--chains", type=int, default=1)
    oracle.add_argument("--exhaustive", action="store_true", help="enumerate instead of sampling")
    oracle.add_argument("--trace", type=Path, help="write the first chain's trace as CSV")
    _common(oracle)

    sim = sub.add_parser("simulate", help="draw partitions, weights or growth diagnostics")
    sim.add_argument("kind", choices=["crp", "sticks", "diagnostics"])
    sim.add_argument("--alpha", type=float, default=0.5)
    sim.add_argument("--theta", type=float, default=20.0)
    sim.add_argument("-n", "--customers", type=int, default=1000)
    sim.add_argument("--truncation", type=int, default=100_000)
    sim.add_argument("--replicates", type=int, default=1)
    sim.add_argument("--checkpoints", type=int, default=200)
    _common(sim)

    exp = sub.add_parser("experiment", help="run a JSON experiment spec")
    exp.add_argument("spec", type=Path)
    _common(exp)
    exp.set_defaults(seed=None)

    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parses flags, filling unset ones from --config.

    Raises:
        UsageError: If the config file has keys the command doesn't know or a
            required input is set nowhere.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        args = _merge_config(parser, args, argv)

    missing = [f"--{k}" for k in _REQUIRED.get(args.command, ()) if getattr(args, k) is None]
    if missing:
        msg = f"{args.command} needs {', '.join(missing)} on the command line or in --config"
        raise UsageError(msg)
    return args


def _merge_config(
    parser: argparse.ArgumentParser,
    args: argparse.Namespace,
    argv: Sequence[str] | None,
) -> argparse.Namespace:
    try:
        with args.config.open(encoding="utf-8") as f:
            config = json.load(f)
    except json.JSONDecodeError as e:
        msg = f"{args.config}: {e}"
        raise UsageError(msg) from e
    if not isinstance(config, dict):
        msg = f"{args.config}: expected a JSON object"
        raise UsageError(msg)

    values = {k.replace("-", "_"): v for k, v in config.items()}
    unknown = sorted(set(values) - set(vars(args)) | (set(values) & {"command", "config"}))
    if unknown:
        msg = f"{args.config}: unknown keys {', '.join(unknown)}"
        raise UsageError(msg)

    subparsers = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)  # noqa: SLF001
    )
    subparsers.choices[args.command].set_defaults(**values)
    args = parser.parse_args(argv)
    if isinstance(getattr(args, "loci", None), list):
        args.loci = _loci(args.loci)
    if isinstance(getattr(args, "filter", None), list):
        args.filter = tuple(args.filter)
    if isinstance(getattr(args, "partition", None), list):
        args.partition = IntegerPartition.from_sizes(args.partition)
    return args


def _run_info(args: argparse.Namespace) -> dict[str, Any]:
    resolved = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k not in _RUN_ONLY
    }
    digest = hashlib.sha256(json.dumps(resolved, sort_keys=True, default=str).encode())
    return {
        "version": __version__,
        "seed": args.seed,
        "config_sha256": digest.hexdigest(),
    }


@contextmanager
def _output(path: Path | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        yield f


def _emit_json(args: argparse.Namespace, obj: dict[str, Any]) -> None:
    with _output(args.out) as f:
        json.dump({**obj, "run": _run_info(args)}, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_fit(args: argparse.Namespace) -> int:
    """Fits (alpha, theta) to the whole database."""
    _, p = ingest_database(args.db, args.loci, row_filter=args.filter)
    m = mle_fit(p)
    _emit_json(args, m.to_json())
    if m.flagged and not args.allow_boundary:
        logger.error("The estimate is flagged, pass --allow-boundary to accept it")
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_lr(args: argparse.Namespace) -> int:
    """The LR for a suspect whose profile is new to the database."""
    prior = Hyperprior.parse(args.prior)
    _, p = ingest_database(args.db, args.loci, row_filter=args.filter)
    report = lr_bayes(extend_with_suspect(p), prior, QuadratureOptions(tolerance=args.tolerance))
    _emit_json(args, report.to_json())

    if not report.converged:
        logger.error("Posterior quadrature did not converge")
        return EXIT_FLAGGED
    if report.lr_plugin is None and not args.allow_boundary:
        logger.error("The MLE is flagged, pass --allow-boundary to accept the result")
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    """The LR with every population frequency known."""
    freqs = PopulationFreqs.load(args.freqs)
    if args.partition is not None:
        part = args.partition
    elif args.db is not None:
        _, p = ingest_database(args.db, args.loci, row_filter=args.filter)
        part = to_integer_partition(extend_with_suspect(p))
    else:
        msg = "oracle needs --partition or --db"
        raise UsageError(msg)

    if args.exhaustive:
        _emit_json(args, oracle_report(true_lr_exhaustive(freqs, part), None))
        return EXIT_OK

    cfg = MhConfig.with_defaults(args.iterations, args.seed, args.chains)
    result = true_lr(freqs, part, cfg, args.threads)
    if args.trace is not None:
        write_chain_trace(args.trace, freqs, part, cfg)
    _emit_json(args, oracle_report(result, cfg))
    return EXIT_OK


def _write_csv(path: Path | None, header: Sequence[str], rows: Any) -> None:  # noqa: ANN401
    with _output(path) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_simulate(args: argparse.Namespace) -> int:
    """Writes CRP labels, stick-breaking weights or growth diagnostics as CSV."""
    h = HyperParams(args.alpha, args.theta)
    if args.kind == "crp" and args.replicates > 1:
        labels = crp_sample_batch(args.customers, h, args.replicates, args.seed)
        rows = (
            (r, i, t)
            for r, row in enumerate(labels.tolist())
            for i, t in enumerate(row, start=1)
        )
        _write_csv(args.out, ["replicate", "customer", "table"], rows)
    elif args.kind == "crp":
        labels_1 = crp_labels(args.customers, h, args.seed)
        _write_csv(args.out, ["customer", "table"], enumerate(labels_1, start=1))
    elif args.kind == "sticks":
        w = stick_breaking_sample(h, args.truncation, args.seed)
        rows_w: list[tuple[Any, float]] = list(enumerate(w.weights.tolist(), start=1))
        rows_w.append(("residual", w.residual))
        _write_csv(args.out, ["rank", "weight"], rows_w)
    else:
        growth = iter_block_growth(h, args.customers, args.seed, args.checkpoints)
        _write_csv(args.out, ["n", "K_n", "K_n_over_n_alpha", "m1_over_K_n"], growth)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Runs a JSON experiment spec; --seed, --out and --threads override it."""
    spec = ExperimentSpec.load(args.spec)
    overrides: dict[str, Any] = {"threads": args.threads}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    run_experiment(replace(spec, **overrides))
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "lr": cmd_lr,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of the rare-type-lr script."""
    try:
        args = parse_args(argv)
    except (UsageError, OSError) as e:
        print(f"rare-type-lr: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        print(f"rare-type-lr: error: {e}", file=sys.stderr)
        return EXIT_USAGE
