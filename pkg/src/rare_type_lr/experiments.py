"""Simulation studies comparing the Bayesian and known-frequency likelihood ratios.

Every experiment is a pure function of its ExperimentSpec: seeds are split
from the master seed per population and per replicate, so the written CSV
and manifest only depend on the spec whatever the number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np

from . import __version__
from .inference import (
    BoundaryEstimateError,
    Hyperprior,
    Parametrization,
    contour_levels,
    loglik_surface,
    lr_bayes,
    mle_centered_grid,
    mle_fit,
)
from .oracle import MhConfig, PopulationFreqs, true_lr
from .partitions import (
    DEFAULT_LOCI,
    extend_with_suspect,
    ingest_database,
    partition_from_labels,
    ranked_frequencies,
    to_integer_partition,
)
from .pyp import HyperParams, crp_labels, crp_sample, power_law_reference, split_seeds

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

logger = logging.getLogger(__name__)

SUSPECT_CONSTRUCTION = (
    "uniform over population individuals whose type is absent from the subsample"
)


class ExperimentName(str, Enum):
    """The available studies."""

    MODEL_FIT = "model_fit"
    SURFACE = "surface"
    TEST1 = "test1"
    TEST2 = "test2"
    TEST3 = "test3"


class SourceFormat(str, Enum):
    """How a population file is laid out."""

    DATABASE = "database"
    COUNTS = "counts"


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything an experiment run depends on."""

    name: ExperimentName
    output_dir: Path
    seed: int = 0
    """A database or counts file; None draws a CRP population at (alpha, theta)."""
    source: Path | None = None
    source_format: SourceFormat = SourceFormat.DATABASE
    loci: tuple[str, ...] = DEFAULT_LOCI
    """Keep only database rows whose column holds the value."""
    row_filter: tuple[str, str] | None = None
    """Generating parameters for synthetic populations and Test 3."""
    alpha: float = 0.5
    theta: float = 216.0
    n_population: int = 2085
    n_sample: int = 100
    n_replicates: int = 100
    n_populations: int = 1
    mh_iterations: int = 20_000
    prior: str = "default"
    grid_points: int = 41
    threads: int = 1

    def __post_init__(self) -> None:
        """Checks the sizes.

        Raises:
            ValueError: If the sizes can't describe a study.
        """
        if self.n_sample < 1 or self.n_sample > self.n_population:
            msg = f"n_sample must be in 1..n_population, got {self.n_sample}."
            raise ValueError(msg)
        if self.n_replicates < 1 or self.n_populations < 1:
            msg = "n_replicates and n_populations must be positive."
            raise ValueError(msg)
        if self.threads < 1:
            msg = "threads must be positive."
            raise ValueError(msg)
        HyperParams(self.alpha, self.theta)
        Hyperprior.parse(self.prior)

    @staticmethod
    def from_json(obj: dict[str, Any]) -> ExperimentSpec:
        """Builds a spec from parsed JSON.

        Raises:
            ValueError: On unknown keys or values of the wrong kind.
        """
        known = {f.name for f in fields(ExperimentSpec)}
        unknown = sorted(set(obj) - known)
        if unknown:
            msg = f"Unknown experiment keys: {', '.join(unknown)}."
            raise ValueError(msg)
        if "name" not in obj or "output_dir" not in obj:
            msg = "An experiment needs a name and an output_dir."
            raise ValueError(msg)

        kw = dict(obj)
        kw["name"] = ExperimentName(kw["name"])
        kw["output_dir"] = Path(kw["output_dir"])
        if kw.get("source") is not None:
            kw["source"] = Path(kw["source"])
        if "source_format" in kw:
            kw["source_format"] = SourceFormat(kw["source_format"])
        if "loci" in kw:
            kw["loci"] = tuple(str(x) for x in kw["loci"])
        if kw.get("row_filter") is not None:
            column, value = kw["row_filter"]
            kw["row_filter"] = (str(column), str(value))
        return ExperimentSpec(**kw)

    @staticmethod
    def load(path: str | Path) -> ExperimentSpec:
        """Reads a JSON spec file."""
        with Path(path).open(encoding="utf-8") as f:
            return ExperimentSpec.from_json(json.load(f))

    def to_json(self) -> dict[str, Any]:
        """A JSON compatible form, inverse of from_json."""
        d = asdict(self)
        d["name"] = self.name.value
        d["output_dir"] = str(self.output_dir)
        d["source"] = None if self.source is None else str(self.source)
        d["source_format"] = self.source_format.value
        d["loci"] = list(self.loci)
        d["row_filter"] = None if self.row_filter is None else list(self.row_filter)
        return d

    def digest(self) -> str:
        """sha256 of the canonical JSON form, threads excluded."""
        d = self.to_json()
        del d["threads"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class LrComparisonRow:
    """Known-frequency against Bayesian likelihood ratio for one replicate."""

    population_id: int
    replicate_id: int
    n: int
    log10_lr_true: float
    log10_lr_bayes: float
    log10_error: float
    mc_std_error: float

    @staticmethod
    def create(
        population_id: int,
        replicate_id: int,
        n: int,
        lr_true: float,
        lr_bayes: float,
        mc_std_error: float,
    ) -> LrComparisonRow:
        """Fills in the log scale columns."""
        t, b = math.log10(lr_true), math.log10(lr_bayes)
        return LrComparisonRow(population_id, replicate_id, n, t, b, t - b, mc_std_error)


class SkippedReplicate(NamedTuple):
    """A replicate that produced no row."""

    population_id: int
    replicate_id: int
    reason: str


@dataclass
class ExperimentResult:
    """What a run produced and where it was written."""

    name: ExperimentName
    rows: list[Any] = field(default_factory=list)
    skipped: list[SkippedReplicate] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)


def load_population(spec: ExperimentSpec, seed: int) -> npt.NDArray[np.int64]:
    """Type labels of every population member.

    Raises:
        ValueError: If the source is smaller than the sample.
        DatabaseParseError: If the database can't be read.
    """
    if spec.source is None:
        labels = np.asarray(
            crp_labels(spec.n_population, HyperParams(spec.alpha, spec.theta), seed),
            dtype=np.int64,
        )
    elif spec.source_format == SourceFormat.COUNTS:
        counts = _read_counts(spec.source)
        labels = np.repeat(np.arange(len(counts)), counts)
    else:
        _, p = ingest_database(spec.source, spec.loci, row_filter=spec.row_filter)
        labels = np.asarray(p.labels(), dtype=np.int64)

    if len(labels) < spec.n_sample:
        msg = f"The population has {len(labels)} members, fewer than n_sample={spec.n_sample}."
        raise ValueError(msg)
    return labels


def _read_counts(path: Path) -> list[int]:
    counts: list[int] = []
    with path.open(encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                c = int(text)
            except ValueError as e:
                msg = f"{path}:{i}: {text!r} is not a count"
                raise ValueError(msg) from e
            if c < 1:
                msg = f"{path}:{i}: counts must be positive"
                raise ValueError(msg)
            counts.append(c)
    if not counts:
        msg = f"{path}: no counts"
        raise ValueError(msg)
    return counts


@dataclass(frozen=True)
class _ReplicateTask:
    population_id: int
    replicate_id: int
    seed: int
    population: npt.NDArray[np.int64]
    n_sample: int
    mh_iterations: int
    prior: str
    point: tuple[float, float] | None


def draw_rare_type_sample(
    population: npt.NDArray[np.int64],
    n_sample: int,
    rng: np.random.Generator,
) -> tuple[npt.NDArray[np.int64], int] | None:
    """A subsample without replacement and a suspect type absent from it.

    Returns:
        The subsample labels and the suspect's type, None when every
        population type occurs in the subsample.
    """
    idx = rng.choice(len(population), size=n_sample, replace=False)
    sub = population[idx]
    outside = np.flatnonzero(~np.isin(population, sub))
    if len(outside) == 0:
        return None
    return (sub, int(population[outside[rng.integers(len(outside))]]))


def _run_replicate(task: _ReplicateTask) -> LrComparisonRow | SkippedReplicate:
    sample_seed, mh_seed = split_seeds(task.seed, 2)
    drawn = draw_rare_type_sample(
        task.population,
        task.n_sample,
        np.random.default_rng(sample_seed),
    )
    if drawn is None:
        return SkippedReplicate(
            task.population_id,
            task.replicate_id,
            "the subsample contains every population type",
        )
    sub, _ = drawn

    p_plus = extend_with_suspect(partition_from_labels(sub.tolist()))
    freqs = PopulationFreqs.from_labels(task.population.tolist())
    oracle = true_lr(
        freqs,
        to_integer_partition(p_plus),
        MhConfig.with_defaults(task.mh_iterations, mh_seed),
    )

    prior = Hyperprior.point_mass(*task.point) if task.point else Hyperprior.parse(task.prior)
    report = lr_bayes(p_plus, prior)
    return LrComparisonRow.create(
        task.population_id,
        task.replicate_id,
        report.n,
        oracle.lr,
        report.lr_bayes,
        oracle.mc_std_error,
    )


def _run_lr_comparison(
    spec: ExperimentSpec,
    n_populations: int,
    point: tuple[float, float] | None,
) -> ExperimentResult:
    tasks: list[_ReplicateTask] = []
    for pid, pop_seed in enumerate(split_seeds(spec.seed, n_populations)):
        gen_seed, *rep_seeds = split_seeds(pop_seed, spec.n_replicates + 1)
        population = load_population(spec, gen_seed)
        tasks.extend(
            _ReplicateTask(
                pid,
                rid,
                s,
                population,
                spec.n_sample,
                spec.mh_iterations,
                spec.prior,
                point,
            )
            for rid, s in enumerate(rep_seeds)
        )

    if spec.threads > 1:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            outcomes = list(pool.map(_run_replicate, tasks))
    else:
        outcomes = [_run_replicate(t) for t in tasks]

    result = ExperimentResult(spec.name)
    for o in outcomes:
        if isinstance(o, SkippedReplicate):
            logger.info(
                "Skipped replicate %d of population %d: %s",
                o.replicate_id,
                o.population_id,
                o.reason,
            )
            result.skipped.append(o)
        else:
            result.rows.append(o)
    result.rows.sort(key=lambda r: (r.population_id, r.replicate_id))

    errors = np.array([r.log10_error for r in result.rows])
    result.summary = {
        "rows": len(result.rows),
        "skipped": len(result.skipped),
        "median_log10_error": float(np.median(errors)) if len(errors) else None,
        "median_abs_log10_error": float(np.median(np.abs(errors))) if len(errors) else None,
        "suspect_construction": SUSPECT_CONSTRUCTION,
    }
    return result


def run_test1(spec: ExperimentSpec) -> ExperimentResult:
    """A fixed population treated as exhaustive, its empirical frequencies known.

    Raises:
        ValueError: If the spec names no population source.
    """
    if spec.source is None:
        msg = "test1 needs a population source."
        raise ValueError(msg)
    return _write(spec, _run_lr_comparison(spec, 1, None))


def run_test2(spec: ExperimentSpec) -> ExperimentResult:
    """Like test1 on n_populations CRP populations drawn at (alpha, theta)."""
    return _write(spec, _run_lr_comparison(_synthetic(spec), spec.n_populations, None))


def run_test3(spec: ExperimentSpec) -> ExperimentResult:
    """Like test2 with the Bayesian LR taken at the generating parameters."""
    return _write(
        spec,
        _run_lr_comparison(_synthetic(spec), spec.n_populations, (spec.alpha, spec.theta)),
    )


def _synthetic(spec: ExperimentSpec) -> ExperimentSpec:
    if spec.source is not None:
        logger.info("Ignoring source %s, %s draws its populations", spec.source, spec.name.value)
    return ExperimentSpec.from_json({**spec.to_json(), "source": None})


class RankedRow(NamedTuple):
    """One point of a ranked frequency series."""

    rank: int
    rel_freq: float
    series_id: str


def _source_labels(spec: ExperimentSpec, seed: int) -> tuple[list[int], int]:
    labels = load_population(spec, seed).tolist()
    return (labels, len(labels))


def run_model_fit(spec: ExperimentSpec) -> ExperimentResult:
    """Ranked frequencies of the source against CRP replicates at its MLE.

    Writes the source series, n_replicates replicate series and the power law
    reference line at the fitted discount, each summing to 1. The reference
    line's unnormalized scale Z is kept in the summary.
    """
    source_seed, *rep_seeds = split_seeds(spec.seed, spec.n_replicates + 1)
    labels, n = _source_labels(spec, source_seed)
    p = partition_from_labels(labels)
    mle = mle_fit(p)
    if mle.flagged:
        logger.warning(
            "Replicates use a flagged estimate (%.4g, %.4g)",
            mle.alpha_hat,
            mle.theta_hat,
        )

    result = ExperimentResult(spec.name)
    result.rows.extend(_ranked_rows(ranked_frequencies(p), "source"))

    h = HyperParams(mle.alpha_hat, mle.theta_hat)
    for rid, s in enumerate(rep_seeds):
        q = crp_sample(n, h, s)
        result.rows.extend(_ranked_rows(ranked_frequencies(q), f"replicate_{rid}"))

    ref = power_law_reference(np.arange(1, p.k + 1), mle.alpha_hat, p.k, n).tolist()
    # normalized over the observed ranks, the slope is unchanged
    total = math.fsum(ref)
    result.rows.extend(_ranked_rows([f / total for f in ref], "power_law"))

    result.summary = {"n": n, "k": p.k, "mle": mle.to_json(), "power_law_scale": ref[0]}
    return _write(spec, result)


def _ranked_rows(freqs: Sequence[float], series_id: str) -> list[RankedRow]:
    return [RankedRow(i, f, series_id) for i, f in enumerate(freqs, start=1)]


def run_surface(spec: ExperimentSpec) -> ExperimentResult:
    """The log-likelihood surface of the source plus suspect in both parametrizations.

    Raises:
        BoundaryEstimateError: If the MLE is flagged, there is no curvature to overlay.
    """
    labels, _ = _source_labels(spec, split_seeds(spec.seed, 1)[0])
    p_plus = extend_with_suspect(partition_from_labels(labels))
    mle = mle_fit(p_plus)
    if mle.flagged:
        msg = "The surface needs an interior maximum likelihood estimate."
        raise BoundaryEstimateError(msg)

    result = ExperimentResult(spec.name)
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    n = p_plus.n - 1
    for param in Parametrization:
        nodes = mle_centered_grid(mle, n, param, points=spec.grid_points)
        table = loglik_surface(p_plus, nodes, param, mle)
        path = spec.output_dir / f"surface_{param.value}.csv"
        table.write_csv(path)
        result.files.append(path)
        result.rows.append(table)

    result.summary = {
        "mle": mle.to_json(),
        "contour_levels": {str(k): v for k, v in contour_levels().items()},
    }
    return _write(spec, result)


def _write(spec: ExperimentSpec, result: ExperimentResult) -> ExperimentResult:
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    if result.name in (ExperimentName.TEST1, ExperimentName.TEST2, ExperimentName.TEST3):
        path = spec.output_dir / f"{result.name.value}.csv"
        header = [f.name for f in fields(LrComparisonRow)]
        _write_rows(path, header, [_cells(r) for r in result.rows])
        result.files.append(path)
    elif result.name == ExperimentName.MODEL_FIT:
        path = spec.output_dir / "model_fit.csv"
        _write_rows(path, list(RankedRow._fields), result.rows)
        result.files.append(path)

    manifest = {
        "experiment": result.name.value,
        "version": __version__,
        "seed": spec.seed,
        "spec_sha256": spec.digest(),
        "spec": {k: v for k, v in spec.to_json().items() if k != "threads"},
        "files": [p.name for p in result.files],
        "skipped": [s._asdict() for s in result.skipped],
        "summary": result.summary,
    }
    path = spec.output_dir / f"{result.name.value}.manifest.json"
    with path.open("w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    result.files.append(path)
    return result


def _cells(r: LrComparisonRow) -> tuple[Any, ...]:
    return tuple(getattr(r, f.name) for f in fields(LrComparisonRow))


def _write_rows(path: Path, header: list[str], rows: Sequence[Sequence[Any]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


RUNNERS = {
    ExperimentName.MODEL_FIT: run_model_fit,
    ExperimentName.SURFACE: run_surface,
    ExperimentName.TEST1: run_test1,
    ExperimentName.TEST2: run_test2,
    ExperimentName.TEST3: run_test3,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Dispatches on spec.name and logs the wall time."""
    start = time.perf_counter()
    result = RUNNERS[spec.name](spec)
    logger.info(
        "Experiment %s finished in %.1fs, wrote %s",
        spec.name.value,
        time.perf_counter() - start,
        ", ".join(str(p) for p in result.files),
    )
    return result
