"""The likelihood ratio when population frequencies are known.

With p known, LR = N1 / E(sum of singleton frequencies | (a, r), p). Which
species fill which observed size class is latent: chi maps every species rank
to the index of its size class in a, or to 0 when unobserved. Given (a, r)
the probability of chi is proportional to prod_{chi_i > 0} p_i^{a_{chi_i}};
the multinomial coefficient only depends on (a, r).
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .partitions import IntegerPartition, singleton_count
from .pyp import split_seeds

if TYPE_CHECKING:
    from collections.abc import Hashable, Sequence

    import numpy.typing as npt

logger = logging.getLogger(__name__)

FREQUENCY_TOLERANCE = 1e-12
MAX_ENUMERATION = 10_000_000


class InstanceTooLargeError(ValueError):
    """The enumeration oracle was asked for too many assignments."""


@dataclass(frozen=True)
class PopulationFreqs:
    """A finite, normalized frequency vector sorted in decreasing order."""

    p: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        """Checks positivity, order and normalization.

        Raises:
            ValueError: If p is not a decreasing probability vector.
        """
        if self.p.ndim != 1 or len(self.p) == 0:
            msg = "Frequencies must be a nonempty vector."
            raise ValueError(msg)
        if np.any(self.p <= 0):
            msg = "Frequencies must be positive."
            raise ValueError(msg)
        if np.any(np.diff(self.p) > 0):
            msg = "Frequencies must be sorted in decreasing order."
            raise ValueError(msg)
        total = math.fsum(self.p.tolist())
        if abs(total - 1.0) > FREQUENCY_TOLERANCE:
            msg = f"Frequencies sum to {total}, not 1."
            raise ValueError(msg)

    @property
    def m(self) -> int:
        """M, the number of species."""
        return len(self.p)

    @staticmethod
    def from_counts(counts: Sequence[float]) -> PopulationFreqs:
        """Normalizes and sorts counts (or unsorted frequencies)."""
        c = np.sort(np.asarray(counts, dtype=np.float64))[::-1]
        if np.any(c <= 0):
            msg = "Counts must be positive."
            raise ValueError(msg)
        p = c / math.fsum(c.tolist())
        # renormalize so the rounding of the division stays inside tolerance
        return PopulationFreqs(p / math.fsum(p.tolist()))

    @staticmethod
    def from_labels(labels: Sequence[Hashable]) -> PopulationFreqs:
        """Empirical frequencies of the types in a population."""
        _, counts = np.unique(np.asarray([str(x) for x in labels]), return_counts=True)
        return PopulationFreqs.from_counts(counts.tolist())

    @staticmethod
    def load(path: str | Path) -> PopulationFreqs:
        """Reads one frequency or count per line, blank lines and # comments skipped.

        Raises:
            ValueError: If a line is not a number.
        """
        values: list[float] = []
        with Path(path).open(encoding="utf-8") as f:
            for i, line in enumerate(f, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                try:
                    values.append(float(text))
                except ValueError as e:
                    msg = f"{path}:{i}: {text!r} is not a number"
                    raise ValueError(msg) from e
        if not values:
            msg = f"{path}: no frequencies"
            raise ValueError(msg)
        return PopulationFreqs.from_counts(values)


@dataclass(frozen=True)
class ChiAssignment:
    """Species ranks mapped to size-class indexes (1-based into a, 0 for unobserved)."""

    chi: npt.NDArray[np.int64]

    def validate(self, part: IntegerPartition) -> None:
        """Checks that class j is used exactly r_j times.

        Raises:
            ValueError: If the assignment doesn't match the partition.
        """
        counts = np.bincount(self.chi, minlength=len(part.r) + 1)
        if len(counts) > len(part.r) + 1 or tuple(counts[1:].tolist()) != part.r:
            msg = f"Assignment uses classes {counts[1:].tolist()}, expected {list(part.r)}."
            raise ValueError(msg)

    @staticmethod
    def initial(p: PopulationFreqs, part: IntegerPartition) -> ChiAssignment:
        """Largest size classes on the most frequent species.

        Raises:
            ValueError: If the partition has more blocks than there are species.
        """
        if part.k > p.m:
            msg = f"{part.k} observed types cannot come from {p.m} species."
            raise ValueError(msg)
        chi = np.zeros(p.m, dtype=np.int64)
        i = 0
        for j in range(len(part.a), 0, -1):
            chi[i : i + part.r[j - 1]] = j
            i += part.r[j - 1]
        return ChiAssignment(chi)


@dataclass(frozen=True)
class MhConfig:
    """Settings for the Metropolis-Hastings chains."""

    iterations: int = 100_000
    burn_in: int = 10_000
    thinning: int = 10
    seed: int = 0
    chains: int = 1
    batches: int = 50

    def __post_init__(self) -> None:
        """Checks the chain lengths.

        Raises:
            ValueError: On an impossible configuration.
        """
        if not (0 <= self.burn_in < self.iterations):
            msg = "burn_in must be nonnegative and below iterations."
            raise ValueError(msg)
        if self.thinning < 1 or self.chains < 1 or self.batches < 1:
            msg = "thinning, chains and batches must be positive."
            raise ValueError(msg)
        if self.iterations - self.burn_in < self.thinning:
            msg = "No samples are kept after burn-in and thinning."
            raise ValueError(msg)

    @staticmethod
    def with_defaults(iterations: int, seed: int = 0, chains: int = 1) -> MhConfig:
        """10% burn-in and thinning 10 for the given length."""
        return MhConfig(iterations, iterations // 10, 10, seed, chains)


def _class_sizes(part: IntegerPartition) -> npt.NDArray[np.float64]:
    # a_0 = 0 for unobserved species
    return np.asarray([0, *part.a], dtype=np.float64)


def _singleton_class(part: IntegerPartition) -> int:
    if not part.a or part.a[0] != 1:
        msg = "no singleton class"
        raise ValueError(msg)
    return 1


def chi_log_weight(chi: ChiAssignment, p: PopulationFreqs, part: IntegerPartition) -> float:
    """sum over observed species of a_{chi_i} log p_i, the unnormalized log target."""
    if len(chi.chi) != p.m:
        msg = f"Assignment has length {len(chi.chi)}, frequencies {p.m}."
        raise ValueError(msg)
    chi.validate(part)
    return float((_class_sizes(part)[chi.chi] * np.log(p.p)).sum())


def mh_step(
    chi: ChiAssignment,
    p: PopulationFreqs,
    part: IntegerPartition,
    rng: np.random.Generator,
) -> ChiAssignment:
    """One swap move; returns a new assignment.

    Two positions holding different classes are chosen uniformly and their
    classes swapped with probability min(1, target ratio).
    """
    x = chi.chi.copy()
    _Chain(p, part, x, rng).step()
    return ChiAssignment(x)


class _Chain:
    """A swap-move Metropolis-Hastings chain updated in place."""

    def __init__(
        self,
        p: PopulationFreqs,
        part: IntegerPartition,
        chi: npt.NDArray[np.int64],
        rng: np.random.Generator,
    ):
        self.log_p = np.log(p.p).tolist()
        self.p = p.p.tolist()
        self.sizes = _class_sizes(part).tolist()
        self.chi = chi
        self.rng = rng
        self.m = p.m
        self.movable = len(np.unique(chi)) > 1
        self.singleton_mass = sum(
            q for q, c in zip(self.p, chi.tolist()) if c > 0 and self.sizes[c] == 1
        )
        self.accepted = 0
        self._buffer: list[float] = []

    def _uniform(self) -> float:
        if not self._buffer:
            self._buffer = self.rng.random(4096).tolist()
        return self._buffer.pop()

    def step(self) -> None:
        if not self.movable:
            return
        chi, m = self.chi, self.m
        while True:
            i = int(self._uniform() * m)
            j = int(self._uniform() * m)
            ci, cj = int(chi[i]), int(chi[j])
            if ci != cj:
                break

        ai, aj = self.sizes[ci], self.sizes[cj]
        delta = (aj - ai) * (self.log_p[i] - self.log_p[j])
        if delta >= 0 or math.log(self._uniform() or 1e-300) < delta:
            chi[i], chi[j] = cj, ci
            self.accepted += 1
            if ai == 1:
                self.singleton_mass += self.p[j] - self.p[i]
            if aj == 1:
                self.singleton_mass += self.p[i] - self.p[j]


class MhEstimate(NamedTuple):
    """A chain average and its Monte Carlo standard error."""

    estimate: float
    mc_std_error: float
    acceptance: float


def _batch_means(samples: npt.NDArray[np.float64], batches: int) -> float:
    b = min(batches, len(samples))
    if b < 2:  # noqa: PLR2004
        return math.nan
    size = len(samples) // b
    means = samples[: size * b].reshape(b, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(b))


def _run_chain(
    p: PopulationFreqs,
    part: IntegerPartition,
    cfg: MhConfig,
    seed: int,
    trace: list[tuple[int, float]] | None = None,
) -> MhEstimate:
    rng = np.random.default_rng(seed)
    chain = _Chain(p, part, ChiAssignment.initial(p, part).chi, rng)
    samples: list[float] = []
    for it in range(1, cfg.iterations + 1):
        chain.step()
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0:
            samples.append(chain.singleton_mass)
            if trace is not None:
                trace.append((it, chain.singleton_mass))

    s = np.asarray(samples)
    acceptance = chain.accepted / cfg.iterations
    return MhEstimate(float(s.mean()), _batch_means(s, cfg.batches), acceptance)


def _chain_seeds(cfg: MhConfig) -> list[int]:
    return split_seeds(cfg.seed, cfg.chains) if cfg.chains > 1 else [cfg.seed]


def write_chain_trace(
    path: str | Path,
    p: PopulationFreqs,
    part: IntegerPartition,
    cfg: MhConfig,
) -> None:
    """Reruns the first chain and writes its kept states as (iteration, singleton_mass)."""
    trace: list[tuple[int, float]] = []
    _run_chain(p, part, cfg, _chain_seeds(cfg)[0], trace)
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iteration", "singleton_mass"])
        w.writerows(trace)


def _combine(estimates: Sequence[MhEstimate]) -> MhEstimate:
    if len(estimates) == 1:
        return estimates[0]
    est = np.array([e.estimate for e in estimates])
    se = np.array([e.mc_std_error for e in estimates])
    acc = float(np.mean([e.acceptance for e in estimates]))
    if np.all(se > 0):
        w = 1 / se**2
        return MhEstimate(float((w * est).sum() / w.sum()), float(1 / math.sqrt(w.sum())), acc)
    return MhEstimate(float(est.mean()), float(se.max() / math.sqrt(len(est))), acc)


def estimate_singleton_mass(
    p: PopulationFreqs,
    part: IntegerPartition,
    cfg: MhConfig,
    threads: int = 1,
) -> MhEstimate:
    """E(sum of singleton frequencies | (a, r), p) by Metropolis-Hastings.

    Independent chains get seeds split from cfg.seed and are combined by
    inverse-variance weighting in chain order.

    Raises:
        ValueError: If the partition has no singletons.
    """
    _singleton_class(part)
    seeds = _chain_seeds(cfg)
    if threads > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, cfg.chains)) as pool:
            runs = list(pool.map(_run_chain, *zip(*[(p, part, cfg, s) for s in seeds])))
    else:
        runs = [_run_chain(p, part, cfg, s) for s in seeds]

    out = _combine(runs)
    logger.debug(
        "Singleton mass %.6g +- %.2g over %d chain(s), acceptance %.2f",
        out.estimate,
        out.mc_std_error,
        len(runs),
        out.acceptance,
    )
    return out


def _log_assignment_count(m: int, part: IntegerPartition) -> float:
    unobserved = m - part.k
    return float(
        gammaln(m + 1) - gammaln(unobserved + 1) - sum(gammaln(r + 1) for r in part.r),
    )


def enumerate_chi_expectation(p: PopulationFreqs, part: IntegerPartition) -> float:
    """Exact E(sum of singleton frequencies) over every valid assignment.

    Raises:
        InstanceTooLargeError: If there are more than 10^7 assignments.
        ValueError: If the partition has no singletons or too many blocks.
    """
    _singleton_class(part)
    if part.k > p.m:
        msg = f"{part.k} observed types cannot come from {p.m} species."
        raise ValueError(msg)
    count = math.exp(_log_assignment_count(p.m, part))
    if count > MAX_ENUMERATION:
        msg = (
            f"Enumeration needs {count:.3g} assignments, "
            f"the limit is {MAX_ENUMERATION:.0e}."
        )
        raise InstanceTooLargeError(msg)

    log_p = np.log(p.p)
    sizes = _class_sizes(part)
    log_w: list[float] = []
    mass: list[float] = []

    def place(j: int, free: tuple[int, ...], chi: list[int]) -> None:
        if j == 0:
            c = np.asarray(chi)
            log_w.append(float((sizes[c] * log_p).sum()))
            mass.append(float(p.p[c == 1].sum()))
            return
        for chosen in itertools.combinations(free, part.r[j - 1]):
            for i in chosen:
                chi[i] = j
            rest = tuple(i for i in free if i not in chosen)
            place(j - 1, rest, chi)
            for i in chosen:
                chi[i] = 0

    place(len(part.a), tuple(range(p.m)), [0] * p.m)
    lw = np.asarray(log_w)
    return float(np.exp(logsumexp(lw, b=np.asarray(mass)) - logsumexp(lw)))


class TrueLr(NamedTuple):
    """The known-frequency likelihood ratio."""

    lr: float
    mc_std_error: float


def true_lr(
    p: PopulationFreqs,
    part_plus: IntegerPartition,
    cfg: MhConfig,
    threads: int = 1,
) -> TrueLr:
    """N1 / E(sum of singleton frequencies | (a, r), p) by Metropolis-Hastings.

    The error is propagated with the delta method.
    """
    n1 = singleton_count(part_plus)
    est = estimate_singleton_mass(p, part_plus, cfg, threads)
    lr = n1 / est.estimate
    return TrueLr(lr, n1 * est.mc_std_error / est.estimate**2)


def true_lr_exhaustive(p: PopulationFreqs, part_plus: IntegerPartition) -> TrueLr:
    """N1 / E(...) with the expectation enumerated exactly."""
    return TrueLr(singleton_count(part_plus) / enumerate_chi_expectation(p, part_plus), 0.0)


def oracle_report(
    result: TrueLr,
    cfg: MhConfig | None,
) -> dict[str, Any]:
    """The JSON form {lr, mc_se, iterations, seed}."""
    out: dict[str, Any] = {"lr": result.lr, "mc_se": result.mc_std_error}
    if cfg is None:
        out.update({"iterations": 0, "seed": None, "exhaustive": True})
    else:
        out.update({k: v for k, v in asdict(cfg).items() if k in ("iterations", "seed", "chains")})
    return out
