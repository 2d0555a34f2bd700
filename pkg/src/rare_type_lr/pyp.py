"""Two-parameter Poisson-Dirichlet machinery.

Exchangeable partition probabilities (the Pitman sampling formula), the
Chinese restaurant process, GEM stick breaking and the large-sample
diagnostics of PD(alpha, theta) partitions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .partitions import IntegerPartition, SetPartition, to_integer_partition

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    import numpy.typing as npt

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 100_000
WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class HyperParams:
    """Discount alpha and concentration theta of PD(alpha, theta).

    Valid pairs satisfy 0 <= alpha < 1 and theta > -alpha. Samplers further
    require alpha > 0; alpha == 0 (Ewens) is only meaningful for likelihoods.
    """

    alpha: float
    theta: float

    def __post_init__(self) -> None:
        """Rejects pairs outside the PD parameter space.

        Raises:
            ValueError: If alpha is outside [0, 1) or theta <= -alpha.
        """
        if not (0.0 <= self.alpha < 1.0) or not math.isfinite(self.alpha):
            msg = f"alpha must be in [0, 1), got {self.alpha}."
            raise ValueError(msg)
        if not (self.theta > -self.alpha) or not math.isfinite(self.theta):
            msg = f"theta must be greater than -alpha, got {self.theta}."
            raise ValueError(msg)

    def require_discount(self) -> None:
        """Samplers only support the 0 < alpha < 1 range.

        Raises:
            ValueError: If alpha is zero.
        """
        if self.alpha <= 0.0:
            msg = "Sampling requires 0 < alpha < 1."
            raise ValueError(msg)


@dataclass(frozen=True)
class WeightVector:
    """The first M stick-breaking weights and the unbroken remainder."""

    weights: npt.NDArray[np.float64]
    residual: float

    def __post_init__(self) -> None:
        """Checks that the sticks add up.

        Raises:
            ValueError: If a weight is not positive or the mass isn't one.
        """
        if self.weights.ndim != 1 or len(self.weights) == 0:
            msg = "Weights must be a nonempty vector."
            raise ValueError(msg)
        if np.any(self.weights <= 0):
            msg = "Stick-breaking weights must be positive."
            raise ValueError(msg)
        total = math.fsum(self.weights.tolist()) + self.residual
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            msg = f"Weights and residual sum to {total}, not 1."
            raise ValueError(msg)

    @property
    def truncation(self) -> int:
        """M, the number of explicit weights."""
        return len(self.weights)

    def ranked(self) -> npt.NDArray[np.float64]:
        """Weights in decreasing order, approximating a PD draw."""
        return np.sort(self.weights)[::-1]


def split_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds derived from a master seed.

    The derivation only depends on (seed, count position) so replicates stay
    reproducible however they are scheduled.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def log_rising_factorial(x: float, a: int, b: float) -> float:
    """log of prod_{i=0}^{a-1} (x + i*b), zero for the empty product.

    Raises:
        ValueError: If a factor is not positive.
    """
    if a < 0:
        msg = f"The number of factors must be nonnegative, got {a}."
        raise ValueError(msg)
    if a == 0:
        return 0.0
    if x <= 0 or x + (a - 1) * b <= 0:
        msg = f"Rising factorial [{x}]_{{{a};{b}}} has a nonpositive factor."
        raise ValueError(msg)
    if b == 0:
        return a * math.log(x)
    if b > 0:
        return float(a * math.log(b) + gammaln(x / b + a) - gammaln(x / b))
    return float(np.log(x + b * np.arange(a)).sum())


def log_eppf_arrays(
    p: IntegerPartition,
    alpha: npt.ArrayLike,
    theta: npt.ArrayLike,
) -> npt.NDArray[np.float64]:
    """Pitman sampling formula evaluated on broadcast arrays of parameters.

    No validation is done; callers must stay inside the parameter space.
    alpha == 0 entries use the Ewens limit.
    """
    al = np.asarray(alpha, dtype=np.float64)
    th = np.asarray(theta, dtype=np.float64)
    al, th = np.broadcast_arrays(al, th)
    k = p.k
    n = p.n

    # [theta + alpha]_{k-1; alpha}
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(al > 0, al, 1.0)
        new_tables = np.where(
            al > 0,
            (k - 1) * np.log(safe) + gammaln(th / safe + k) - gammaln(th / safe + 1),
            (k - 1) * np.log(np.where(th > 0, th, 1.0)),
        )
    if k == 1:
        new_tables = np.zeros_like(al)

    # [theta + 1]_{n-1; 1}
    customers = gammaln(th + n) - gammaln(th + 1)

    # sum_j r_j [1 - alpha]_{a_j - 1; 1}
    a = np.asarray(p.a, dtype=np.float64)
    r = np.asarray(p.r, dtype=np.float64)
    al_x = al[..., np.newaxis]
    seats = (r * (gammaln(a - al_x) - gammaln(1 - al_x))).sum(axis=-1)

    return np.asarray(new_tables - customers + seats, dtype=np.float64)


def log_eppf(p: SetPartition | IntegerPartition, h: HyperParams) -> float:
    """Log probability of the partition under the Pitman sampling formula.

    Only block sizes matter. At alpha == 0 this is the Ewens sampling formula.
    """
    ip = to_integer_partition(p)
    total = -log_rising_factorial(h.theta + 1, ip.n - 1, 1.0)
    total += log_rising_factorial(h.theta + h.alpha, ip.k - 1, h.alpha)
    for a, r in zip(ip.a, ip.r):
        total += r * log_rising_factorial(1 - h.alpha, a - 1, 1.0)
    return total


def crp_seat_probabilities(
    table_sizes: Sequence[int],
    h: HyperParams,
) -> npt.NDArray[np.float64]:
    """Where the next customer sits: one entry per table, then a new table."""
    n = sum(table_sizes)
    k = len(table_sizes)
    w = np.array([*(s - h.alpha for s in table_sizes), h.theta + k * h.alpha])
    return np.asarray(w / (n + h.theta), dtype=np.float64)


class ChineseRestaurant:
    """A two-parameter Chinese restaurant seating customers one at a time.

    Choosing an occupied table with weight (n_j - alpha) is split into
    choosing a uniformly random earlier "joining" customer's table (weight
    n_j - 1) or a uniformly random table (weight 1 - alpha), so every seat
    costs O(1).
    """

    def __init__(self, h: HyperParams, rng: np.random.Generator):
        """An empty restaurant."""
        h.require_discount()
        self._h = h
        self._rng = rng
        self.customers = 0
        self.sizes: list[int] = []
        self._joined: list[int] = []
        self.singletons = 0

    @property
    def tables(self) -> int:
        """K_n, the number of occupied tables."""
        return len(self.sizes)

    def seat(self, u: float | None = None) -> int:
        """Seats the next customer and returns their 0-based table."""
        if u is None:
            u = float(self._rng.random())
        alpha, theta = self._h.alpha, self._h.theta
        k = len(self.sizes)
        x = u * (self.customers + theta)
        new_weight = theta + k * alpha

        if self.customers == 0 or x < new_weight:
            table = k
            self.sizes.append(1)
            self.singletons += 1
        else:
            x -= new_weight
            joined = len(self._joined)
            if x < joined:
                table = self._joined[int(x)]
            else:
                table = min(int((x - joined) / (1.0 - alpha)), k - 1)
            if self.sizes[table] == 1:
                self.singletons -= 1
            self.sizes[table] += 1
            self._joined.append(table)

        self.customers += 1
        return table


def crp_labels(n: int, h: HyperParams, seed: int) -> list[int]:
    """Table labels of n customers, tables numbered in order of opening."""
    if n < 1:
        msg = f"Need at least one customer, got {n}."
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    restaurant = ChineseRestaurant(h, rng)
    return [restaurant.seat(u) for u in rng.random(n).tolist()]


def crp_sample(n: int, h: HyperParams, seed: int) -> SetPartition:
    """A partition of [n] drawn by the Chinese restaurant process."""
    labels = crp_labels(n, h, seed)
    blocks: list[list[int]] = []
    for i, t in enumerate(labels, start=1):
        if t == len(blocks):
            blocks.append([])
        blocks[t].append(i)
    return SetPartition(n, tuple(tuple(b) for b in blocks))


def crp_sample_batch(
    n: int,
    h: HyperParams,
    replicates: int,
    seed: int,
) -> npt.NDArray[np.int64]:
    """Many independent small restaurants seated in lockstep.

    Returns:
        A (replicates, n) array of 0-based table labels in opening order, so
        each row is the restricted growth string of its partition.
    """
    h.require_discount()
    rng = np.random.default_rng(seed)
    labels = np.zeros((replicates, n), dtype=np.int64)
    sizes = np.zeros((replicates, n), dtype=np.float64)
    sizes[:, 0] = 1
    k = np.ones(replicates, dtype=np.int64)
    rows = np.arange(replicates)
    tables = np.arange(n)

    for i in range(1, n):
        occupied = tables[np.newaxis, :] < k[:, np.newaxis]
        w = np.where(occupied, sizes - h.alpha, 0.0)
        new_col = h.theta + k * h.alpha
        w[rows, k] = new_col
        cum = np.cumsum(w, axis=1)
        u = rng.random(replicates) * (i + h.theta)
        choice = (cum <= u[:, np.newaxis]).sum(axis=1)
        choice = np.minimum(choice, k)
        labels[:, i] = choice
        sizes[rows, choice] += 1
        k += choice == k

    return labels


def stick_breaking_sample(
    h: HyperParams,
    truncation: int = DEFAULT_TRUNCATION,
    seed: int = 0,
) -> WeightVector:
    """The first M GEM(alpha, theta) weights with V_i ~ Beta(1-alpha, theta+i*alpha)."""
    if truncation < 1:
        msg = f"Truncation must be positive, got {truncation}."
        raise ValueError(msg)
    h.require_discount()

    rng = np.random.default_rng(seed)
    i = np.arange(1, truncation + 1)
    v = rng.beta(1 - h.alpha, h.theta + i * h.alpha)
    log_rest = np.cumsum(np.log1p(-v))
    log_w = np.log(v) + np.concatenate(([0.0], log_rest[:-1]))
    weights = np.exp(log_w)
    residual = max(1.0 - math.fsum(weights.tolist()), 0.0)
    return WeightVector(weights, residual)


def tail_power_law_fit(w: WeightVector | Sequence[float], fit_range: tuple[int, int]) -> float:
    """Least squares slope of log(weight) against log(rank).

    Weights are ranked in decreasing order first; ranks are 1-based and the
    range is inclusive. PD(alpha, theta) tails have slope close to -1/alpha.

    Raises:
        ValueError: If the range holds fewer than two ranks or exceeds the truncation.
    """
    ranked = (
        w.ranked()
        if isinstance(w, WeightVector)
        else np.sort(np.asarray(w, dtype=np.float64))[::-1]
    )
    lo, hi = fit_range
    if lo < 1 or hi <= lo or hi > len(ranked):
        msg = f"Cannot fit ranks {lo}..{hi} of {len(ranked)} weights."
        raise ValueError(msg)

    y = ranked[lo - 1 : hi]
    if np.any(y <= 0):
        msg = "Power law fits need positive weights."
        raise ValueError(msg)
    x = np.arange(lo, hi + 1)
    return float(stats.linregress(np.log(x), np.log(y)).slope)


def power_law_reference(
    ranks: npt.ArrayLike,
    alpha: float,
    k: int,
    n: int,
) -> npt.NDArray[np.float64]:
    """Z * i^(-1/alpha) with Z^(-alpha) = Gamma(1-alpha)/S and S = K_n / n^alpha."""
    s = k / n**alpha
    log_z = -(gammaln(1 - alpha) - math.log(s)) / alpha
    i = np.asarray(ranks, dtype=np.float64)
    return np.asarray(np.exp(log_z - np.log(i) / alpha), dtype=np.float64)


def log_k_alpha_estimate(p: SetPartition | IntegerPartition) -> float:
    """log K_n / log n, a consistent estimator of the discount."""
    ip = to_integer_partition(p)
    if ip.n < 2:  # noqa: PLR2004
        msg = "Need at least two observations."
        raise ValueError(msg)
    return math.log(ip.k) / math.log(ip.n)


class GrowthPoint(NamedTuple):
    """One checkpoint of a growing restaurant."""

    n: int
    k: int
    k_scaled: float
    m1_over_k: float


def _checkpoints(n: int, count: int) -> list[int]:
    grid = np.unique(np.geomspace(1, n, num=count).round().astype(np.int64))
    return sorted({*grid.tolist(), n})


def iter_block_growth(
    h: HyperParams,
    n: int,
    seed: int,
    checkpoints: int = 200,
) -> Iterator[GrowthPoint]:
    """Streams (n, K_n, K_n/n^alpha, m_1(n)/K_n) along one restaurant run.

    Checkpoints are log-spaced so the trajectory stays small for 10^7 customers.
    """
    if n < 1:
        msg = f"Need at least one customer, got {n}."
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    restaurant = ChineseRestaurant(h, rng)
    marks = iter(_checkpoints(n, checkpoints))
    mark = next(marks)

    for u in rng.random(n).tolist():
        restaurant.seat(u)
        if restaurant.customers == mark:
            c, k = restaurant.customers, restaurant.tables
            yield GrowthPoint(c, k, k / c**h.alpha, restaurant.singletons / k)
            mark = next(marks, -1)


def block_growth_diagnostics(
    h: HyperParams,
    n: int,
    seed: int,
    checkpoints: int = 200,
) -> list[GrowthPoint]:
    """The trajectory of iter_block_growth; m_1/K_n tends to alpha."""
    trajectory = list(iter_block_growth(h, n, seed, checkpoints))
    last = trajectory[-1]
    logger.debug(
        "CRP(%s, %s) with %d customers: K_n=%d, m1/K_n=%.4f",
        h.alpha,
        h.theta,
        last.n,
        last.k,
        last.m1_over_k,
    )
    return trajectory

