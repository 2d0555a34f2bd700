from __future__ import annotations

import math

import numpy as np
import pytest
from pytest_cases import parametrize


def test_crp_sample_single_customer() -> None:
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import crp_sample as uut

    actual = uut(1, HyperParams(0.5, 1.0), 3)
    assert actual.blocks == ((1,),)


def test_crp_sample_determinism() -> None:
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import crp_sample as uut

    h = HyperParams(0.5, 20.0)
    first = uut(2000, h, 11)
    assert first == uut(2000, h, 11)
    assert first != uut(2000, h, 12)
    assert first.n == 2000


def test_crp_requires_discount() -> None:
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import crp_sample as uut

    with pytest.raises(ValueError, match="0 < alpha"):
        uut(10, HyperParams(0.0, 1.0), 0)


def test_restaurant_bookkeeping() -> None:
    from rare_type_lr.pyp import ChineseRestaurant as uut
    from rare_type_lr.pyp import HyperParams

    restaurant = uut(HyperParams(0.3, 5.0), np.random.default_rng(5))
    for _ in range(1000):
        restaurant.seat()
        assert sum(restaurant.sizes) == restaurant.customers
        assert restaurant.singletons == restaurant.sizes.count(1)
    assert restaurant.tables == len(restaurant.sizes)


def test_crp_sample_batch_shape() -> None:
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import crp_sample_batch as uut

    labels = uut(6, HyperParams(0.5, 1.0), 1000, 4)
    assert labels.shape == (1000, 6)
    assert (labels[:, 0] == 0).all()
    # restricted growth strings: a new table is always the next one
    running_max = np.maximum.accumulate(labels, axis=1)
    assert (labels[:, 1:] <= running_max[:, :-1] + 1).all()


def test_stick_breaking_sample() -> None:
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import stick_breaking_sample as uut

    w = uut(HyperParams(0.5, 1.0), 1000, 8)
    assert w.truncation == 1000
    assert (w.weights > 0).all()
    assert (np.cumsum(w.weights) < 1).all()
    assert math.fsum(w.weights.tolist()) + w.residual == pytest.approx(1.0, abs=1e-12)

    again = uut(HyperParams(0.5, 1.0), 1000, 8)
    assert (again.weights == w.weights).all()


def test_weight_vector_invalid() -> None:
    from rare_type_lr.pyp import WeightVector as uut

    with pytest.raises(ValueError):  # noqa: PT011
        uut(np.array([0.5, 0.3]), 0.1)
    with pytest.raises(ValueError):  # noqa: PT011
        uut(np.array([0.5, -0.1]), 0.6)


def test_tail_power_law_fit_exact() -> None:
    from rare_type_lr.pyp import tail_power_law_fit as uut

    ranks = np.arange(1, 2001)
    assert uut(3.0 * ranks**-2.0, (10, 2000)) == pytest.approx(-2.0, abs=1e-9)
    assert uut(np.full(100, 0.01), (1, 100)) == pytest.approx(0.0, abs=1e-12)


@parametrize(fit_range=[(5, 5), (0, 10), (10, 101)])
def test_tail_power_law_fit_degenerate(fit_range: tuple[int, int]) -> None:
    from rare_type_lr.pyp import tail_power_law_fit as uut

    with pytest.raises(ValueError, match="Cannot fit"):
        uut(np.full(100, 0.01), fit_range)


def test_power_law_reference() -> None:
    from rare_type_lr.pyp import power_law_reference as uut

    alpha, k, n = 0.5, 4000, 10**6
    s = k / n**alpha
    z = math.exp(-(math.lgamma(1 - alpha) - math.log(s)) / alpha)
    actual = uut([1, 10, 100], alpha, k, n)
    assert actual.tolist() == pytest.approx([z, z / 100, z / 10**4], rel=1e-12)


def test_log_k_alpha_estimate() -> None:
    from rare_type_lr.partitions import IntegerPartition
    from rare_type_lr.pyp import log_k_alpha_estimate as uut

    ip = IntegerPartition(10_000, (1, 9901), (99, 1))
    assert uut(ip) == pytest.approx(0.5, abs=1e-12)


def test_block_growth_diagnostics() -> None:
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import block_growth_diagnostics as uut

    trajectory = uut(HyperParams(0.5, 20.0), 20_000, 2, checkpoints=50)
    ns = [g.n for g in trajectory]
    ks = [g.k for g in trajectory]
    assert ns[0] == 1
    assert ns[-1] == 20_000
    assert ns == sorted(set(ns))
    assert all(a <= b for a, b in zip(ks, ks[1:]))
    assert all(0 < g.m1_over_k <= 1 for g in trajectory)
    assert trajectory[-1].k_scaled == pytest.approx(ks[-1] / 20_000**0.5)


class TestMonteCarlo:
    def test_crp_matches_eppf(self) -> None:
        from rare_type_lr.partitions import iter_set_partitions
        from rare_type_lr.pyp import HyperParams, crp_sample_batch, log_eppf

        h = HyperParams(0.5, 1.0)
        reps = 1_000_000
        labels = crp_sample_batch(5, h, reps, 2024)
        rows, counts = np.unique(labels, axis=0, return_counts=True)
        observed = {tuple(r): c for r, c in zip(rows.tolist(), counts.tolist())}

        for p in iter_set_partitions(5):
            expected = math.exp(log_eppf(p, h))
            freq = observed.get(tuple(p.labels()), 0) / reps
            se = math.sqrt(expected * (1 - expected) / reps)
            assert abs(freq - expected) < 4 * se, p.blocks

    def test_sequential_restaurant_matches_eppf(self) -> None:
        from collections import Counter

        from rare_type_lr.partitions import iter_set_partitions
        from rare_type_lr.pyp import ChineseRestaurant, HyperParams, log_eppf

        h = HyperParams(0.5, 1.0)
        rng = np.random.default_rng(99)
        reps = 200_000
        seen: Counter[tuple[int, ...]] = Counter()
        for _ in range(reps):
            restaurant = ChineseRestaurant(h, rng)
            seen[tuple(restaurant.seat() for _ in range(3))] += 1

        for p in iter_set_partitions(3):
            expected = math.exp(log_eppf(p, h))
            se = math.sqrt(expected * (1 - expected) / reps)
            assert abs(seen[tuple(p.labels())] / reps - expected) < 4 * se

    def test_first_stick_mean(self) -> None:
        from rare_type_lr.pyp import HyperParams, split_seeds, stick_breaking_sample

        alpha, theta = 0.5, 3.0
        h = HyperParams(alpha, theta)
        reps = 100_000
        v1 = np.array([stick_breaking_sample(h, 1, s).weights[0] for s in split_seeds(1, reps)])
        a, b = 1 - alpha, theta + alpha
        var = a * b / ((a + b) ** 2 * (a + b + 1))
        assert abs(v1.mean() - a / (a + b)) < 4 * math.sqrt(var / reps)

    def test_power_law_tail(self) -> None:
        from rare_type_lr.pyp import (
            HyperParams,
            split_seeds,
            stick_breaking_sample,
            tail_power_law_fit,
        )

        h = HyperParams(0.5, 1.0)
        slopes = [
            tail_power_law_fit(stick_breaking_sample(h, 100_000, s), (1_000, 10_000))
            for s in split_seeds(8, 5)
        ]
        assert sum(abs(s + 2) < 0.15 for s in slopes) >= 4, slopes

    def test_singleton_fraction_limit(self) -> None:
        from rare_type_lr.pyp import HyperParams, block_growth_diagnostics

        last = block_growth_diagnostics(HyperParams(0.5, 20.0), 1_000_000, 17)[-1]
        assert last.n == 1_000_000
        assert abs(last.m1_over_k - 0.5) < 0.03
