from __future__ import annotations

import math
from dataclasses import dataclass

import pytest
from pytest_cases import parametrize, parametrize_with_cases

from . import PARAMETER_GRID


@dataclass(frozen=True)
class RisingFactorialCase:
    x: float
    a: int
    b: float
    expected: float


class RisingFactorialCases:
    def case_integers(self) -> RisingFactorialCase:
        return RisingFactorialCase(2, 3, 1, math.log(24))

    def case_empty(self) -> RisingFactorialCase:
        return RisingFactorialCase(5, 0, 7, 0.0)

    def case_single(self) -> RisingFactorialCase:
        return RisingFactorialCase(1, 1, 0.5, 0.0)

    def case_constant(self) -> RisingFactorialCase:
        return RisingFactorialCase(3, 4, 0, 4 * math.log(3))

    def case_falling(self) -> RisingFactorialCase:
        return RisingFactorialCase(5, 3, -1, math.log(60))

    def case_fractional(self) -> RisingFactorialCase:
        return RisingFactorialCase(0.5, 3, 0.5, math.log(0.5 * 1.0 * 1.5))


@parametrize_with_cases("tc", cases=RisingFactorialCases)
def test_log_rising_factorial(tc: RisingFactorialCase) -> None:
    from rare_type_lr.pyp import log_rising_factorial as uut

    assert uut(tc.x, tc.a, tc.b) == pytest.approx(tc.expected, abs=1e-12)


@parametrize(bad=[(0.0, 1, 1.0), (1.0, 3, -1.0), (-2.0, 2, 3.0), (1.0, -1, 1.0)])
def test_log_rising_factorial_domain(bad: tuple[float, int, float]) -> None:
    from rare_type_lr.pyp import log_rising_factorial as uut

    with pytest.raises(ValueError):  # noqa: PT011
        uut(*bad)


class EppfCases:
    def case_pair(self) -> tuple[tuple[tuple[int, ...], ...], float]:
        return (((1, 2),), math.log(0.35))

    def case_two_singletons(self) -> tuple[tuple[tuple[int, ...], ...], float]:
        return (((1,), (2,)), math.log(0.65))

    def case_one(self) -> tuple[tuple[tuple[int, ...], ...], float]:
        return (((1,),), 0.0)


@parametrize_with_cases("tc", cases=EppfCases)
def test_log_eppf(tc: tuple[tuple[tuple[int, ...], ...], float]) -> None:
    from rare_type_lr.partitions import SetPartition
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import log_eppf as uut

    blocks, expected = tc
    p = SetPartition(sum(len(b) for b in blocks), blocks)
    assert uut(p, HyperParams(0.3, 1.0)) == pytest.approx(expected, abs=1e-12)


@parametrize(bad=[(1.0, 1.0), (-0.1, 1.0), (0.5, -0.5), (0.2, math.inf)])
def test_hyperparams_invalid(bad: tuple[float, float]) -> None:
    from rare_type_lr.pyp import HyperParams as uut

    with pytest.raises(ValueError):  # noqa: PT011
        uut(*bad)


def test_normalization() -> None:
    from rare_type_lr.partitions import iter_set_partitions, to_integer_partition
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import log_eppf as uut

    for n in range(1, 9):
        parts = [to_integer_partition(p) for p in iter_set_partitions(n)]
        for alpha, theta in PARAMETER_GRID:
            h = HyperParams(alpha, theta)
            total = math.fsum(math.exp(uut(p, h)) for p in parts)
            assert total == pytest.approx(1.0, abs=1e-9), (n, alpha, theta)


def _ewens(sizes: list[int], theta: float) -> float:
    n = sum(sizes)
    out = (len(sizes) - 1) * math.log(theta)
    out += sum(math.lgamma(s) for s in sizes)
    return out - sum(math.log(theta + i) for i in range(1, n))


@parametrize(theta=[0.5, 1.0, 3.7, 50.0])
def test_ewens_reduction(theta: float) -> None:
    from rare_type_lr.partitions import iter_set_partitions
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import log_eppf as uut

    h = HyperParams(0.0, theta)
    for n in range(1, 8):
        for p in iter_set_partitions(n):
            assert uut(p, h) == pytest.approx(_ewens(p.sizes(), theta), abs=1e-12)


def test_sequential_consistency() -> None:
    from rare_type_lr.partitions import SetPartition, iter_set_partitions
    from rare_type_lr.pyp import HyperParams, crp_seat_probabilities
    from rare_type_lr.pyp import log_eppf as uut

    for alpha, theta in ((0.5, 1.0), (0.2, -0.1), (0.8, 30.0)):
        h = HyperParams(alpha, theta)
        for n in range(1, 6):
            for p in iter_set_partitions(n):
                seat = crp_seat_probabilities(p.sizes(), h)
                for j in range(p.k + 1):
                    blocks = [list(b) for b in p.blocks]
                    if j == p.k:
                        blocks.append([n + 1])
                    else:
                        blocks[j].append(n + 1)
                    q = SetPartition(n + 1, tuple(tuple(b) for b in blocks))
                    assert math.exp(uut(q, h)) == pytest.approx(
                        math.exp(uut(p, h)) * seat[j],
                        rel=1e-10,
                    )


def test_exchangeability() -> None:
    from rare_type_lr.partitions import partition_from_labels, to_integer_partition
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import log_eppf as uut

    h = HyperParams(0.4, 2.5)
    p = partition_from_labels([1, 2, 1, 3, 3, 3, 4])
    q = partition_from_labels([3, 3, 3, 1, 2, 1, 4])
    assert uut(p, h) == pytest.approx(uut(q, h), abs=1e-12)
    assert uut(p, h) == uut(to_integer_partition(p), h)


@parametrize(alpha_theta=[*PARAMETER_GRID, (0.0, 2.0)])
def test_log_eppf_arrays(alpha_theta: tuple[float, float]) -> None:
    from rare_type_lr.partitions import partition_from_labels, to_integer_partition
    from rare_type_lr.pyp import HyperParams, log_eppf
    from rare_type_lr.pyp import log_eppf_arrays as uut

    ip = to_integer_partition(partition_from_labels([1, 2, 1, 3, 3, 3, 4, 5, 5, 6]))
    alpha, theta = alpha_theta
    actual = uut(ip, [alpha, alpha], [theta, theta])
    assert actual.shape == (2,)
    expected = log_eppf(ip, HyperParams(alpha, theta))
    assert actual.tolist() == pytest.approx([expected, expected], abs=1e-10)


def test_crp_seat_probabilities() -> None:
    from rare_type_lr.pyp import HyperParams
    from rare_type_lr.pyp import crp_seat_probabilities as uut

    actual = uut([2, 1], HyperParams(0.5, 1.0))
    assert actual.tolist() == pytest.approx([0.375, 0.125, 0.5], abs=1e-15)
