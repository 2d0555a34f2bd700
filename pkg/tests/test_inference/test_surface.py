from __future__ import annotations

import csv
import math
from typing import TYPE_CHECKING

import numpy as np
import pytest
from pytest_cases import fixture, parametrize

from . import crp_database_plus_suspect

if TYPE_CHECKING:
    from pathlib import Path

    from rare_type_lr.inference import MleResult
    from rare_type_lr.partitions import SetPartition

POINTS = 21


@fixture(scope="module")
def fitted() -> tuple[SetPartition, MleResult]:
    from rare_type_lr.inference import mle_fit

    p_plus = crp_database_plus_suspect(20_000, 0.5, 20.0, 9)
    return (p_plus, mle_fit(p_plus))


@parametrize(param=["alpha_theta", "phi_theta"])
def test_maximum_at_mle_node(fitted: tuple[SetPartition, MleResult], param: str) -> None:
    from rare_type_lr.inference import Parametrization, mle_centered_grid
    from rare_type_lr.inference import loglik_surface as uut

    p_plus, m = fitted
    para = Parametrization(param)
    nodes = mle_centered_grid(m, p_plus.n - 1, para, points=POINTS)
    table = uut(p_plus, nodes, para, m)

    center = (POINTS // 2) * POINTS + POINTS // 2
    assert np.nanmax(table.rel_loglik) == 0.0
    assert table.rel_loglik[center] == pytest.approx(0.0, abs=1e-6)
    assert table.gaussian_rel_loglik[center] == pytest.approx(0.0, abs=1e-12)


@parametrize(param=["alpha_theta", "phi_theta"])
def test_gaussian_overlay_near_mle(
    fitted: tuple[SetPartition, MleResult],
    param: str,
) -> None:
    from rare_type_lr.inference import Parametrization, fisher_in, mle_centered_grid
    from rare_type_lr.inference import loglik_surface as uut

    p_plus, m = fitted
    para = Parametrization(param)
    n = p_plus.n - 1
    nodes = mle_centered_grid(m, n, para, points=POINTS)
    table = uut(p_plus, nodes, para, m)

    center, info = fisher_in(m, n, para)
    d = nodes - center
    dist = np.sqrt(np.einsum("ij,jk,ik->i", d, info, d))
    near = dist <= 1.0
    assert near.sum() > 1
    residual = np.abs(table.rel_loglik[near] - table.gaussian_rel_loglik[near])
    assert residual.max() < 0.1


def test_reparametrization_invariance(fitted: tuple[SetPartition, MleResult]) -> None:
    from rare_type_lr.inference import Parametrization, mle_centered_grid, phi
    from rare_type_lr.inference import loglik_surface as uut

    p_plus, m = fitted
    n = p_plus.n - 1
    nodes = mle_centered_grid(m, n, Parametrization.ALPHA_THETA, points=POINTS)
    mapped = np.column_stack([phi(nodes[:, 0], nodes[:, 1], n), nodes[:, 1]])

    by_alpha = uut(p_plus, nodes, Parametrization.ALPHA_THETA, m)
    by_phi = uut(p_plus, mapped, Parametrization.PHI_THETA, m)
    assert by_phi.rel_loglik.tolist() == pytest.approx(by_alpha.rel_loglik.tolist(), abs=1e-6)


def test_invalid_nodes() -> None:
    from rare_type_lr.inference import loglik_surface as uut
    from rare_type_lr.inference import mle_fit

    p_plus = crp_database_plus_suspect(200, 0.5, 5.0, 1)
    table = uut(p_plus, [[0.5, 5.0], [1.2, 5.0], [0.5, -0.7]], mle=mle_fit(p_plus))
    assert math.isfinite(table.rel_loglik[0])
    assert np.isnan(table.rel_loglik[1:]).all()
    assert np.isnan(table.gaussian_rel_loglik[1:]).all()


def test_contour_levels() -> None:
    from rare_type_lr.inference import contour_levels as uut

    levels = uut()
    assert levels[0.95] == pytest.approx(math.log(0.05))
    assert levels[0.99] == pytest.approx(math.log(0.01))
    # the 99% region contains the 95% region
    assert levels[0.99] < levels[0.95]


def test_write_csv(tmp_path: Path) -> None:
    from rare_type_lr.inference import loglik_surface, mle_fit, tensor_grid

    p_plus = crp_database_plus_suspect(200, 0.5, 5.0, 1)
    table = loglik_surface(p_plus, tensor_grid([0.3, 0.5], [1.0, 5.0, 9.0]), mle=mle_fit(p_plus))
    out = tmp_path / "surface.csv"
    table.write_csv(out)

    with out.open(encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["param1", "param2", "rel_loglik", "gaussian_rel_loglik"]
    assert [(float(r[0]), float(r[1])) for r in rows[1:]] == [
        (0.3, 1.0),
        (0.3, 5.0),
        (0.3, 9.0),
        (0.5, 1.0),
        (0.5, 5.0),
        (0.5, 9.0),
    ]
