from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from pytest_cases import parametrize

if TYPE_CHECKING:
    from pathlib import Path


@parametrize(
    bad=[[0.5, 0.6], [0.3, 0.7], [1.0, 0.0], []],
)
def test_population_freqs_invalid(bad: list[float]) -> None:
    from rare_type_lr.oracle import PopulationFreqs as uut

    with pytest.raises(ValueError, match="Frequencies"):
        uut(np.asarray(bad, dtype=np.float64))


def test_from_counts() -> None:
    from rare_type_lr.oracle import PopulationFreqs as uut

    actual = uut.from_counts([1, 3, 2, 4])
    assert actual.m == 4
    assert actual.p.tolist() == pytest.approx([0.4, 0.3, 0.2, 0.1])

    with pytest.raises(ValueError, match="positive"):
        uut.from_counts([1, 0])


def test_from_labels() -> None:
    from rare_type_lr.oracle import PopulationFreqs as uut

    actual = uut.from_labels(["b", "a", "b", "c", "b", "a"])
    assert actual.p.tolist() == pytest.approx([3 / 6, 2 / 6, 1 / 6])


def test_load(tmp_path: Path) -> None:
    from rare_type_lr.oracle import PopulationFreqs as uut

    f = tmp_path / "freqs.txt"
    f.write_text("# counts per type\n10\n\n30  # common\n60\n", encoding="utf-8")
    assert uut.load(f).p.tolist() == pytest.approx([0.6, 0.3, 0.1])

    f.write_text("0.5\nhalf\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":2: 'half' is not a number"):
        uut.load(f)

    f.write_text("# nothing\n", encoding="utf-8")
    with pytest.raises(ValueError, match="no frequencies"):
        uut.load(f)
