from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from rare_type_lr.oracle import PopulationFreqs
    from rare_type_lr.partitions import IntegerPartition


def uniform(m: int) -> PopulationFreqs:
    from rare_type_lr.oracle import PopulationFreqs

    return PopulationFreqs.from_counts([1.0] * m)


def sizes(*blocks: int) -> IntegerPartition:
    from rare_type_lr.partitions import IntegerPartition

    return IntegerPartition.from_sizes(list(blocks))
