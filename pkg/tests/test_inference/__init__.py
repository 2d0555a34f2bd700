from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from rare_type_lr.partitions import SetPartition


def crp_database_plus_suspect(n: int, alpha: float, theta: float, seed: int) -> SetPartition:
    from rare_type_lr.partitions import extend_with_suspect
    from rare_type_lr.pyp import HyperParams, crp_sample

    return extend_with_suspect(crp_sample(n, HyperParams(alpha, theta), seed))
