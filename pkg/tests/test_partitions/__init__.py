from __future__ import annotations

from dataclasses import dataclass

# (3, 1, 3, 1, 2, 2, 6, 9, 4, 1) reduced by equality
WORKED_LABELS = (3, 1, 3, 1, 2, 2, 6, 9, 4, 1)
WORKED_BLOCKS = ((1, 3), (2, 4, 10), (5, 6), (7,), (8,), (9,))


@dataclass(frozen=True)
class BlocksCase:
    n: int
    blocks: tuple[tuple[int, ...], ...]
