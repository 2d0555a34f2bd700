"""Random partition reductions of forensic reference databases.

A database of profiles is reduced to the partition of individual indexes
induced by profile equality. Adding the suspect (a new singleton) and then the
matching crime-scene trace (joining the suspect's block) gives the three
partitions the likelihood ratio is built on.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Hashable, Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)

DEFAULT_LOCI = (
    "DYS19",
    "DYS389I",
    "DYS389II",
    "DYS390",
    "DYS391",
    "DYS392",
    "DYS393",
)
DEFAULT_SEPARATOR = "|"


class NotRareTypeError(ValueError):
    """The partition does not end with the suspect's singleton block."""


class DatabaseParseError(ValueError):
    """A reference database could not be read as a profile table."""

    def __init__(self, path: str | Path, line: int, reason: str):
        """Records where the database stopped making sense."""
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


@dataclass(frozen=True)
class SetPartition:
    """A partition of {1..n} into blocks ordered by their least element."""

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        """Checks that the blocks partition {1..n} in canonical order.

        Raises:
            ValueError: If the blocks overlap, miss an index or are unordered.
        """
        if self.n < 1:
            msg = f"A partition needs a positive ground set size, got {self.n}."
            raise ValueError(msg)

        seen = 0
        last_least = 0
        for b in self.blocks:
            if len(b) == 0:
                msg = "Partition blocks must be nonempty."
                raise ValueError(msg)
            if any(x >= y for x, y in zip(b, b[1:])):
                msg = f"Block {b} is not strictly increasing."
                raise ValueError(msg)
            if b[0] <= last_least:
                msg = "Blocks must be ordered by their least element."
                raise ValueError(msg)
            last_least = b[0]
            seen += len(b)

        members = {i for b in self.blocks for i in b}
        if seen != self.n or members != set(range(1, self.n + 1)):
            msg = f"Blocks do not partition {{1..{self.n}}} exactly."
            raise ValueError(msg)

    @property
    def k(self) -> int:
        """The number of blocks."""
        return len(self.blocks)

    def sizes(self) -> list[int]:
        """Block sizes in canonical block order."""
        return [len(b) for b in self.blocks]

    def labels(self) -> list[int]:
        """The 0-based block index of every element 1..n."""
        out = [0] * self.n
        for j, b in enumerate(self.blocks):
            for i in b:
                out[i - 1] = j
        return out

    def to_json(self) -> dict[str, Any]:
        """A JSON compatible form {"n": n, "blocks": [[...], ...]}."""
        return {"n": self.n, "blocks": [list(b) for b in self.blocks]}

    @staticmethod
    def from_json(obj: dict[str, Any]) -> SetPartition:
        """Inverse of to_json."""
        return SetPartition(
            int(obj["n"]),
            tuple(tuple(int(i) for i in b) for b in obj["blocks"]),
        )


@dataclass(frozen=True)
class IntegerPartition:
    """The multiset of block sizes of a partition in compact (a, r) form.

    a holds the distinct block sizes in increasing order and r how many
    blocks have each size, so n == sum(a_j * r_j).
    """

    n: int
    a: tuple[int, ...]
    r: tuple[int, ...]

    def __post_init__(self) -> None:
        """Checks the (a, r) bookkeeping.

        Raises:
            ValueError: If a is not strictly increasing or the sizes don't sum to n.
        """
        if len(self.a) != len(self.r):
            msg = "Sizes and multiplicities must have the same length."
            raise ValueError(msg)
        if any(x < 1 for x in self.a) or any(x >= y for x, y in zip(self.a, self.a[1:])):
            msg = f"Block sizes {self.a} must be positive and strictly increasing."
            raise ValueError(msg)
        if any(x < 1 for x in self.r):
            msg = f"Multiplicities {self.r} must be positive."
            raise ValueError(msg)
        if sum(x * y for x, y in zip(self.a, self.r)) != self.n:
            msg = f"Block sizes {self.a} with multiplicities {self.r} do not sum to {self.n}."
            raise ValueError(msg)

    @property
    def k(self) -> int:
        """The number of blocks."""
        return sum(self.r)

    @staticmethod
    def from_sizes(sizes: Sequence[int]) -> IntegerPartition:
        """Collapses a list of block sizes into (a, r) form."""
        counts = Counter(sizes)
        a = tuple(sorted(counts))
        return IntegerPartition(sum(sizes), a, tuple(counts[s] for s in a))

    def sizes(self) -> list[int]:
        """Block sizes in decreasing order."""
        return [s for s, m in zip(reversed(self.a), reversed(self.r)) for _ in range(m)]

    def multiplicity(self, j: int) -> int:
        """The number of blocks of size j."""
        try:
            return self.r[self.a.index(j)]
        except ValueError:
            return 0

    def to_json(self) -> dict[str, Any]:
        """A JSON compatible form {"a": [...], "r": [...]}."""
        return {"a": list(self.a), "r": list(self.r)}

    @staticmethod
    def from_json(obj: dict[str, Any]) -> IntegerPartition:
        """Inverse of to_json, n is recomputed."""
        a = tuple(int(x) for x in obj["a"])
        r = tuple(int(x) for x in obj["r"])
        return IntegerPartition(sum(x * y for x, y in zip(a, r)), a, r)


@dataclass(frozen=True)
class ProfileRecord:
    """One individual of the reference database."""

    id: str
    """Concatenated locus values, only equality between keys carries meaning."""
    key: str


def partition_from_labels(labels: Sequence[Hashable]) -> SetPartition:
    """The partition of 1..n where i and j share a block iff their labels are equal.

    Raises:
        ValueError: If labels is empty.
    """
    if len(labels) == 0:
        msg = "empty sample"
        raise ValueError(msg)

    # dicts keep insertion order, which is the least-element order
    blocks: dict[Hashable, list[int]] = {}
    for i, lbl in enumerate(labels, start=1):
        blocks.setdefault(lbl, []).append(i)
    return SetPartition(len(labels), tuple(tuple(b) for b in blocks.values()))


def extend_with_suspect(p: SetPartition) -> SetPartition:
    """Adds the suspect n+1 as a new singleton block."""
    return SetPartition(p.n + 1, (*p.blocks, (p.n + 1,)))


def is_rare_type(p: SetPartition) -> bool:
    """Whether the last element sits alone in the last block."""
    return p.blocks[-1] == (p.n,)


def extend_with_trace(p: SetPartition) -> SetPartition:
    """Adds the crime-scene trace n+2 to the suspect's singleton block.

    Raises:
        NotRareTypeError: If n+1 is not a singleton block of p.
    """
    if not is_rare_type(p):
        msg = "not a rare-type configuration"
        raise NotRareTypeError(msg)
    return SetPartition(p.n + 1, (*p.blocks[:-1], (p.n, p.n + 1)))


def to_integer_partition(p: SetPartition | IntegerPartition) -> IntegerPartition:
    """The block-size multiset of p."""
    if isinstance(p, IntegerPartition):
        return p
    return IntegerPartition.from_sizes(p.sizes())


def size_multiplicity(p: SetPartition | IntegerPartition, j: int) -> int:
    """m_j, the number of blocks of size j."""
    if isinstance(p, IntegerPartition):
        return p.multiplicity(j)
    return sum(1 for b in p.blocks if len(b) == j)


def singleton_count(p: SetPartition | IntegerPartition) -> int:
    """N1, the number of blocks of size 1."""
    return size_multiplicity(p, 1)


def ranked_frequencies(p: SetPartition | IntegerPartition) -> list[float]:
    """Relative block sizes, largest first."""
    sizes = sorted(to_integer_partition(p).sizes(), reverse=True)
    n = sum(sizes)
    return [s / n for s in sizes]


def iter_set_partitions(n: int) -> Iterator[SetPartition]:
    """Every set partition of {1..n}, Bell(n) of them.

    Walks restricted growth strings: element i joins one of the blocks opened
    so far or opens the next one.
    """
    if n < 1:
        msg = f"Cannot enumerate partitions of {n} elements."
        raise ValueError(msg)

    rgs = [0] * n

    def walk(i: int, k: int) -> Iterator[SetPartition]:
        if i == n:
            blocks: list[list[int]] = [[] for _ in range(k)]
            for e, b in enumerate(rgs, start=1):
                blocks[b].append(e)
            yield SetPartition(n, tuple(tuple(b) for b in blocks))
            return
        for b in range(k + 1):
            rgs[i] = b
            yield from walk(i + 1, max(k, b + 1))

    yield from walk(1, 1)


def _decoded_lines(path: Path, f: Iterable[bytes]) -> Iterator[str]:
    for line, raw in enumerate(f, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DatabaseParseError(path, line, f"not valid UTF-8 ({e.reason})") from e


def ingest_database(
    path: str | Path,
    loci: Sequence[str] = DEFAULT_LOCI,
    *,
    separator: str = DEFAULT_SEPARATOR,
    id_column: str | None = None,
    row_filter: tuple[str, str] | None = None,
) -> tuple[list[ProfileRecord], SetPartition]:
    """Reads a tab separated profile table and reduces it to a partition.

    The first row names the columns, every other row is one individual.
    Individuals are numbered by order of appearance starting at 1.

    Args:
        path: The tab separated database.
        loci: The locus columns making up a profile.
        separator: Joins locus values into a profile key; must not occur in cells.
        id_column: Column holding the individual's id, row numbers otherwise.
        row_filter: Keep only rows whose (column, value) matches.

    Raises:
        DatabaseParseError: On an empty file, a missing column, a ragged row or
            bytes that are not UTF-8.
    """
    path = Path(path)
    with path.open("rb") as f:
        reader = csv.reader(_decoded_lines(path, f), delimiter="\t")
        header = next(reader, None)
        if not header:
            raise DatabaseParseError(path, 1, "empty file")
        header = [h.strip() for h in header]

        wanted = [*loci]
        if id_column is not None:
            wanted.append(id_column)
        if row_filter is not None:
            wanted.append(row_filter[0])
        for c in wanted:
            if c not in header:
                raise DatabaseParseError(path, 1, f"missing column {c!r}")

        cols = [header.index(c) for c in loci]
        id_col = header.index(id_column) if id_column is not None else None
        filter_col = header.index(row_filter[0]) if row_filter is not None else None

        records: list[ProfileRecord] = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                reason = f"expected {len(header)} fields, found {len(row)}"
                raise DatabaseParseError(path, line, reason)
            if (
                row_filter is not None
                and filter_col is not None
                and row[filter_col].strip() != row_filter[1]
            ):
                continue

            cells = [row[c].strip() for c in cols]
            if any(separator in c for c in cells):
                raise DatabaseParseError(path, line, f"cell contains {separator!r}")
            rid = row[id_col].strip() if id_col is not None else str(line - 1)
            records.append(ProfileRecord(rid, separator.join(cells)))

    if not records:
        raise DatabaseParseError(path, 2, "no profile rows")

    partition = partition_from_labels([r.key for r in records])
    logger.info(
        "Read %d profiles with %d distinct types from %s",
        partition.n,
        partition.k,
        path,
    )
    return (records, partition)
