from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import pytest
from pytest_cases import parametrize_with_cases

if TYPE_CHECKING:
    from pathlib import Path

LOCI = ("DYS19", "DYS390")


@dataclass(frozen=True)
class BadDatabaseCase:
    text: str
    line: int
    reason: str


class BadDatabaseCases:
    def case_empty(self) -> BadDatabaseCase:
        return BadDatabaseCase("", 1, "empty file")

    def case_missing_column(self) -> BadDatabaseCase:
        return BadDatabaseCase("id\tDYS19\n1\t14\n", 1, "missing column 'DYS390'")

    def case_ragged(self) -> BadDatabaseCase:
        return BadDatabaseCase(
            "id\tDYS19\tDYS390\na\t14\t24\nb\t15\n",
            3,
            "expected 3 fields, found 2",
        )

    def case_separator(self) -> BadDatabaseCase:
        return BadDatabaseCase("id\tDYS19\tDYS390\na\t14|15\t24\n", 2, "cell contains '|'")

    def case_header_only(self) -> BadDatabaseCase:
        return BadDatabaseCase("id\tDYS19\tDYS390\n", 2, "no profile rows")


@parametrize_with_cases("tc", cases=BadDatabaseCases)
def test_bad_database(tmp_path: Path, tc: BadDatabaseCase) -> None:
    from rare_type_lr.partitions import DatabaseParseError
    from rare_type_lr.partitions import ingest_database as uut

    db = tmp_path / "db.tsv"
    db.write_text(tc.text, encoding="utf-8")
    with pytest.raises(DatabaseParseError) as e:
        uut(db, LOCI)

    assert e.value.line == tc.line
    assert e.value.reason == tc.reason
    assert str(db) in str(e.value)


def test_database_not_utf8(tmp_path: Path) -> None:
    from rare_type_lr.partitions import DatabaseParseError
    from rare_type_lr.partitions import ingest_database as uut

    db = tmp_path / "db.tsv"
    db.write_bytes(b"id\tDYS19\tDYS390\na\t14\t24\nb\t\xff15\t23\n")
    with pytest.raises(DatabaseParseError, match="not valid UTF-8") as e:
        uut(db, LOCI)

    assert e.value.line == 3
    assert str(db) in str(e.value)


def test_ingest(tmp_path: Path) -> None:
    from rare_type_lr.partitions import ingest_database as uut

    db = tmp_path / "db.tsv"
    db.write_text(
        "id\tDYS19\tDYS390\tLocation\n"
        "x1\t14\t24\tNL\n"
        "x2\t15\t23\tDE\n"
        "\n"
        "x3\t14\t24\tNL\n",
        encoding="utf-8",
    )

    records, p = uut(db, LOCI)
    assert [r.id for r in records] == ["1", "2", "4"]
    assert records[0].key == records[2].key == "14|24"
    assert p.blocks == ((1, 3), (2,))

    records, p = uut(db, LOCI, id_column="id", row_filter=("Location", "NL"))
    assert [r.id for r in records] == ["x1", "x3"]
    assert p.blocks == ((1, 2),)

    records, p = uut(db, ("DYS19",), separator="/")
    assert records[1].key == "15"
    assert p.k == 2
