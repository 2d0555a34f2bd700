from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from pathlib import Path

    from rare_type_lr.experiments import ExperimentSpec

# small enough for the quick suite
SMALL: dict[str, Any] = {
    "alpha": 0.5,
    "theta": 20.0,
    "n_population": 400,
    "n_sample": 40,
    "n_replicates": 4,
    "mh_iterations": 2_000,
    "prior": "point:0.5,20",
}


def small_spec(name: str, out: Path, **kw: Any) -> ExperimentSpec:
    from rare_type_lr.experiments import ExperimentSpec

    return ExperimentSpec.from_json({**SMALL, "name": name, "output_dir": str(out), **kw})


def write_counts(path: Path, counts: list[int]) -> Path:
    path.write_text("".join(f"{c}\n" for c in counts), encoding="utf-8")
    return path
