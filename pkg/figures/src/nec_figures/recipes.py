"""Figure recipes: declarative inputs for the renderers.

A recipe names CSV inputs, the figure kind, and overlay parameters (for
example the fitted critical constants).  Loading fails loudly on missing
columns or empty files; the plotting layer never recomputes physics or
refits anything.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("hysteresis", "phase_diagram", "stability", "island_maps", "relaxation")


class FigureError(Exception):
    pass


class MissingColumn(FigureError):
    pass


class EmptyInput(FigureError):
    pass


@dataclass(frozen=True)
class FigureRecipe:
    kind: str
    inputs: tuple[str, ...]
    output: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise EmptyInput("recipe has no input files")


def load_columns(path: str | Path, required: tuple[str, ...]) -> dict[str, list]:
    """Read a CSV into named columns, converting numerics where possible."""
    path = Path(path)
    if not path.exists():
        raise EmptyInput(f"input {path} does not exist")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInput(f"input {path} is empty") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyInput(f"input {path} has a header but no data rows")
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
    cols: dict[str, list] = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            try:
                cols[name].append(float(cell))
            except ValueError:
                cols[name].append(cell)
    return cols
