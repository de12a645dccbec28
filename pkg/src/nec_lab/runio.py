"""Deterministic CSV output and run manifests.

Identical configs must reproduce byte-identical CSVs: floats are printed
with a fixed shortest-roundtrip format, row order is fixed by the drivers,
and every output file is referenced by exactly one manifest carrying the
config hash.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__
from ._core import backend_name


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        return [], []
    lines = text.splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


class RunManifest:
    """Provenance for one CLI run: config hash, outputs, flags, timing."""

    def __init__(self, task: str, resolved_config: str, out_dir: Path):
        self.task = task
        self.out_dir = Path(out_dir)
        self.config_text = resolved_config
        self.config_sha256 = hashlib.sha256(resolved_config.encode()).hexdigest()
        self.outputs: list[str] = []
        self.flags: dict = {}
        self.metadata: dict = {}
        self._t0 = time.monotonic()

    def add_output(self, path: Path):
        self.outputs.append(str(Path(path).relative_to(self.out_dir)))

    def write(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        echo = self.out_dir / "resolved_config.ini"
        echo.write_text(self.config_text, encoding="utf-8")
        payload = {
            "task": self.task,
            "version": __version__,
            "backend": backend_name,
            "config_sha256": self.config_sha256,
            "wall_seconds": round(time.monotonic() - self._t0, 3),
            "outputs": sorted(self.outputs),
            "flags": self.flags,
            "metadata": self.metadata,
        }
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
