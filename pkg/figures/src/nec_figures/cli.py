"""Render figures from nec-lab run directories.

Consumes manifest directories produced by the simulation CLI: each
manifest's task decides which figure kinds apply, and fitted constants are
read from fit_*.json files when present (never refit here).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .recipes import FigureError, FigureRecipe
from .render import render


def recipes_for_run(run_dir: Path, out_dir: Path) -> list[FigureRecipe]:
    manifest = json.loads((run_dir / "manifest.json").read_text())
    task = manifest["task"]
    stem = run_dir.name
    recipes = []
    if task in ("sweep", "phase-diagram"):
        csv_name = "sweep.csv" if task == "sweep" else "phase_diagram.csv"
        recipes.append(
            FigureRecipe(
                kind="hysteresis",
                inputs=(str(run_dir / csv_name),),
                output=str(out_dir / f"{stem}_hysteresis.png"),
            )
        )
        if task == "phase-diagram":
            params = {}
            fit_file = run_dir / "fit_boundary.json"
            if fit_file.exists():
                fit = json.loads(fit_file.read_text())
                params = {"t_star": fit["t_star"], "r": fit["r"]}
            recipes.append(
                FigureRecipe(
                    kind="phase_diagram",
                    inputs=(str(run_dir / csv_name),),
                    output=str(out_dir / f"{stem}_phase_diagram.png"),
                    params=params,
                )
            )
    elif task == "stability":
        recipes.append(
            FigureRecipe(
                kind="stability",
                inputs=(str(run_dir / "stability.csv"),),
                output=str(out_dir / f"{stem}_stability.png"),
            )
        )
    elif task == "island":
        maps = sorted(str(p) for p in run_dir.glob("map_*.csv"))
        params = {"times": manifest.get("metadata", {}).get("map_times", [None] * len(maps))}
        if maps:
            recipes.append(
                FigureRecipe(
                    kind="island_maps",
                    inputs=tuple(maps),
                    output=str(out_dir / f"{stem}_island_maps.png"),
                    params=params,
                )
            )
        tau = run_dir / "tau.csv"
        if tau.exists():
            inputs = [str(tau)]
            samples = run_dir / "velocity_samples.csv"
            if samples.exists():
                inputs.append(str(samples))
            params = {}
            law_file = run_dir / "fit_linear_law.json"
            if law_file.exists():
                law = json.loads(law_file.read_text())
                params = {k: v for k, v in law.items() if isinstance(v, (int, float))}
            recipes.append(
                FigureRecipe(
                    kind="relaxation",
                    inputs=tuple(inputs),
                    output=str(out_dir / f"{stem}_relaxation.png"),
                    params=params,
                )
            )
    return recipes


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nec-figures")
    parser.add_argument(
        "--manifest-dir",
        action="append",
        default=[],
        help="run directory containing manifest.json (repeatable)",
    )
    parser.add_argument("--kind", choices=("hysteresis", "phase_diagram", "stability", "island_maps", "relaxation"))
    parser.add_argument("--input", action="append", default=[], help="explicit CSV input")
    parser.add_argument("--params", default="{}", help="JSON overlay parameters")
    parser.add_argument("--out", required=True, help="output directory (or file with --kind)")
    args = parser.parse_args(argv)

    try:
        rendered = []
        if args.kind:
            recipe = FigureRecipe(
                kind=args.kind,
                inputs=tuple(args.input),
                output=args.out,
                params=json.loads(args.params),
            )
            rendered.append(render(recipe))
        for run in args.manifest_dir:
            run_dir = Path(run)
            for recipe in recipes_for_run(run_dir, Path(args.out)):
                rendered.append(render(recipe))
        for path in rendered:
            print(path)
        if not rendered:
            print("nothing to render", file=sys.stderr)
            return 1
        return 0
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
