"""Render every figure kind from the acceptance-run artifacts when present.

The simulation acceptance suite leaves CSVs under out/acceptance/; this
test regenerates all five figure kinds from them through the manifest
driver.  Skipped when the artifacts have not been produced yet, so the
figure package tests stand alone.
"""

from pathlib import Path

import pytest

from nec_figures.cli import main

ACCEPTANCE = Path(__file__).resolve().parents[2] / "out" / "acceptance"

RUNS = {
    "phase_diagram": ("hysteresis", "phase_diagram"),
    "stability": ("stability",),
    "island": ("island_maps", "relaxation"),
}


@pytest.mark.skipif(
    not (ACCEPTANCE / "phase_diagram" / "manifest.json").exists(),
    reason="acceptance artifacts not generated yet (run the simulation acceptance suite)",
)
def test_all_five_kinds_render_from_acceptance_runs(tmp_path):
    rendered = []
    for run, kinds in RUNS.items():
        run_dir = ACCEPTANCE / run
        if not (run_dir / "manifest.json").exists():
            pytest.fail(f"acceptance run directory {run_dir} missing")
        rc = main(["--manifest-dir", str(run_dir), "--out", str(tmp_path)])
        assert rc == 0
        for kind in kinds:
            path = tmp_path / f"{run}_{kind}.png"
            assert path.exists() and path.stat().st_size > 0, kind
            rendered.append(kind)
    assert sorted(rendered) == [
        "hysteresis",
        "island_maps",
        "phase_diagram",
        "relaxation",
        "stability",
    ]
