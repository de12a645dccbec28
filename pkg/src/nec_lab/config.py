"""Run configuration: flat INI sections, strict validation.

Unknown sections or keys are rejected, every problem is reported (not just
the first), and each run echoes its resolved configuration next to the
outputs so results stay reproducible.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .errors import SchemaError
from .operators import HamiltonianKind, HamiltonianSpec, build_rates

_MODEL_KINDS = tuple(k.value for k in HamiltonianKind)
_PRESCRIPTIONS = ("trace", "factorized")
_BOUNDARIES = ("periodic", "open")
_SEED_STATES = ("up", "down", "mixed")


@dataclass
class RunConfig:
    # model
    kind: str = "pxp_nec"
    omega: float = 0.1
    omega1: float | None = None
    omega2: float | None = None
    gamma_x: float = 0.0
    gamma: float = 1.0
    T: float = 0.1
    h: float = 0.0
    # cluster
    ell: int = 2
    prescription: str = "trace"
    # integrator
    rtol: float = 1e-8
    steady_tol: float = 1e-7
    t_max: float = 2000.0
    # steady
    seed_state: str = "mixed"
    dump_trajectory: bool = False
    # sweep
    dh: float = 0.1
    t_grid: tuple = ()
    # island
    island_L: int = 20
    ell_down: int = 10
    island_sizes: tuple = (4, 6, 8, 10)
    boundary: str = "periodic"
    island_t_max: float = 400.0
    stride: float = 0.5
    # stability
    k_points: int = 65
    ky: float | None = None
    include_backaction: bool = True
    # run
    threads: int | None = None
    out: str = "out"
    seed: int = 0

    def hamiltonian(self) -> HamiltonianSpec:
        return HamiltonianSpec(
            kind=HamiltonianKind(self.kind),
            omega=self.omega,
            omega1=self.omega1,
            omega2=self.omega2,
            gamma_x=self.gamma_x,
        )

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser["model"] = {
            "kind": self.kind,
            "omega": repr(self.omega),
            "omega1": "" if self.omega1 is None else repr(self.omega1),
            "omega2": "" if self.omega2 is None else repr(self.omega2),
            "gamma_x": repr(self.gamma_x),
            "gamma": repr(self.gamma),
            "T": repr(self.T),
            "h": repr(self.h),
        }
        parser["cluster"] = {"ell": str(self.ell), "prescription": self.prescription}
        parser["integrator"] = {
            "rtol": repr(self.rtol),
            "steady_tol": repr(self.steady_tol),
            "t_max": repr(self.t_max),
        }
        parser["steady"] = {
            "seed_state": self.seed_state,
            "dump_trajectory": str(self.dump_trajectory).lower(),
        }
        parser["sweep"] = {
            "dh": repr(self.dh),
            "t_grid": " ".join(repr(t) for t in self.t_grid),
        }
        parser["island"] = {
            "l": str(self.island_L),
            "ell_down": str(self.ell_down),
            "sizes": " ".join(str(s) for s in self.island_sizes),
            "boundary": self.boundary,
            "t_max": repr(self.island_t_max),
            "stride": repr(self.stride),
        }
        parser["stability"] = {
            "k_points": str(self.k_points),
            "ky": "" if self.ky is None else repr(self.ky),
            "include_backaction": str(self.include_backaction).lower(),
        }
        parser["run"] = {
            "threads": "" if self.threads is None else str(self.threads),
            "out": self.out,
            "seed": str(self.seed),
        }
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


_SCHEMA = {
    "model": {
        "kind": ("kind", "choice", _MODEL_KINDS),
        "omega": ("omega", "float", None),
        "omega1": ("omega1", "optfloat", None),
        "omega2": ("omega2", "optfloat", None),
        "gamma_x": ("gamma_x", "float", None),
        "gamma": ("gamma", "float", None),
        "t": ("T", "float", None),
        "h": ("h", "float", None),
    },
    "cluster": {
        "ell": ("ell", "int", None),
        "prescription": ("prescription", "choice", _PRESCRIPTIONS),
    },
    "integrator": {
        "rtol": ("rtol", "float", None),
        "steady_tol": ("steady_tol", "float", None),
        "t_max": ("t_max", "float", None),
    },
    "steady": {
        "seed_state": ("seed_state", "choice", _SEED_STATES),
        "dump_trajectory": ("dump_trajectory", "bool", None),
    },
    "sweep": {
        "dh": ("dh", "float", None),
        "t_grid": ("t_grid", "floats", None),
    },
    "island": {
        "l": ("island_L", "int", None),
        "ell_down": ("ell_down", "int", None),
        "sizes": ("island_sizes", "ints", None),
        "boundary": ("boundary", "choice", _BOUNDARIES),
        "t_max": ("island_t_max", "float", None),
        "stride": ("stride", "float", None),
    },
    "stability": {
        "k_points": ("k_points", "int", None),
        "ky": ("ky", "optfloat", None),
        "include_backaction": ("include_backaction", "bool", None),
    },
    "run": {
        "threads": ("threads", "optint", None),
        "out": ("out", "str", None),
        "seed": ("seed", "int", None),
    },
}


def _convert(raw: str, kind: str, choices, where: str, problems: list):
    raw = raw.strip()
    try:
        if kind == "choice":
            if raw not in choices:
                raise ValueError(f"must be one of {', '.join(choices)}")
            return raw
        if kind == "float":
            return float(raw)
        if kind == "optfloat":
            return None if raw == "" else float(raw)
        if kind == "int":
            return int(raw)
        if kind == "optint":
            return None if raw == "" else int(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError("must be a boolean")
        if kind == "floats":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if kind == "ints":
            return tuple(int(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        return None


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises SchemaError listing every problem."""
    parser = configparser.ConfigParser()
    problems: list[str] = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise SchemaError([f"parse error: {exc}"]) from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"[{section}]: unknown section")
            continue
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                problems.append(f"[{section}] {key}: unknown key")
                continue
            attr, kind, choices = _SCHEMA[section][key]
            converted = _convert(raw, kind, choices, f"[{section}] {key}", problems)
            if converted is not None or kind.startswith("opt"):
                values[attr] = converted

    cfg = RunConfig(**{k: v for k, v in values.items() if k in {f.name for f in fields(RunConfig)}})
    _validate(cfg, problems)
    if problems:
        raise SchemaError(problems)
    return cfg


def _validate(cfg: RunConfig, problems: list):
    if cfg.gamma <= 0:
        problems.append("[model] gamma: must be positive")
    else:
        try:
            build_rates(cfg.gamma, cfg.T, cfg.h)
        except Exception as exc:
            problems.append(f"[model] T/h: {exc}")
    if cfg.ell < 1 or cfg.ell > 3:
        problems.append("[cluster] ell: supported cluster sizes are 1..3")
    if cfg.rtol <= 0 or cfg.steady_tol <= 0:
        problems.append("[integrator] tolerances must be positive")
    if cfg.t_max <= 0 or cfg.island_t_max <= 0:
        problems.append("[integrator] t_max: must be positive")
    if cfg.dh <= 0 or abs(round(2.0 / cfg.dh) * cfg.dh - 2.0) > 1e-9:
        problems.append("[sweep] dh: must divide the bias range [-1, 1] evenly")
    if any(t < 0 for t in cfg.t_grid):
        problems.append("[sweep] t_grid: noise amplitudes must be nonnegative")
    if cfg.k_points < 3:
        problems.append("[stability] k_points: need at least 3")
    if cfg.threads is not None and cfg.threads < 1:
        problems.append("[run] threads: must be at least 1")


def validate_for_task(cfg: RunConfig, task: str):
    """Task-specific caps and commensurability, applied at dispatch time."""
    problems = []
    if task == "stability" and cfg.ell > 2:
        problems.append(
            "[cluster] ell: stability analysis is capped at ell=2 "
            f"(dense dimension 4**(ell*ell) = {4 ** (cfg.ell * cfg.ell)})"
        )
    if task == "phase-diagram" and not cfg.t_grid:
        problems.append("[sweep] t_grid: required for the phase-diagram task")
    if task == "island":
        if cfg.island_L % cfg.ell:
            problems.append("[island] l: lattice size must be divisible by ell")
        if cfg.ell_down % cfg.ell or not 0 <= cfg.ell_down <= cfg.island_L:
            problems.append("[island] ell_down: island must be cluster-commensurate")
    if problems:
        raise SchemaError(problems)
