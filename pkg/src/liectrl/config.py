"""JSON system definitions.

Indices are 1-based in files. All numeric defaults live in ``DEFAULTS``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .algebra import AlgebraError, LieAlgebra, validate_algebra
from .simulation.grid import GridConfig
from .system import ControlRange, GroupFlags, LinearSystemSpec, SpecError

DEFAULTS = {
    "dwell": 0.1,  # control dwell for grid expansion
    "grid_dt": 1e-2,  # integration step inside a dwell
    "trajectory_dt": 1e-3,  # step for cmd simulate
    "cells_per_axis": 151,
    "horizon": 8.0,
    "refine": 1,  # representatives per output cell, per axis
    "safety": 1e6,  # divergence threshold for trajectories
    "saturation": 0.99,  # fraction of the box counted as "fills the box"
    "dual_horizon": 1.0,
    "semigroup": [1.0, 1.0],
}


class ConfigError(ValueError):
    pass


def algebra_from_json(obj: dict) -> LieAlgebra:
    try:
        dim = int(obj["dim"])
        brackets = {}
        for entry in obj.get("brackets", []):
            i, j = int(entry["i"]) - 1, int(entry["j"]) - 1
            if i == j:
                raise ConfigError(f"bracket entry with i == j == {i + 1}")
            res = entry["result"]
            if i > j:
                i, j, res = j, i, [-v for v in res]
            if (i, j) in brackets:
                raise ConfigError(f"duplicate bracket entry for ({i + 1}, {j + 1})")
            brackets[(i, j)] = res
        return LieAlgebra.from_brackets(dim, brackets, obj.get("labels"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed algebra: {exc}") from exc
    except AlgebraError as exc:
        raise ConfigError(str(exc)) from exc


def algebra_to_json(a: LieAlgebra) -> dict:
    out = []
    for i in range(a.dim):
        for j in range(i + 1, a.dim):
            r = a.structure[:, i, j]
            if np.any(r != 0):
                out.append({"i": i + 1, "j": j + 1, "result": r.tolist()})
    obj = {"dim": a.dim, "brackets": out}
    if a.basis_labels:
        obj["labels"] = list(a.basis_labels)
    return obj


def omega_from_json(obj: Any) -> ControlRange:
    if isinstance(obj, dict) and "box" in obj:
        return ControlRange.box(obj["box"])
    if isinstance(obj, dict) and "vertices" in obj:
        return ControlRange.polytope(obj["vertices"])
    raise ConfigError("omega must be {'box': radii} or {'vertices': [...]}")


def flags_from_json(obj: Optional[dict]) -> GroupFlags:
    obj = dict(obj or {})
    known = {"simply_connected", "finite_semisimple_center", "G0_compact", "a_open_assumed"}
    extra = set(obj) - known - {"nilpotent", "solvable"}
    if extra:
        raise ConfigError(f"unknown flags: {sorted(extra)}")
    g0 = obj.get("G0_compact", "auto")
    if g0 != "auto" and not isinstance(g0, bool):
        raise ConfigError("G0_compact must be true, false or 'auto'")
    return GroupFlags(
        simply_connected=bool(obj.get("simply_connected", True)),
        finite_semisimple_center=obj.get("finite_semisimple_center"),
        G0_compact=g0,
        a_open_assumed=obj.get("a_open_assumed"),
    )


@dataclass
class SimulationParams:
    grid: GridConfig
    horizon: float
    dwell: float
    refine: int
    trajectory_dt: float
    safety: float
    saturation: float
    dual_horizon: float
    semigroup: tuple
    check_grid: GridConfig
    check_refine: int

    def with_overrides(self, horizon=None, cells=None, dwell=None) -> "SimulationParams":
        grid = self.grid
        if cells is not None:
            grid = GridConfig(grid.lo, grid.hi, np.full(grid.dim, int(cells)), grid.dt)
        return SimulationParams(
            grid,
            self.horizon if horizon is None else float(horizon),
            self.dwell if dwell is None else float(dwell),
            self.refine,
            self.trajectory_dt,
            self.safety,
            self.saturation,
            self.dual_horizon,
            self.semigroup,
            self.check_grid,
            self.check_refine,
        )


def _grid_from(obj: dict, dim: int, dt: float, default_cells) -> GridConfig:
    box = obj.get("box")
    if box is None:
        raise ConfigError("simulation.box is required")
    box = np.asarray(box, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (dim, 1))
    if box.shape != (dim, 2):
        raise ConfigError(f"simulation box must be {dim} [lo, hi] pairs")
    cells = obj.get("cells_per_axis", default_cells)
    try:
        return GridConfig(box[:, 0], box[:, 1], cells, dt)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc


def simulation_from_json(obj: Optional[dict], dim: int) -> SimulationParams:
    obj = dict(obj or {})
    if "box" not in obj:
        obj["box"] = [-3.0, 3.0]
    dt = float(obj.get("dt", DEFAULTS["grid_dt"]))
    grid = _grid_from(obj, dim, dt, DEFAULTS["cells_per_axis"])
    checks = dict(obj.get("checks", {}))
    check_grid = _grid_from(
        {"box": checks.get("box", obj["box"]), "cells_per_axis": checks.get("cells_per_axis", grid.cells)},
        dim,
        dt,
        grid.cells,
    )
    sg = checks.get("semigroup", DEFAULTS["semigroup"])
    if len(sg) != 2 or min(sg) < 0:
        raise ConfigError("checks.semigroup must be two nonnegative times")
    return SimulationParams(
        grid=grid,
        horizon=float(obj.get("horizon", DEFAULTS["horizon"])),
        dwell=float(obj.get("dwell", DEFAULTS["dwell"])),
        refine=int(obj.get("refine", DEFAULTS["refine"])),
        trajectory_dt=float(obj.get("trajectory_dt", DEFAULTS["trajectory_dt"])),
        safety=float(obj.get("safety", DEFAULTS["safety"])),
        saturation=float(obj.get("saturation", DEFAULTS["saturation"])),
        dual_horizon=float(checks.get("dual_horizon", DEFAULTS["dual_horizon"])),
        semigroup=(float(sg[0]), float(sg[1])),
        check_grid=check_grid,
        check_refine=int(checks.get("refine", obj.get("refine", DEFAULTS["refine"]))),
    )


@dataclass
class SystemConfig:
    spec: LinearSystemSpec
    sim: SimulationParams
    source: Optional[Path] = None
    raw: dict = field(default_factory=dict)


def _load_algebra(ref, base: Optional[Path]) -> LieAlgebra:
    if isinstance(ref, str):
        path = Path(ref)
        if not path.is_absolute() and base is not None:
            path = base / path
        try:
            ref = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read algebra file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"algebra file {path} is not valid JSON: {exc}") from exc
    if not isinstance(ref, dict):
        raise ConfigError("algebra must be an object or a file reference")
    return algebra_from_json(ref)


def config_from_dict(obj: dict, base: Optional[Path] = None) -> SystemConfig:
    if not isinstance(obj, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in ("algebra", "derivation", "controls", "omega"):
        if key not in obj:
            raise ConfigError(f"missing required field '{key}'")
    a = _load_algebra(obj["algebra"], base)
    rep = validate_algebra(a)
    if not rep.ok:
        raise ConfigError(
            f"algebra fails the Lie axioms (antisymmetry {rep.antisymmetry_residual:.3g}, "
            f"Jacobi {rep.jacobi_residual:.3g})"
        )
    try:
        spec = LinearSystemSpec(
            algebra=a,
            D=np.asarray(obj["derivation"], dtype=float),
            controls=np.asarray(obj["controls"], dtype=float),
            omega=omega_from_json(obj["omega"]),
            flags=flags_from_json(obj.get("flags")),
            name=str(obj.get("name", "")),
        )
        sim = simulation_from_json(obj.get("simulation"), a.dim)
    except (SpecError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return SystemConfig(spec, sim, base, obj)


def load_config(path) -> SystemConfig:
    """Load a system file; bare names resolve to the bundled systems."""
    p = Path(path)
    if not p.exists():
        bundled = shipped_system_path(str(path))
        if bundled is None:
            raise ConfigError(f"no such configuration: {path}")
        p = bundled
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p} is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    cfg = config_from_dict(obj, p.parent)
    cfg.source = p
    return cfg


def shipped_systems() -> list[str]:
    root = resources.files("liectrl") / "systems"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".json") and not f.name.startswith("_"))


def shipped_system_path(name: str) -> Optional[Path]:
    stem = Path(name).name
    if stem.endswith(".json"):
        stem = stem[:-5]
    p = Path(str(resources.files("liectrl") / "systems" / f"{stem}.json"))
    return p if p.exists() else None
