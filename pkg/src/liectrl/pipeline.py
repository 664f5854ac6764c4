"""End-to-end runs: spectral analysis, classification and grid estimates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import is_derivation, is_inner, validate_algebra
from .analysis import (
    ClassificationReport,
    Numerics,
    check_larc,
    classify,
    decomposition_identities,
)
from .config import SystemConfig
from .simulation.grid import (
    ControlSetEstimate,
    OccupancyGrid,
    control_set_from_grids,
    controllable_grid_bfs,
    dual_transform,
    is_monotone,
    reach_grid,
    semigroup_check,
    slice_bounded,
    symmetric_difference_ratio,
)
from .spectral import SpectralDecomposition, decompose, intersection_dims, verify_grading
from .system import ControlSample

log = logging.getLogger(__name__)


def analyze(cfg: SystemConfig) -> dict:
    """Decomposition, grading, subgroup identities and the classification report."""
    s = cfg.spec
    a = s.algebra
    val = validate_algebra(a)
    _, leib = is_derivation(a, s.D)
    inner = is_inner(a, s.D)
    dec = decompose(a, s.D)
    grading = verify_grading(a, s.D)
    ident = decomposition_identities(dec, s)
    larc = check_larc(s)
    report = classify(s, dec, larc)
    return {
        "name": s.name,
        "dim": a.dim,
        "algebra": {
            "antisymmetry_residual": val.antisymmetry_residual,
            "jacobi_residual": val.jacobi_residual,
            "nilpotent": s.nilpotent,
            "solvable": s.solvable,
            "nilpotency_class": s.nilpotency_class,
        },
        "derivation": {"leibniz_residual": leib, "inner": inner is not None,
                       "inner_witness": None if inner is None else inner.tolist()},
        "decomposition": dec.to_dict(),
        "intersections": intersection_dims(dec),
        "grading": {"ok": grading.ok, "residual": grading.residual},
        "identities": {
            "applicable": ident.applicable,
            "g_plus_zero + g_minus = g": ident.plus_zero_plus_minus,
            "g_minus_zero + g_plus = g": ident.minus_zero_plus_plus,
        },
        "classification": report.to_dict(),
        "_report": report,
        "_decomposition": dec,
    }


def public(result: dict) -> dict:
    """Drop in-memory objects before serializing."""
    return {k: v for k, v in result.items() if not k.startswith("_")}


@dataclass
class CrossCheck:
    prop: str
    theory: str
    numeric: str

    @property
    def status(self) -> str:
        if self.theory == "unknown":
            return "UNDECIDED"
        return "AGREE" if self.theory == self.numeric else "DISAGREE"

    def line(self) -> str:
        return f"{self.status}({self.prop}): theory {self.theory}, grid {self.numeric}"

    def to_dict(self) -> dict:
        return {"property": self.prop, "theory": self.theory, "numeric": self.numeric, "status": self.status}


def _yn(b: bool) -> str:
    return "yes" if b else "no"


@dataclass
class Study:
    cfg: SystemConfig
    decomposition: SpectralDecomposition
    report: ClassificationReport
    reach: OccupancyGrid
    controllable: OccupancyGrid
    estimate: ControlSetEstimate
    numeric_flags: dict
    cross: list
    checks: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "name": self.cfg.spec.name,
            "reachable": self.reach.summary(),
            "controllable": self.controllable.summary(),
            "control_set": {**self.estimate.grid.summary(), **self.estimate.flags()},
            "numeric_flags": self.numeric_flags,
            "classification": self.report.to_dict(),
            "cross_check": [c.to_dict() for c in self.cross],
            "cross_check_lines": [c.line() for c in self.cross],
            "set_identities": self.checks,
        }


def numeric_flags(reach: OccupancyGrid, ctrl: OccupancyGrid, est: ControlSetEstimate, saturation: float) -> dict:
    return {
        "reach_fills_box": reach.fraction >= saturation,
        "controllable_fills_box": ctrl.fraction >= saturation,
        "estimate_fills_box": est.grid.fraction >= saturation,
        "estimate_bounded_in_box": est.bounded_in_box,
        "estimate_connected": est.connected,
        "estimate_contains_origin": est.contains_origin,
        "estimate_nonempty_interior": bool(est.grid.count > 1),
    }


def cross_checks(report: ClassificationReport, flags: dict) -> list[CrossCheck]:
    """Theory verdicts against grid observations.

    C open iff A = G, C closed iff A* = G; on the grid "= G" means filling
    the box.
    """
    return [
        CrossCheck("open", report.c_open.value, _yn(flags["reach_fills_box"])),
        CrossCheck("closed", report.c_closed.value, _yn(flags["controllable_fills_box"])),
        CrossCheck("C=G", report.c_equals_G.value, _yn(flags["estimate_fills_box"])),
        CrossCheck("bounded", report.c_bounded.value, _yn(flags["estimate_bounded_in_box"])),
    ]


def set_identity_checks(cfg: SystemConfig, controls: ControlSample, threads: int = 1) -> dict:
    """Dual construction, semigroup property and monotonicity on the check grid."""
    s, sim = cfg.spec, cfg.sim
    grid, rf = sim.check_grid, sim.check_refine
    t1, t2 = sim.semigroup
    cache: dict = {}

    def reach(t):
        if t not in cache:
            cache[t] = reach_grid(s, t, grid, controls, threads, rf)
        return cache[t]

    g1, g2, g12 = reach(t1), reach(t2), reach(t1 + t2)
    sg = semigroup_check(s, g1, g2, g12)
    th = sim.dual_horizon
    ctrl = controllable_grid_bfs(s, th, grid, controls, threads, rf)
    dual, valid = dual_transform(reach(th), s.D, th)
    ratio = symmetric_difference_ratio(ctrl.occupied, dual, valid)
    times = sorted(cache)
    mono = all(is_monotone(cache[a], cache[b]) for a, b in zip(times, times[1:]))
    return {
        "dual_horizon": th,
        "dual_ratio": ratio,
        "dual_valid_fraction": float(valid.mean()),
        "semigroup_times": [t1, t2],
        "semigroup_ratio": sg,
        "monotone": mono,
        "monotone_times": times,
    }


def study(cfg: SystemConfig, threads: int = 1, with_checks: bool = True) -> Study:
    s, sim = cfg.spec, cfg.sim
    controls = ControlSample.from_range(s.omega, sim.dwell)
    dec = decompose(s.algebra, s.D)
    log.info("expanding reachable set to T=%g on %s cells", sim.horizon, sim.grid.shape)
    reach = reach_grid(s, sim.horizon, sim.grid, controls, threads, sim.refine)
    log.info("expanding controllable set")
    ctrl = controllable_grid_bfs(s, sim.horizon, sim.grid, controls, threads, sim.refine)
    est = control_set_from_grids(reach, ctrl)
    numerics = Numerics(
        cl_A_minus_compact=slice_bounded(reach, dec.g_minus.basis),
        cl_Astar_plus_compact=slice_bounded(ctrl, dec.g_plus.basis),
    )
    report = classify(s, dec, numerics=numerics)
    flags = numeric_flags(reach, ctrl, est, sim.saturation)
    flags["cl_A_minus_compact"] = numerics.cl_A_minus_compact
    flags["cl_Astar_plus_compact"] = numerics.cl_Astar_plus_compact
    cross = cross_checks(report, flags)
    checks = set_identity_checks(cfg, controls, threads) if with_checks else {}
    return Study(cfg, dec, report, reach, ctrl, est, flags, cross, checks)
