"""Occupancy-grid approximation of reachable, controllable and control sets.

Cells are marked only when an integrated trajectory sample lands in them, so
every occupied cell contains a point that is reachable (up to integration
error) by a piecewise-constant control in time <= horizon.

Frontier expansion: each occupied cell keeps the earliest sample that landed
in it as a representative. Frontier entries are processed in batches ordered
by arrival time; every entry is integrated for one dwell under each control
level and all dt-samples along the way are recorded. An entry that does not
leave its own cell within a dwell keeps integrating under the same control
(without branching), so slow motion near equilibria is not lost to the
lattice resolution.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from ..system import ControlSample, LinearSystemSpec, SpecError
from .dynamics import Dynamics, bch_product, flow_matrix


@dataclass(frozen=True)
class GridConfig:
    lo: np.ndarray
    hi: np.ndarray
    cells: np.ndarray
    dt: float = 1e-2

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        cells = np.broadcast_to(np.atleast_1d(np.asarray(self.cells, dtype=int)), lo.shape).copy()
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise SpecError("grid box needs lo < hi on every axis")
        if np.any(cells < 1):
            raise SpecError("cells per axis must be positive")
        if np.any(lo >= 0) or np.any(hi <= 0):
            raise SpecError("the grid box must contain the origin in its interior")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def cube(cls, half_width: float, dim: int, cells: int, dt: float = 1e-2) -> "GridConfig":
        return cls(np.full(dim, -half_width), np.full(dim, half_width), np.full(dim, cells), dt)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def width(self) -> np.ndarray:
        return (self.hi - self.lo) / self.cells

    @property
    def shape(self) -> tuple:
        return tuple(int(c) for c in self.cells)

    def locate(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Lattice indices of points and an inside-the-box mask."""
        idx = np.floor((P - self.lo) / self.width).astype(np.int64)
        inside = np.all((P >= self.lo) & (P <= self.hi), axis=1)
        idx = np.clip(idx, 0, self.cells - 1)
        return idx, inside

    def flat(self, idx: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(idx.T), self.shape)

    def centers(self) -> np.ndarray:
        """Cell centers as an array of shape ``cells + (d,)``."""
        axes = [self.lo[i] + (np.arange(self.cells[i]) + 0.5) * self.width[i] for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def origin_index(self) -> tuple:
        idx, _ = self.locate(np.zeros((1, self.dim)))
        return tuple(int(i) for i in idx[0])

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[ax] = 0
            m[tuple(sl)] = True
            sl[ax] = -1
            m[tuple(sl)] = True
        return m


@dataclass
class OccupancyGrid:
    config: GridConfig
    occupied: np.ndarray
    horizon: float
    kind: str
    arrival: Optional[np.ndarray] = None
    rep_index: Optional[np.ndarray] = None  # flat indices of cells with a representative
    rep_points: Optional[np.ndarray] = None
    boundary_hits: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return int(self.occupied.sum())

    @property
    def fraction(self) -> float:
        return self.count / self.occupied.size

    def contains_origin(self) -> bool:
        return bool(self.occupied[self.config.origin_index()])

    def touches_boundary(self) -> bool:
        return bool(np.any(self.occupied & self.config.boundary_mask()))

    def occupied_indices(self) -> np.ndarray:
        """Occupied lattice indices in lexicographic order."""
        return np.argwhere(self.occupied)

    def to_csv(self) -> str:
        c = self.config
        bounds = ";".join(f"{lo!r}:{hi!r}" for lo, hi in zip(c.lo.tolist(), c.hi.tolist()))
        cells = ";".join(str(int(n)) for n in c.cells)
        lines = [
            "axis bounds,cells,kind,horizon",
            f"{bounds},{cells},{self.kind},{self.horizon!r}",
            ",".join(f"i_{k + 1}" for k in range(c.dim)),
        ]
        lines.extend(",".join(str(int(v)) for v in row) for row in self.occupied_indices())
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "horizon": self.horizon,
            "box": [[float(lo), float(hi)] for lo, hi in zip(self.config.lo, self.config.hi)],
            "cells_per_axis": [int(n) for n in self.config.cells],
            "occupied": self.count,
            "fraction": self.fraction,
            "boundary_hits": self.boundary_hits,
            "contains_origin": self.contains_origin(),
            **self.meta,
        }


def grid_from_csv(text: str) -> OccupancyGrid:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    bounds, cells, kind, horizon = lines[1].split(",")
    lo, hi = zip(*(tuple(float(v) for v in b.split(":")) for b in bounds.split(";")))
    cfg = GridConfig(np.array(lo), np.array(hi), np.array([int(n) for n in cells.split(";")]))
    occ = np.zeros(cfg.shape, dtype=bool)
    for ln in lines[3:]:
        occ[tuple(int(v) for v in ln.split(","))] = True
    return OccupancyGrid(cfg, occ, float(horizon), kind)


# --------------------------------------------------------------------------
# frontier expansion


def _expand_chunk(dyn, cfg, P, t0, ctrl_idx, levels, steps, dt, horizon):
    """Integrate one dwell for a chunk of (point, control) pairs.

    Returns candidate samples (flat cell, time, point, pair) plus the state of
    every pair at the end of the dwell.
    """
    U = levels[ctrl_idx]
    start_flat = cfg.flat(cfg.locate(P)[0])
    X = P.copy()
    alive = np.ones(len(P), dtype=bool)
    left = np.zeros(len(P), dtype=bool)
    hits = 0
    cand_flat, cand_t, cand_x, cand_pair = [], [], [], []
    pair_ids = np.arange(len(P))
    for k in range(1, steps + 1):
        a = np.flatnonzero(alive)
        if a.size == 0:
            break
        X[a] = dyn.rk4_step(X[a], U[a], dt)
        t = t0[a] + k * dt
        idx, inside = cfg.locate(X[a])
        finite = np.all(np.isfinite(X[a]), axis=1)
        dead = ~inside | ~finite
        hits += int(np.count_nonzero(dead & (t <= horizon + 1e-12)))
        alive[a[dead]] = False
        ok = ~dead
        if not np.any(ok):
            continue
        a_ok = a[ok]
        f = cfg.flat(idx[ok])
        left[a_ok] |= f != start_flat[a_ok]
        cand_flat.append(f)
        cand_t.append(t[ok])
        cand_x.append(X[a_ok].copy())
        cand_pair.append(pair_ids[a_ok])
    if cand_flat:
        cands = (np.concatenate(cand_flat), np.concatenate(cand_t), np.vstack(cand_x), np.concatenate(cand_pair))
    else:
        cands = (np.zeros(0, np.int64), np.zeros(0), np.zeros((0, cfg.dim)), np.zeros(0, np.int64))
    return cands, X, alive, left, hits


def frontier_grid(
    s: LinearSystemSpec,
    horizon: float,
    cfg: GridConfig,
    controls: ControlSample,
    direction: float = 1.0,
    kind: str = "reachable",
    threads: int = 1,
    chunk: int = 200_000,
    max_rounds: Optional[int] = None,
) -> OccupancyGrid:
    if controls.values.shape[0] == 0:
        raise SpecError("empty control sample")
    if controls.values.shape[1] != s.omega.m:
        raise SpecError("control sample dimension does not match the control range")
    dyn = Dynamics(s, direction)
    dt = cfg.dt
    steps = max(1, int(round(controls.dwell / dt)))
    dwell = steps * dt
    levels = controls.values
    nc = levels.shape[0]
    ncell = int(np.prod(cfg.cells))
    min_move = 1e-3 * float(cfg.width.min())

    occupied = np.zeros(ncell, dtype=bool)
    arrival = np.full(ncell, np.inf)
    rep_x = {}

    o = cfg.flat(cfg.locate(np.zeros((1, cfg.dim)))[0])[0]
    occupied[o] = True
    arrival[o] = 0.0
    rep_x[o] = np.zeros(cfg.dim)

    # pending entries: point, time, control (-1 = branch over all levels)
    pend_x = np.zeros((1, cfg.dim))
    pend_t = np.zeros(1)
    pend_c = np.full(1, -1, dtype=np.int64)
    hits = 0
    rounds = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while pend_t.size:
            tmin = pend_t.min()
            if tmin >= horizon - 1e-12:
                break
            rounds += 1
            if max_rounds is not None and rounds > max_rounds:
                break
            sel = pend_t < tmin + dwell - 1e-12
            bx, bt, bc = pend_x[sel], pend_t[sel], pend_c[sel]
            pend_x, pend_t, pend_c = pend_x[~sel], pend_t[~sel], pend_c[~sel]

            branch = bc < 0
            n_b = int(branch.sum())
            P = np.vstack([np.repeat(bx[branch], nc, axis=0), bx[~branch]])
            T0 = np.concatenate([np.repeat(bt[branch], nc), bt[~branch]])
            C = np.concatenate([np.tile(np.arange(nc), n_b), bc[~branch]])

            pieces = [(i, min(i + chunk, len(P))) for i in range(0, len(P), chunk)]
            args = [(dyn, cfg, P[i:j], T0[i:j], C[i:j], levels, steps, dt, horizon) for i, j in pieces]
            if pool is not None and len(args) > 1:
                results = list(pool.map(lambda a: _expand_chunk(*a), args))
            else:
                results = [_expand_chunk(*a) for a in args]

            # merge in chunk order so the result does not depend on scheduling
            cf, ct, cx, cp = [], [], [], []
            ends, alive, left = [], [], []
            for (i, _j), (cands, Xend, al, lf, h) in zip(pieces, results):
                hits += h
                cf.append(cands[0])
                ct.append(cands[1])
                cx.append(cands[2])
                cp.append(cands[3] + i)
                ends.append(Xend)
                alive.append(al)
                left.append(lf)
            cf = np.concatenate(cf)
            ct = np.concatenate(ct)
            cx = np.vstack(cx)
            cp = np.concatenate(cp)

            new_x, new_t = [], []
            fresh = ~occupied[cf]
            if np.any(fresh):
                cf, ct, cx, cp = cf[fresh], ct[fresh], cx[fresh], cp[fresh]
                order = np.lexsort((cp, ct, cf))
                cf, ct, cx = cf[order], ct[order], cx[order]
                first = np.ones(cf.size, dtype=bool)
                first[1:] = cf[1:] != cf[:-1]
                cells = cf[first]
                occupied[cells] = True
                arrival[cells] = ct[first]
                for c, x in zip(cells, cx[first]):
                    rep_x[int(c)] = x
                new_x.append(cx[first])
                new_t.append(ct[first])
                new_c = [np.full(int(first.sum()), -1, dtype=np.int64)]
            else:
                new_c = []

            Xend = np.vstack(ends)
            alive = np.concatenate(alive)
            left = np.concatenate(left)
            moved = np.linalg.norm(Xend - P, axis=1) > min_move
            cont = alive & ~left & moved
            if np.any(cont):
                new_x.append(Xend[cont])
                new_t.append(T0[cont] + dwell)
                new_c.append(C[cont])

            if new_x:
                pend_x = np.vstack([pend_x] + new_x)
                pend_t = np.concatenate([pend_t] + new_t)
                pend_c = np.concatenate([pend_c] + new_c)
    finally:
        if pool is not None:
            pool.shutdown()

    # exploration never looks at the horizon except to stop, so the result
    # for a shorter horizon is a prefix of the one for a longer horizon
    within = arrival <= horizon + 1e-12
    occupied &= within
    keys = np.array(sorted(k for k in rep_x if within[k]), dtype=np.int64)
    pts = np.array([rep_x[k] for k in keys]) if keys.size else np.zeros((0, cfg.dim))
    return OccupancyGrid(
        cfg,
        occupied.reshape(cfg.shape),
        float(horizon),
        kind,
        arrival=arrival.reshape(cfg.shape),
        rep_index=keys,
        rep_points=pts,
        boundary_hits=hits,
        meta={"rounds": rounds, "direction": direction},
    )


def coarsen(grid: OccupancyGrid, cfg: GridConfig, refine: int) -> OccupancyGrid:
    """Collapse a grid built on ``cfg`` refined ``refine`` times per axis back onto ``cfg``."""
    if refine == 1:
        return grid
    shape = []
    for n in cfg.shape:
        shape += [n, refine]
    axes = tuple(range(1, 2 * cfg.dim, 2))
    occ = grid.occupied.reshape(shape).any(axis=axes)
    arr = grid.arrival.reshape(shape).min(axis=axes)
    meta = dict(grid.meta, refine=refine)
    return OccupancyGrid(
        cfg, occ, grid.horizon, grid.kind, arr, grid.rep_index, grid.rep_points, grid.boundary_hits, meta
    )


def refined(cfg: GridConfig, refine: int) -> GridConfig:
    return GridConfig(cfg.lo, cfg.hi, cfg.cells * refine, cfg.dt)


def reach_grid(s, horizon, cfg, controls, threads: int = 1, refine: int = 1) -> OccupancyGrid:
    """Grid estimate of the reachable set of the identity up to ``horizon``.

    Reachable sets grow with time for these systems, so this is also the set
    reached at exactly ``horizon``.

    ``refine > 1`` keeps one representative per sub-cell of a lattice that is
    ``refine`` times finer per axis; occupancy is reported on ``cfg``.
    """
    g = frontier_grid(s, horizon, refined(cfg, refine), controls, 1.0, "reachable", threads)
    return coarsen(g, cfg, refine)


def controllable_grid_bfs(s, horizon, cfg, controls, threads: int = 1, refine: int = 1) -> OccupancyGrid:
    """Grid estimate of the set controllable to the identity (time-reversed expansion)."""
    g = frontier_grid(s, horizon, refined(cfg, refine), controls, -1.0, "controllable", threads)
    return coarsen(g, cfg, refine)


def dual_transform(reach: OccupancyGrid, D, horizon: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Controllable set as ``phi_{-T}(A_T^{-1})`` built from a reachable grid.

    Pull-back: cell ``y`` is marked when ``-exp(TD) y`` lands in an occupied
    reachable cell. Returns ``(occupied, valid)`` where ``valid`` masks the
    cells whose preimage lies inside the box, i.e. where the truncated
    reachable grid can answer at all.
    """
    cfg = reach.config
    T = reach.horizon if horizon is None else horizon
    Y = cfg.centers().reshape(-1, cfg.dim)
    X = -(Y @ flow_matrix(D, T).T)
    idx, inside = cfg.locate(X)
    occ = np.zeros(len(Y), dtype=bool)
    occ[inside] = reach.occupied.reshape(-1)[cfg.flat(idx[inside])]
    return occ.reshape(cfg.shape), inside.reshape(cfg.shape)


def symmetric_difference_ratio(A: np.ndarray, B: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """``|A △ B| / |A ∪ B|`` restricted to ``mask``."""
    if mask is not None:
        A = A & mask
        B = B & mask
    union = np.count_nonzero(A | B)
    if union == 0:
        return 0.0
    return np.count_nonzero(A ^ B) / union


@dataclass
class ControllableResult:
    grid: OccupancyGrid
    dual: np.ndarray
    dual_valid: np.ndarray
    dual_ratio: float


def controllable_grid(
    s, horizon, cfg, controls, reach: Optional[OccupancyGrid] = None, threads: int = 1, refine: int = 1
) -> ControllableResult:
    """Time-reversed expansion, cross-checked against the dual transform of ``reach``."""
    g = controllable_grid_bfs(s, horizon, cfg, controls, threads, refine)
    if reach is None:
        reach = reach_grid(s, horizon, cfg, controls, threads, refine)
    dual, valid = dual_transform(reach, s.D, horizon)
    ratio = symmetric_difference_ratio(g.occupied, dual, valid)
    g.meta["dual_ratio"] = ratio
    return ControllableResult(g, dual, valid, ratio)


@dataclass
class ControlSetEstimate:
    grid: OccupancyGrid
    contains_origin: bool
    bounded_in_box: bool
    connected: bool
    components: int

    def flags(self) -> dict:
        return {
            "contains_origin": self.contains_origin,
            "bounded_in_box": self.bounded_in_box,
            "connected": self.connected,
            "components": self.components,
        }


def closure_dilation(occupied: np.ndarray) -> np.ndarray:
    d = occupied.ndim
    return ndimage.binary_dilation(occupied, structure=ndimage.generate_binary_structure(d, d))


def control_set_from_grids(reach: OccupancyGrid, ctrl: OccupancyGrid) -> ControlSetEstimate:
    cfg = reach.config
    occ = closure_dilation(reach.occupied) & ctrl.occupied
    labels, n = ndimage.label(occ, structure=ndimage.generate_binary_structure(cfg.dim, 1))
    grid = OccupancyGrid(cfg, occ, reach.horizon, "control_set")
    return ControlSetEstimate(
        grid,
        contains_origin=grid.contains_origin(),
        bounded_in_box=not grid.touches_boundary(),
        connected=n == 1,
        components=int(n),
    )


def control_set_estimate(s, horizon, cfg, controls, threads: int = 1, refine: int = 1) -> ControlSetEstimate:
    reach = reach_grid(s, horizon, cfg, controls, threads, refine)
    ctrl = controllable_grid_bfs(s, horizon, cfg, controls, threads, refine)
    return control_set_from_grids(reach, ctrl)


def slice_bounded(grid: OccupancyGrid, basis: np.ndarray) -> bool:
    """Whether the grid restricted to a subspace (a subgroup in log coordinates) stays off the box boundary.

    Cells within half a cell diagonal of the subspace count as lying on it.
    """
    cfg = grid.config
    if basis.shape[0] == 0:
        return True
    C = cfg.centers().reshape(-1, cfg.dim)
    resid = C - (C @ basis.T) @ basis
    near = (np.linalg.norm(resid, axis=1) <= 0.5 * np.linalg.norm(cfg.width)).reshape(cfg.shape)
    on = grid.occupied & near
    return not bool(np.any(on & cfg.boundary_mask()))


def _one_per_cell(g: OccupancyGrid) -> np.ndarray:
    """Representatives deduplicated to one per output cell."""
    P = g.rep_points
    if P is None or len(P) == 0:
        return np.zeros((0, g.config.dim))
    idx, _ = g.config.locate(P)
    _, first = np.unique(g.config.flat(idx), return_index=True)
    return P[np.sort(first)]


def semigroup_check(s, g1: OccupancyGrid, g2: OccupancyGrid, g12: OccupancyGrid, chunk: int = 2_000_000) -> float:
    """Symmetric-difference ratio between ``A_{t1} phi_{t1}(A_{t2})`` and ``A_{t1+t2}``.

    The product set is formed from the cell representatives of both grids.
    """
    prod = product_grid(s, g1, g2, g12.config, chunk)
    return symmetric_difference_ratio(prod, g12.occupied)


def product_grid(s, g1: OccupancyGrid, g2: OccupancyGrid, cfg: GridConfig, chunk: int = 2_000_000) -> np.ndarray:
    """Cells hit by ``a . phi_{t1}(b)`` for representatives ``a`` of ``g1`` and ``b`` of ``g2``."""
    A = _one_per_cell(g1)
    B = _one_per_cell(g2) @ flow_matrix(s.D, g1.horizon).T
    prod = np.zeros(int(np.prod(cfg.cells)), dtype=bool)
    step = max(1, chunk // max(1, len(B)))
    for i in range(0, len(A), step):
        a = A[i : i + step]
        X = np.repeat(a, len(B), axis=0)
        Y = np.tile(B, (len(a), 1))
        Z = bch_product(s.algebra, X, Y)
        idx, inside = cfg.locate(Z)
        prod[cfg.flat(idx[inside])] = True
    return prod.reshape(cfg.shape)


def is_monotone(g1: OccupancyGrid, g2: OccupancyGrid) -> bool:
    """``g1 ⊆ g2`` cellwise."""
    return not bool(np.any(g1.occupied & ~g2.occupied))


def hausdorff_to_box(grid: OccupancyGrid, lo, hi) -> float:
    """Hausdorff distance, in cells, between the occupied cells and a box.

    Measured between cell centers and the closed box on one side, and between
    box cells and occupied centers on the other. Axes are scaled by the cell
    width so the answer is in cell units.
    """
    from scipy.spatial import cKDTree

    cfg = grid.config
    lo, hi = np.broadcast_to(np.asarray(lo, float), (cfg.dim,)), np.broadcast_to(np.asarray(hi, float), (cfg.dim,))
    C = cfg.centers().reshape(-1, cfg.dim) / cfg.width
    occ = grid.occupied.reshape(-1)
    lo_c, hi_c = lo / cfg.width, hi / cfg.width
    if not occ.any():
        return float("inf")
    P = C[occ]
    out_dist = np.linalg.norm(np.maximum(0.0, np.maximum(lo_c - P, P - hi_c)), axis=1).max()
    target = np.all((C >= lo_c - 1e-9) & (C <= hi_c + 1e-9), axis=1)
    if not target.any():
        return float("inf")
    in_dist = cKDTree(P).query(C[target])[0].max()
    return float(max(out_dist, in_dist))
