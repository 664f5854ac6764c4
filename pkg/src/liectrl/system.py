"""Linear control systems: algebra, derivation, control directions, control range."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.spatial import ConvexHull

from .algebra import LieAlgebra, is_derivation, is_nilpotent, is_solvable, nilpotency_class


class SpecError(ValueError):
    """Invalid system definition."""


@dataclass(frozen=True)
class ControlRange:
    """Compact convex control range: a centered box or a polytope by vertices."""

    radii: Optional[np.ndarray] = None
    vertex_list: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.radii is None) == (self.vertex_list is None):
            raise SpecError("control range needs exactly one of radii / vertices")
        if self.radii is not None:
            r = np.atleast_1d(np.asarray(self.radii, dtype=float))
            if r.ndim != 1 or np.any(r <= 0):
                raise SpecError("box radii must be positive so that 0 is interior")
            object.__setattr__(self, "radii", r)
        else:
            V = np.asarray(self.vertex_list, dtype=float)
            if V.ndim == 1:
                V = V[:, None]
            object.__setattr__(self, "vertex_list", V)
            if self.interior_margin() <= 0:
                raise SpecError("0 must lie in the interior of the control polytope")

    @classmethod
    def box(cls, radii) -> "ControlRange":
        return cls(radii=np.atleast_1d(np.asarray(radii, dtype=float)))

    @classmethod
    def polytope(cls, vertices) -> "ControlRange":
        return cls(vertex_list=np.asarray(vertices, dtype=float))

    @property
    def m(self) -> int:
        return self.radii.size if self.radii is not None else self.vertex_list.shape[1]

    def vertices(self) -> np.ndarray:
        if self.radii is not None:
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.m)))
            return signs * self.radii
        if self.m == 1:
            v = self.vertex_list[:, 0]
            return np.array([[v.min()], [v.max()]])
        hull = ConvexHull(self.vertex_list)
        return self.vertex_list[np.sort(hull.vertices)]

    def edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        V = self.vertices()
        if self.m == 1:
            return [(V[0], V[1])]
        if self.radii is not None:
            out = []
            for i, j in itertools.combinations(range(len(V)), 2):
                if np.count_nonzero(V[i] != V[j]) == 1:
                    out.append((V[i], V[j]))
            return out
        hull = ConvexHull(self.vertex_list)
        pairs = set()
        for simplex in hull.simplices:
            for i, j in itertools.combinations(sorted(simplex), 2):
                pairs.add((i, j))
        return [(self.vertex_list[i], self.vertex_list[j]) for i, j in sorted(pairs)]

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.radii is not None:
            return bool(np.all(np.abs(u) <= self.radii + tol))
        if self.m == 1:
            v = self.vertex_list[:, 0]
            return bool(v.min() - tol <= u[0] <= v.max() + tol)
        hull = ConvexHull(self.vertex_list)
        return bool(np.all(hull.equations[:, :-1] @ u + hull.equations[:, -1] <= tol))

    def interior_margin(self) -> float:
        """Distance from 0 to the boundary of the range (positive iff interior)."""
        if self.radii is not None:
            return float(self.radii.min())
        if self.m == 1:
            v = self.vertex_list[:, 0]
            return float(min(-v.min(), v.max()))
        hull = ConvexHull(self.vertex_list)
        # unit outward normals: n.x + b <= 0 inside
        return float(np.min(-hull.equations[:, -1]))

    def to_dict(self) -> dict:
        if self.radii is not None:
            return {"box": self.radii.tolist()}
        return {"vertices": self.vertex_list.tolist()}


@dataclass(frozen=True)
class ControlSample:
    """Piecewise-constant control levels used for set approximation."""

    values: np.ndarray
    dwell: float

    @classmethod
    def from_range(cls, omega: ControlRange, dwell: float = 0.1) -> "ControlSample":
        levels = [np.zeros(omega.m)]
        levels.extend(omega.vertices())
        levels.extend(0.5 * (p + q) for p, q in omega.edges())
        uniq = np.unique(np.round(np.array(levels), 12), axis=0)
        return cls(uniq, float(dwell))

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.values, dtype=float))
        if V.shape[0] == 0:
            raise SpecError("control sample is empty")
        object.__setattr__(self, "values", V)
        if self.dwell <= 0:
            raise SpecError("dwell must be positive")


@dataclass(frozen=True)
class GroupFlags:
    simply_connected: bool = True
    finite_semisimple_center: Optional[bool] = None  # None: true when solvable, else unknown
    G0_compact: Union[bool, str] = "auto"
    a_open_assumed: Optional[bool] = None  # None: take the LARC verdict


@dataclass(frozen=True)
class LinearSystemSpec:
    algebra: LieAlgebra
    D: np.ndarray
    controls: np.ndarray  # (m, d), rows are the control directions
    omega: ControlRange
    flags: GroupFlags = field(default_factory=GroupFlags)
    name: str = ""

    def __post_init__(self):
        d = self.algebra.dim
        D = np.asarray(self.D, dtype=float)
        if D.shape != (d, d):
            raise SpecError(f"derivation must be {d}x{d}, got {D.shape}")
        X = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if X.shape[0] == 0 or X.shape[1] != d:
            raise SpecError(f"controls must be a nonempty list of length-{d} vectors")
        if X.shape[0] != self.omega.m:
            raise SpecError(f"{X.shape[0]} control directions but the control range has dimension {self.omega.m}")
        ok, res = is_derivation(self.algebra, D)
        if not ok:
            raise SpecError(f"matrix is not a derivation (Leibniz residual {res:.3g})")
        D.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "controls", X)

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def nilpotent(self) -> bool:
        return is_nilpotent(self.algebra)

    @property
    def solvable(self) -> bool:
        return is_solvable(self.algebra)

    @property
    def nilpotency_class(self) -> Optional[int]:
        return nilpotency_class(self.algebra)

    @property
    def finite_semisimple_center(self) -> Optional[bool]:
        if self.flags.finite_semisimple_center is not None:
            return self.flags.finite_semisimple_center
        # solvable groups have no semisimple subgroups
        return True if self.solvable else None

    def with_derivation(self, D) -> "LinearSystemSpec":
        return LinearSystemSpec(self.algebra, D, self.controls, self.omega, self.flags, self.name)
