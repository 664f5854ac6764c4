"""Finite-dimensional real Lie algebras given by structure constants.

The bracket is stored as a tensor ``c[k, i, j]`` holding the ``e_k``
coordinate of ``[e_i, e_j]``. Indices are 0-based in code and 1-based in
JSON files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

EPS_ALG = 1e-9
EPS_RANK = 1e-8


class AlgebraError(ValueError):
    """Raised on malformed algebra input (shapes, dimensions)."""


def _as_vector(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (dim,):
        raise AlgebraError(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


def _as_matrix(D, dim: int) -> np.ndarray:
    M = np.asarray(D, dtype=float)
    if M.shape != (dim, dim):
        raise AlgebraError(f"expected a {dim}x{dim} matrix, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class LieAlgebra:
    dim: int
    structure: np.ndarray
    basis_labels: Optional[tuple] = None

    def __post_init__(self):
        c = np.array(self.structure, dtype=float)
        if self.dim < 1 or c.shape != (self.dim,) * 3:
            raise AlgebraError(
                f"structure tensor must have shape {(self.dim,) * 3}, got {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "structure", c)

    @classmethod
    def from_brackets(cls, dim: int, brackets: dict, labels=None) -> "LieAlgebra":
        """Build an algebra from ``{(i, j): result}`` with 0-based i < j.

        The tensor is antisymmetrized, so only one ordering per pair is needed.
        """
        c = np.zeros((dim, dim, dim))
        for (i, j), res in brackets.items():
            if not (0 <= i < dim and 0 <= j < dim) or i == j:
                raise AlgebraError(f"bad bracket index pair ({i}, {j})")
            r = _as_vector(res, dim)
            c[:, i, j] = r
            c[:, j, i] = -r
        return cls(dim, c, None if labels is None else tuple(labels))

    @classmethod
    def abelian(cls, dim: int) -> "LieAlgebra":
        return cls(dim, np.zeros((dim, dim, dim)))

    @classmethod
    def heisenberg(cls) -> "LieAlgebra":
        return cls.from_brackets(3, {(0, 1): [0, 0, 1]}, labels=("X", "Y", "Z"))

    @cached_property
    def sparse_structure(self) -> tuple:
        """Nonzero entries of the structure tensor as ``(k, i, j, value)`` arrays."""
        k, i, j = np.nonzero(self.structure)
        return k, i, j, self.structure[k, i, j]

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim)

    def basis_vector(self, i: int) -> np.ndarray:
        e = np.zeros(self.dim)
        e[i] = 1.0
        return e


def bracket(a: LieAlgebra, x, y) -> np.ndarray:
    x = _as_vector(x, a.dim)
    y = _as_vector(y, a.dim)
    return np.einsum("kij,i,j->k", a.structure, x, y)


def bracket_many(a: LieAlgebra, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise brackets of two ``(n, d)`` stacks."""
    k, i, j, v = a.sparse_structure
    if k.size > a.dim * a.dim:
        return np.einsum("kij,ni,nj->nk", a.structure, X, Y)
    out = np.zeros(np.broadcast_shapes(X.shape, Y.shape))
    for kk, ii, jj, vv in zip(k, i, j, v):
        out[:, kk] += vv * X[:, ii] * Y[:, jj]
    return out


def ad(a: LieAlgebra, x) -> np.ndarray:
    """Matrix of ``y -> [x, y]``."""
    x = _as_vector(x, a.dim)
    return np.einsum("kij,i->kj", a.structure, x)


def ad_many(a: LieAlgebra, X: np.ndarray) -> np.ndarray:
    """Stack of ad matrices, shape ``(n, d, d)``."""
    return np.einsum("kij,ni->nkj", a.structure, X)


@dataclass(frozen=True)
class ValidationReport:
    antisymmetry_ok: bool
    antisymmetry_residual: float
    jacobi_ok: bool
    jacobi_residual: float

    @property
    def ok(self) -> bool:
        return self.antisymmetry_ok and self.jacobi_ok


def jacobi_residual(a: LieAlgebra) -> float:
    c = a.structure
    # J[l,i,j,k]: e_l coordinate of [[e_i,e_j],e_k] + cyclic
    J = (
        np.einsum("mij,lmk->lijk", c, c)
        + np.einsum("mjk,lmi->lijk", c, c)
        + np.einsum("mki,lmj->lijk", c, c)
    )
    return float(np.max(np.abs(J))) if J.size else 0.0


def validate_algebra(a: LieAlgebra, eps: float = EPS_ALG) -> ValidationReport:
    c = a.structure
    anti = float(np.max(np.abs(c + np.transpose(c, (0, 2, 1)))))
    jac = jacobi_residual(a)
    return ValidationReport(anti < eps, anti, jac < eps, jac)


def leibniz_residual(a: LieAlgebra, D) -> float:
    D = _as_matrix(D, a.dim)
    c = a.structure
    # D[e_i, e_j] - [D e_i, e_j] - [e_i, D e_j] for all i, j at once
    lhs = np.einsum("kl,lij->kij", D, c)
    r1 = np.einsum("kmj,mi->kij", c, D)
    r2 = np.einsum("kim,mj->kij", c, D)
    return float(np.max(np.abs(lhs - r1 - r2)))


def is_derivation(a: LieAlgebra, D, eps: float = EPS_ALG) -> tuple[bool, float]:
    res = leibniz_residual(a, D)
    return res < eps, res


def is_inner(a: LieAlgebra, D, eps: float = EPS_ALG) -> Optional[np.ndarray]:
    """Return some ``x`` with ``ad(x) == D``, or ``None`` if D is outer."""
    D = _as_matrix(D, a.dim)
    d = a.dim
    # column i is vec(ad(e_i))
    A = np.stack([ad(a, a.basis_vector(i)).ravel() for i in range(d)], axis=1)
    x, *_ = np.linalg.lstsq(A, D.ravel(), rcond=None)
    res = np.max(np.abs(A @ x - D.ravel())) if D.size else 0.0
    return x if res < eps else None


# --------------------------------------------------------------------------
# subspaces


def orth(vectors, eps_rank: float = EPS_RANK, scale: float = 1.0) -> np.ndarray:
    """Orthonormal basis (rows) of the span of ``vectors`` (rows).

    Singular values below ``eps_rank * max(s_max, scale)`` count as zero.
    """
    V = np.asarray(vectors, dtype=float)
    if V.size == 0:
        return np.zeros((0, V.shape[-1] if V.ndim == 2 else 0))
    V = np.atleast_2d(V)
    _, s, vt = np.linalg.svd(V, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, V.shape[1]))
    r = int(np.sum(s > eps_rank * max(s[0], scale)))
    return vt[:r]


def span_distance(v, basis: np.ndarray) -> float:
    """Euclidean distance from ``v`` to the span of orthonormal ``basis`` rows."""
    v = np.asarray(v, dtype=float)
    if basis.shape[0] == 0:
        return float(np.linalg.norm(v))
    return float(np.linalg.norm(v - basis.T @ (basis @ v)))


def subspace_sum(U: np.ndarray, V: np.ndarray, eps_rank: float = EPS_RANK) -> np.ndarray:
    d = U.shape[1] if U.ndim == 2 and U.shape[1] else V.shape[1]
    return orth(np.vstack([U.reshape(-1, d), V.reshape(-1, d)]), eps_rank)


def subspace_intersection(U: np.ndarray, V: np.ndarray, eps_rank: float = EPS_RANK) -> np.ndarray:
    """Orthonormal basis of ``span U ∩ span V`` for orthonormal row bases."""
    d = U.shape[1] if U.ndim == 2 and U.shape[1] else V.shape[1]
    if U.shape[0] == 0 or V.shape[0] == 0:
        return np.zeros((0, d))
    # a U = b V  <=>  [U; -V]^T [a; b] = 0
    M = np.vstack([U, -V]).T
    _, s, vt = np.linalg.svd(M)
    k = U.shape[0] + V.shape[0]
    s_full = np.zeros(k)
    s_full[: s.size] = s
    null = vt[s_full <= eps_rank * max(s_full.max(initial=0.0), 1.0)]
    if null.shape[0] == 0:
        return np.zeros((0, d))
    return orth(null[:, : U.shape[0]] @ U, eps_rank)


@dataclass(frozen=True)
class Subalgebra:
    ambient: LieAlgebra = field(repr=False)
    basis: np.ndarray

    def __post_init__(self):
        B = np.array(self.basis, dtype=float).reshape(-1, self.ambient.dim)
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def contains(self, v, eps: float = EPS_ALG) -> bool:
        return span_distance(v, self.basis) < eps

    def closure_residual(self) -> float:
        """Worst distance of a basis bracket from the span."""
        B = self.basis
        worst = 0.0
        for i in range(B.shape[0]):
            for j in range(i + 1, B.shape[0]):
                worst = max(worst, span_distance(bracket(self.ambient, B[i], B[j]), B))
        return worst

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis


def _all_brackets(a: LieAlgebra, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    if U.shape[0] == 0 or V.shape[0] == 0:
        return np.zeros((0, a.dim))
    X = np.repeat(U, V.shape[0], axis=0)
    Y = np.tile(V, (U.shape[0], 1))
    return bracket_many(a, X, Y)


def _closure(a: LieAlgebra, seeds, D: Optional[np.ndarray], eps_rank: float) -> Subalgebra:
    B = orth(np.asarray(seeds, dtype=float).reshape(-1, a.dim), eps_rank)
    for _ in range(a.dim + 1):
        parts = [B, _all_brackets(a, B, B)]
        if D is not None and B.shape[0]:
            parts.append(B @ D.T)
        B_new = orth(np.vstack(parts), eps_rank)
        if B_new.shape[0] == B.shape[0]:
            return Subalgebra(a, B_new)
        B = B_new
    return Subalgebra(a, B)


def subalgebra_closure(a: LieAlgebra, seeds, eps_rank: float = EPS_RANK) -> Subalgebra:
    """Smallest bracket-closed subspace containing ``seeds``."""
    return _closure(a, seeds, None, eps_rank)


def d_invariant_closure(a: LieAlgebra, D, seeds, eps_rank: float = EPS_RANK) -> Subalgebra:
    """Smallest subalgebra containing ``seeds`` and invariant under ``D``."""
    return _closure(a, seeds, _as_matrix(D, a.dim), eps_rank)


def _bracket_scale(a: LieAlgebra) -> float:
    # brackets of unit vectors are bounded by this, noise included
    return max(1.0, float(np.abs(a.structure).max(initial=0.0)))


def _basis_of(x) -> tuple[LieAlgebra, np.ndarray]:
    if isinstance(x, Subalgebra):
        return x.ambient, x.basis
    return x, np.eye(x.dim)


def lower_central_series(x, eps_rank: float = EPS_RANK) -> list[int]:
    """Dimensions of g, [g,g], [g,[g,g]], ... until it stabilizes."""
    a, B = _basis_of(x)
    dims = [B.shape[0]]
    L = B
    for _ in range(a.dim + 1):
        L = orth(_all_brackets(a, B, L), eps_rank, _bracket_scale(a)) if L.shape[0] else L
        if L.shape[0] == dims[-1]:
            break
        dims.append(L.shape[0])
        if L.shape[0] == 0:
            break
    return dims


def derived_series(x, eps_rank: float = EPS_RANK) -> list[int]:
    a, B = _basis_of(x)
    dims = [B.shape[0]]
    L = B
    for _ in range(a.dim + 1):
        L = orth(_all_brackets(a, L, L), eps_rank, _bracket_scale(a)) if L.shape[0] else L
        if L.shape[0] == dims[-1]:
            break
        dims.append(L.shape[0])
        if L.shape[0] == 0:
            break
    return dims


def is_nilpotent(x, eps_rank: float = EPS_RANK) -> bool:
    return lower_central_series(x, eps_rank)[-1] == 0


def is_solvable(x, eps_rank: float = EPS_RANK) -> bool:
    return derived_series(x, eps_rank)[-1] == 0


def nilpotency_class(x, eps_rank: float = EPS_RANK) -> Optional[int]:
    """Length of the lower central series; 0 for the trivial algebra, None if not nilpotent."""
    dims = lower_central_series(x, eps_rank)
    if dims[-1] != 0:
        return None
    return len(dims) - 1
