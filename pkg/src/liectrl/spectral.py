"""Generalized eigenspace decomposition of a derivation.

Eigenvalues are grouped by the sign of their real part into the unstable,
central and stable subalgebras ``g+``, ``g0``, ``g-``. Conjugate pairs are
handled as real two-dimensional blocks; nothing is complexified in the API.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .algebra import (
    EPS_ALG,
    EPS_RANK,
    LieAlgebra,
    Subalgebra,
    bracket_many,
    is_derivation,
    is_nilpotent,
    orth,
    span_distance,
    subspace_intersection,
    subspace_sum,
)

EPS_RE = 1e-7
# defective blocks of size k perturb eigenvalues by ~eps**(1/k)
CLUSTER_TOL = 1e-4


class SpectralError(ArithmeticError):
    """Eigensolver failure or an eigenvalue that is not in the spectrum."""


class InconsistencyError(RuntimeError):
    """A structural identity failed beyond tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


def _normalize(z: complex, eps_re: float) -> complex:
    re, im = z.real, z.imag
    if abs(re) < eps_re:
        re = 0.0
    if abs(im) < eps_re:
        im = 0.0
    return complex(re, im)


def cluster_tol(D) -> float:
    """Eigenvalues closer than this are one cluster (a perturbed defective block)."""
    D = np.asarray(D, dtype=float)
    return CLUSTER_TOL * (max(1.0, float(np.linalg.norm(D, 2))) if D.size else 1.0)


def spectrum(D, eps_re: float = EPS_RE) -> list[tuple[complex, int]]:
    """Eigenvalues with algebraic multiplicities.

    Nearby eigenvalues (a perturbed defective block) are merged into one
    cluster represented by their mean, which is accurate because the trace of
    the block is. Conjugates are listed next to each other, positive
    imaginary part first.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SpectralError(f"spectrum needs a square matrix, got shape {D.shape}")
    try:
        ev = np.linalg.eigvals(D)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(str(exc)) from exc
    tol = cluster_tol(D)

    remaining = list(ev)
    clusters: list[list[complex]] = []
    while remaining:
        z = remaining.pop(0)
        group = [z]
        keep = []
        for w in remaining:
            (group if abs(w - z) < tol else keep).append(w)
        remaining = keep
        clusters.append(group)

    out: dict[complex, int] = {}
    for group in clusters:
        z = _normalize(complex(np.mean(group)), eps_re)
        out[z] = out.get(z, 0) + len(group)

    # make conjugates exact mirrors of each other
    result: list[tuple[complex, int]] = []
    seen = set()
    for z in sorted(out, key=lambda w: (w.real, abs(w.imag), -w.imag)):
        if z in seen:
            continue
        if z.imag == 0.0:
            result.append((z, out[z]))
            seen.add(z)
            continue
        partner = min(out, key=lambda w: abs(w - z.conjugate()))
        zp = complex(z.real, abs(z.imag))
        m = out[z]
        result.append((zp, m))
        result.append((zp.conjugate(), m))
        seen.update({z, partner})
    return result


def _kernel(M: np.ndarray, k: int, what: str) -> np.ndarray:
    """The ``k`` right singular vectors of smallest singular value, checked."""
    _, s, vt = np.linalg.svd(M)
    n = M.shape[0]
    if k == 0:
        return np.zeros((0, n))
    small = s[n - k :]
    top = max(float(s[0]), 1.0)
    if small.max() > np.sqrt(EPS_RANK) * top:
        raise InconsistencyError(f"generalized eigenspace for {what} is too small", float(small.max()))
    return vt[n - k :]


def _representatives(D, eps_re):
    """Cluster representative (from ``spectrum``) for every raw eigenvalue."""
    spec = spectrum(D, eps_re)
    reps = np.array([z for z, _ in spec])

    def rep_of(re: float, im: float) -> complex:
        return complex(reps[np.argmin(np.abs(reps - complex(re, im)))])

    return spec, rep_of


def _schur_subspace(D: np.ndarray, select, k: int, what: str) -> np.ndarray:
    """Orthonormal rows spanning the invariant subspace of the selected eigenvalues.

    Ordered real Schur form puts the selected eigenvalues first; the leading
    Schur vectors span their generalized eigenspaces. Returns None when the
    reordering does not produce ``k`` selected eigenvalues.
    """
    d = D.shape[0]
    if k == 0:
        return np.zeros((0, d))
    try:
        _, Z, sdim = scipy.linalg.schur(D, output="real", sort=lambda re, im: bool(select(re, im)))
    except (ValueError, np.linalg.LinAlgError):
        return None
    if sdim != k:
        return None
    return Z[:, :k].T.copy()


def _power_kernel(D: np.ndarray, z: complex, m: int) -> np.ndarray:
    d = D.shape[0]
    I = np.eye(d)
    if z.imag == 0.0:
        M = np.linalg.matrix_power(D - z.real * I, d)
        return orth(_kernel(M, m, str(z)))
    Q = D @ D - 2.0 * z.real * D + abs(z) ** 2 * I
    M = np.linalg.matrix_power(Q, d)
    return orth(_kernel(M, 2 * m, f"{z} and its conjugate"))


def generalized_eigenspace(D, alpha: complex, eps_re: float = EPS_RE) -> np.ndarray:
    """Real basis (rows, orthonormal) of the generalized eigenspace of ``alpha``.

    For a non-real ``alpha`` the real invariant subspace belonging to the
    pair ``alpha, conj(alpha)`` is returned.
    """
    D = np.asarray(D, dtype=float)
    spec, rep_of = _representatives(D, eps_re)
    alpha = complex(alpha)
    match = [(z, m) for z, m in spec if abs(z - alpha) <= max(eps_re, CLUSTER_TOL * max(1.0, abs(alpha)))]
    if not match:
        dist = min((abs(z - alpha) for z, _ in spec), default=float("inf"))
        raise SpectralError(f"{alpha} is not an eigenvalue (distance {dist:.3g})")
    z, m = match[0]
    k = m if z.imag == 0.0 else 2 * m
    B = _schur_subspace(D, lambda re, im: rep_of(re, im) in (z, z.conjugate()), k, str(z))
    return _power_kernel(D, z, m) if B is None else B


def _sign_subspace(D: np.ndarray, eps_re: float, signs: str) -> np.ndarray:
    """Invariant subspace of the eigenvalues whose real-part sign is in ``signs``."""
    spec, rep_of = _representatives(D, eps_re)

    def sign(z: complex) -> str:
        return "0" if z.real == 0.0 else ("+" if z.real > 0 else "-")

    k = sum(m for z, m in spec if sign(z) in signs)
    B = _schur_subspace(D, lambda re, im: sign(rep_of(re, im)) in signs, k, signs)
    if B is None:
        rows = [generalized_eigenspace(D, z, eps_re) for z, _ in spec if z.imag >= 0.0 and sign(z) in signs]
        B = orth(np.vstack(rows)) if rows else np.zeros((0, D.shape[0]))
    return B


def _real_blocks(D, eps_re):
    """Yield ``(representative eigenvalue, real basis)`` once per real block."""
    for z, _m in spectrum(D, eps_re):
        if z.imag < 0.0:
            continue
        yield z, generalized_eigenspace(D, z, eps_re)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: tuple
    g_plus: Subalgebra
    g_zero: Subalgebra
    g_minus: Subalgebra
    g_plus_zero: Subalgebra
    g_minus_zero: Subalgebra
    hyperbolic: bool
    blocks: tuple = ()

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.g_plus.dim, self.g_zero.dim, self.g_minus.dim

    def to_dict(self) -> dict:
        def ev(z):
            return {"re": z.real, "im": z.imag}

        return {
            "eigenvalues": [{"value": ev(z), "multiplicity": m} for z, m in self.eigenvalues],
            "hyperbolic": self.hyperbolic,
            "dims": {"g_plus": self.g_plus.dim, "g_zero": self.g_zero.dim, "g_minus": self.g_minus.dim},
            "bases": {
                "g_plus": self.g_plus.basis.tolist(),
                "g_zero": self.g_zero.basis.tolist(),
                "g_minus": self.g_minus.basis.tolist(),
                "g_plus_zero": self.g_plus_zero.basis.tolist(),
                "g_minus_zero": self.g_minus_zero.basis.tolist(),
            },
        }


def invariance_residual(D, basis: np.ndarray) -> float:
    D = np.asarray(D, dtype=float)
    if basis.shape[0] == 0:
        return 0.0
    return max(span_distance(D @ v, basis) for v in basis)


def intersection_dims(dec: SpectralDecomposition) -> dict:
    """Dimensions of the pairwise intersections used by the subgroup identities."""
    inter = subspace_intersection
    pz_mz = inter(dec.g_plus_zero.basis, dec.g_minus_zero.basis)
    return {
        "plus_minus": inter(dec.g_plus.basis, dec.g_minus.basis).shape[0],
        "plus_zero__minus": inter(dec.g_plus_zero.basis, dec.g_minus.basis).shape[0],
        "minus_zero__plus": inter(dec.g_minus_zero.basis, dec.g_plus.basis).shape[0],
        "plus_zero__minus_zero": pz_mz.shape[0],
        "plus_zero__minus_zero_is_g_zero": pz_mz.shape[0] == dec.g_zero.dim
        and subspace_sum(pz_mz, dec.g_zero.basis).shape[0] == dec.g_zero.dim,
    }


def decompose(a: LieAlgebra, D, eps_re: float = EPS_RE, check: bool = True) -> SpectralDecomposition:
    D = np.asarray(D, dtype=float)
    ok, res = is_derivation(a, D)
    if not ok:
        raise InconsistencyError("matrix is not a derivation of the algebra", res)

    blocks = tuple(_real_blocks(D, eps_re))

    def sub(signs):
        return Subalgebra(a, _sign_subspace(D, eps_re, signs))

    g0 = sub("0")
    dec = SpectralDecomposition(
        eigenvalues=tuple(spectrum(D, eps_re)),
        g_plus=sub("+"),
        g_zero=g0,
        g_minus=sub("-"),
        g_plus_zero=sub("+0"),
        g_minus_zero=sub("-0"),
        hyperbolic=g0.dim == 0,
        blocks=blocks,
    )
    if check:
        _check(a, D, dec)
    return dec


def _check(a: LieAlgebra, D, dec: SpectralDecomposition):
    if sum(dec.dims) != a.dim:
        raise InconsistencyError(f"subspace dimensions {dec.dims} do not sum to {a.dim}", abs(sum(dec.dims) - a.dim))
    names = ("g_plus", "g_zero", "g_minus", "g_plus_zero", "g_minus_zero")
    for name in names:
        S = getattr(dec, name)
        r = invariance_residual(D, S.basis)
        if r >= EPS_ALG * max(1.0, float(np.abs(D).max(initial=0.0))) * 10:
            raise InconsistencyError(f"{name} is not D-invariant", r)
        r = S.closure_residual()
        if r >= EPS_ALG * 10:
            raise InconsistencyError(f"{name} is not closed under the bracket", r)
    for name in ("g_plus", "g_minus"):
        if not is_nilpotent(getattr(dec, name)):
            raise InconsistencyError(f"{name} is not nilpotent")
    dims = intersection_dims(dec)
    if dims["plus_minus"] or dims["plus_zero__minus"] or dims["minus_zero__plus"] or not dims["plus_zero__minus_zero_is_g_zero"]:
        raise InconsistencyError(f"intersection identities failed: {dims}")


@dataclass(frozen=True)
class GradingReport:
    ok: bool
    residual: float
    pairs: tuple  # (alpha, beta, target or None, residual)


def verify_grading(a: LieAlgebra, D, eps_re: float = EPS_RE, eps: float = EPS_ALG) -> GradingReport:
    """Check ``[g_a, g_b] ⊂ g_{a+b}`` (zero when a+b is not an eigenvalue).

    Complex pairs are tested on their real blocks: the bracket of the blocks
    for ``{a, ā}`` and ``{b, b̄}`` must land in the sum of the blocks for the
    eigenvalues among ``a+b, a+b̄`` and their conjugates.
    """
    D = np.asarray(D, dtype=float)
    blocks = list(_real_blocks(D, eps_re))
    reps = [z for z, _ in blocks]
    # cluster means are off by up to one cluster radius each, so a sum of
    # two of them can miss the target mean by three
    tol = max(eps_re, 3.0 * cluster_tol(D))

    def block_of(w: complex) -> Optional[int]:
        dist = [min(abs(z - w), abs(z.conjugate() - w)) for z in reps]
        if not dist or min(dist) >= tol:
            return None
        return int(np.argmin(dist))

    worst = 0.0
    pairs = []
    for i, (za, Ba) in enumerate(blocks):
        for j, (zb, Bb) in enumerate(blocks):
            if j < i:
                continue
            sums = {za + zb, za + zb.conjugate()}
            targets = sorted({k for k in (block_of(s) for s in sums) if k is not None})
            T = np.vstack([blocks[k][1] for k in targets]) if targets else np.zeros((0, a.dim))
            X = np.repeat(Ba, Bb.shape[0], axis=0)
            Y = np.tile(Bb, (Ba.shape[0], 1))
            brs = bracket_many(a, X, Y)
            r = max((span_distance(b, T) for b in brs), default=0.0)
            worst = max(worst, r)
            pairs.append((za, zb, tuple(reps[k] for k in targets), r))
    return GradingReport(worst < eps, worst, tuple(pairs))


def contraction_fit(D, basis: np.ndarray, t_max: float = 10.0, n: int = 201) -> tuple[float, float]:
    """Fit ``||exp(tD)|_V|| <= c^-1 exp(-mu t)`` on ``[0, t_max]``.

    Returns ``(c, mu)``; ``mu`` is taken just below the slowest decay rate
    and ``c`` is the tightest constant for that rate on the sampled times.
    """
    D = np.asarray(D, dtype=float)
    if basis.shape[0] == 0:
        return 1.0, 1.0
    Dv = basis @ D @ basis.T  # restriction in the orthonormal basis
    rates = -np.linalg.eigvals(Dv).real
    mu = 0.9 * float(rates.min())
    ts = np.linspace(0.0, t_max, n)
    norms = np.array([np.linalg.norm(scipy.linalg.expm(t * Dv), 2) for t in ts])
    c_inv = float(np.max(norms * np.exp(mu * ts)))
    return 1.0 / c_inv, mu
