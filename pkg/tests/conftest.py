import numpy as np
import pytest
from hypothesis import strategies as st

from liectrl.algebra import LieAlgebra, ad
from liectrl.system import ControlRange, LinearSystemSpec


def change_basis(a: LieAlgebra, P: np.ndarray) -> LieAlgebra:
    """Structure constants in the basis given by the columns of ``P``."""
    Pinv = np.linalg.inv(P)
    c = np.einsum("km,mij,ia,jb->kab", Pinv, a.structure, P, P)
    return LieAlgebra(a.dim, 0.5 * (c - c.transpose(0, 2, 1)))


def filiform4() -> LieAlgebra:
    # [e1,e2]=e3, [e1,e3]=e4: nilpotent of class 3
    return LieAlgebra.from_brackets(4, {(0, 1): [0, 0, 1, 0], (0, 2): [0, 0, 0, 1]})


def filiform(d: int) -> LieAlgebra:
    """[e1, e_k] = e_{k+1}; nilpotent of class d - 1."""
    br = {}
    for k in range(1, d - 1):
        v = np.zeros(d)
        v[k + 1] = 1.0
        br[(0, k)] = v
    return LieAlgebra.from_brackets(d, br)


def heisenberg5() -> LieAlgebra:
    # [e1,e2]=e5, [e3,e4]=e5
    return LieAlgebra.from_brackets(5, {(0, 1): [0, 0, 0, 0, 1], (2, 3): [0, 0, 0, 0, 1]})


def diagonal_derivation(name: str, w: np.ndarray) -> np.ndarray:
    """Diagonal derivations of the model algebras from free weights ``w``."""
    if name == "abelian":
        return np.diag(w)
    if name == "heisenberg":
        return np.diag([w[0], w[1], w[0] + w[1]])
    if name == "filiform4":
        return np.diag([w[0], w[1], w[0] + w[1], 2 * w[0] + w[1]])
    if name == "heisenberg5":
        # weights a, b, c, a+b-c so both brackets land on weight a+b
        return np.diag([w[0], w[1], w[2], w[0] + w[1] - w[2], w[0] + w[1]])
    raise KeyError(name)


MODELS = {
    "abelian": lambda d: LieAlgebra.abelian(d),
    "heisenberg": lambda d: LieAlgebra.heisenberg(),
    "filiform4": lambda d: filiform4(),
    "heisenberg5": lambda d: heisenberg5(),
}

weights = st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 3))


@st.composite
def algebra_with_derivation(draw, with_inner: bool = True, dims=(1, 2, 3, 4), integer: bool = False):
    """A random nilpotent algebra in a random basis together with a derivation.

    ``integer`` draws integer weights and an orthogonal basis change, the
    roundoff-only regime; otherwise eigenvalues may nearly collide in a
    badly conditioned basis.
    """
    name = draw(st.sampled_from(sorted(MODELS)))
    d = draw(st.sampled_from(dims)) if name == "abelian" else None
    a = MODELS[name](d)
    w_st = st.integers(-3, 3).map(float) if integer else weights
    w = np.array(draw(st.lists(w_st, min_size=3, max_size=a.dim + 3)))
    w = np.resize(w, max(a.dim, 3))
    D = diagonal_derivation(name, w[: a.dim] if name == "abelian" else w)
    if with_inner and name != "abelian":
        x = np.array(draw(st.lists(w_st, min_size=a.dim, max_size=a.dim)))
        D = D + ad(a, x)
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    if integer:
        P = np.linalg.qr(rng.normal(size=(a.dim, a.dim)))[0]
    else:
        P = rng.normal(size=(a.dim, a.dim)) + 2.0 * np.eye(a.dim)
        while abs(np.linalg.det(P)) < 0.2:
            P = P + np.eye(a.dim)
    return change_basis(a, P), np.linalg.inv(P) @ D @ P


def system(a: LieAlgebra, D, controls, radii=1.0, **flags) -> LinearSystemSpec:
    from liectrl.system import GroupFlags

    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    omega = ControlRange.box([radii] * controls.shape[0])
    return LinearSystemSpec(a, np.asarray(D, dtype=float), controls, omega, GroupFlags(**flags))


@pytest.fixture
def heis():
    return LieAlgebra.heisenberg()


@pytest.fixture
def e():
    return np.eye(3)
