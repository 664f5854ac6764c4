import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liectrl.algebra import (
    AlgebraError,
    LieAlgebra,
    ad,
    bracket,
    bracket_many,
    d_invariant_closure,
    derived_series,
    is_derivation,
    is_inner,
    is_nilpotent,
    is_solvable,
    jacobi_residual,
    leibniz_residual,
    lower_central_series,
    nilpotency_class,
    subalgebra_closure,
    subspace_intersection,
    subspace_sum,
    validate_algebra,
)

from conftest import algebra_with_derivation, filiform, filiform4, heisenberg5


def test_heisenberg_bracket(heis, e):
    np.testing.assert_array_equal(bracket(heis, e[0], e[1]), e[2])
    np.testing.assert_array_equal(bracket(heis, e[1], e[0]), -e[2])


def test_bracket_with_itself_vanishes(heis):
    x = np.array([0.3, -1.2, 4.0])
    np.testing.assert_array_equal(bracket(heis, x, x), 0.0)


def test_abelian_bracket():
    a = LieAlgebra.abelian(2)
    np.testing.assert_array_equal(bracket(a, [1, 0], [0, 1]), [0, 0])


def test_bracket_dimension_mismatch(heis):
    with pytest.raises(AlgebraError):
        bracket(heis, [1, 0], [0, 1, 0])


def test_bracket_many_matches_single(heis):
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(50, 3)), rng.normal(size=(50, 3))
    ref = np.array([bracket(heis, x, y) for x, y in zip(X, Y)])
    np.testing.assert_allclose(bracket_many(heis, X, Y), ref, atol=1e-14)
    a = filiform4()
    X, Y = rng.normal(size=(20, 4)), rng.normal(size=(20, 4))
    ref = np.array([bracket(a, x, y) for x, y in zip(X, Y)])
    np.testing.assert_allclose(bracket_many(a, X, Y), ref, atol=1e-14)


def test_validate_heisenberg(heis):
    rep = validate_algebra(heis)
    assert rep.ok
    assert rep.jacobi_residual == 0.0
    assert rep.antisymmetry_residual == 0.0


def test_validate_rejects_one_sided_tensor():
    c = np.zeros((3, 3, 3))
    c[2, 0, 1] = 1.0
    rep = validate_algebra(LieAlgebra(3, c))
    assert not rep.ok
    assert rep.antisymmetry_residual == pytest.approx(1.0)


def test_validate_rejects_jacobi_violation():
    # [e1,e2]=e2, [e2,e3]=e1, [e1,e3]=0 fails Jacobi
    a = LieAlgebra.from_brackets(3, {(0, 1): [0, 1, 0], (1, 2): [1, 0, 0]})
    rep = validate_algebra(a)
    assert rep.antisymmetry_residual == 0.0
    assert rep.jacobi_residual > 0.5
    assert not rep.ok


@pytest.mark.parametrize("d", [1, 2, 5])
def test_validate_abelian(d):
    assert validate_algebra(LieAlgebra.abelian(d)).ok


def test_so3_passes_jacobi():
    a = LieAlgebra.from_brackets(3, {(0, 1): [0, 0, 1], (1, 2): [1, 0, 0], (0, 2): [0, -1, 0]})
    assert jacobi_residual(a) < 1e-15


def test_structure_shape_checked():
    with pytest.raises(AlgebraError):
        LieAlgebra(3, np.zeros((3, 3)))


@pytest.mark.parametrize(
    "diag, expected",
    [((1, -1, 0), True), ((1, 1, 2), True), ((1, 1, 1), False)],
)
def test_heisenberg_diagonal_derivations(heis, diag, expected):
    ok, res = is_derivation(heis, np.diag(diag))
    assert ok is expected
    if expected:
        assert res == 0.0
    else:
        assert res == pytest.approx(1.0)


def test_ad_matrix(heis, e):
    A = ad(heis, e[0])
    np.testing.assert_array_equal(A @ e[1], e[2])
    np.testing.assert_array_equal(A @ e[0], 0)
    np.testing.assert_array_equal(A @ e[2], 0)


def test_is_inner_finds_witness(heis, e):
    x = is_inner(heis, ad(heis, e[0]))
    assert x is not None
    np.testing.assert_allclose(ad(heis, x), ad(heis, e[0]), atol=1e-12)
    assert x[0] == pytest.approx(1.0) and x[1] == pytest.approx(0.0, abs=1e-12)


def test_diagonal_derivation_is_outer(heis):
    assert is_inner(heis, np.diag([1.0, -1.0, 0.0])) is None


def test_zero_is_inner_on_abelian():
    x = is_inner(LieAlgebra.abelian(2), np.zeros((2, 2)))
    assert x is not None


def test_subalgebra_closure(heis, e):
    assert subalgebra_closure(heis, [e[0], e[1]]).dim == 3
    s = subalgebra_closure(heis, [e[0]])
    assert s.dim == 1 and s.contains(e[0]) and not s.contains(e[1])
    assert subalgebra_closure(LieAlgebra.abelian(2), [[1, 0]]).dim == 1


def test_d_invariant_closure(heis):
    assert d_invariant_closure(heis, np.diag([1.0, -1.0, 0.0]), [[1, 1, 0]]).dim == 3
    ab = LieAlgebra.abelian(2)
    assert d_invariant_closure(ab, np.diag([1.0, -1.0]), [[1, 1]]).dim == 2
    assert d_invariant_closure(ab, np.diag([1.0, -1.0]), [[1, 0]]).dim == 1


def test_d_invariant_closure_with_zero_derivation(heis, e):
    s1 = d_invariant_closure(heis, np.zeros((3, 3)), [e[0]])
    s2 = subalgebra_closure(heis, [e[0]])
    assert s1.dim == s2.dim == 1


def test_subalgebra_closure_residual(heis, e):
    assert subalgebra_closure(heis, [e[0], e[1]]).closure_residual() < 1e-12


def test_series(heis):
    assert lower_central_series(heis) == [3, 1, 0]
    assert derived_series(heis) == [3, 1, 0]
    assert is_nilpotent(heis) and nilpotency_class(heis) == 2


def test_abelian_series():
    a = LieAlgebra.abelian(3)
    assert is_nilpotent(a) and nilpotency_class(a) == 1


def test_solvable_not_nilpotent():
    a = LieAlgebra.from_brackets(2, {(0, 1): [0, 1]})
    assert not is_nilpotent(a)
    assert is_solvable(a)
    assert nilpotency_class(a) is None


def test_so3_is_not_solvable():
    a = LieAlgebra.from_brackets(3, {(0, 1): [0, 0, 1], (1, 2): [1, 0, 0], (0, 2): [0, -1, 0]})
    assert not is_solvable(a)


def test_nilpotency_classes():
    assert nilpotency_class(filiform4()) == 3
    assert nilpotency_class(filiform(6)) == 5
    assert nilpotency_class(heisenberg5()) == 2


def test_subspace_sum_and_intersection():
    U = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    V = np.array([[0, 1.0, 0], [0, 0, 1.0]])
    assert subspace_sum(U, V).shape[0] == 3
    I = subspace_intersection(U, V)
    assert I.shape[0] == 1
    np.testing.assert_allclose(np.abs(I[0]), [0, 1, 0], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(algebra_with_derivation(), st.lists(st.floats(-5, 5, allow_nan=False), min_size=5, max_size=5))
def test_ad_is_always_a_derivation(ad_pair, coords):
    a, _ = ad_pair
    x = np.array(coords[: a.dim])
    ok, res = is_derivation(a, ad(a, x))
    assert ok
    assert res < 1e-12 * max(1.0, np.abs(a.structure).max() ** 2 * np.abs(x).max())


@settings(max_examples=200, deadline=None)
@given(algebra_with_derivation())
def test_generated_derivations_pass_leibniz(pair):
    a, D = pair
    assert validate_algebra(a).ok
    assert leibniz_residual(a, D) < 1e-9
