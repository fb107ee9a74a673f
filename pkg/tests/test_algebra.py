import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfm.algebra import (
    WeightedSpace,
    adjoint,
    hs_norm,
    hs_norm_trace,
    kron_matrix,
    kron_vec_apply,
    projector,
    unvec,
    vec,
    weighted_space,
)
from hybridfm.errors import DimensionMismatch, NotSPD
from tests.conftest import random_spd

seeds = st.integers(0, 2**32 - 1)


# ------------------------------------------------------------ weighted space


def test_identity_space():
    s = WeightedSpace.from_matrix(np.eye(4))
    np.testing.assert_array_equal(s.sqrt_mass, np.eye(4))
    np.testing.assert_array_equal(s.inv_sqrt_mass, np.eye(4))


def test_diagonal_root():
    s = WeightedSpace.from_matrix(np.diag([4.0, 9.0]))
    np.testing.assert_allclose(s.sqrt_mass, np.diag([2.0, 3.0]), atol=1e-15)
    np.testing.assert_allclose(s.inv_sqrt_mass, np.diag([0.5, 1 / 3]), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_root_reproduces_random_spd(seed):
    m = random_spd(np.random.default_rng(seed), 10, 0.1, 10.0)
    s = WeightedSpace.from_matrix(m)
    np.testing.assert_allclose(s.sqrt_mass @ s.sqrt_mass, m, rtol=0, atol=1e-10 * np.abs(m).max())
    np.testing.assert_allclose(s.sqrt_mass @ s.inv_sqrt_mass, np.eye(10), atol=1e-10)
    np.testing.assert_allclose(s.sqrt_mass, s.sqrt_mass.T, atol=1e-14)
    assert np.linalg.eigvalsh(s.sqrt_mass).min() > 0


@pytest.mark.parametrize("m", [np.diag([1.0, 0.0]), np.diag([1.0, -1.0]), np.diag([1.0, 1e-14])])
def test_not_spd(m):
    with pytest.raises(NotSPD):
        WeightedSpace.from_matrix(m)


def test_non_square_mass():
    with pytest.raises(DimensionMismatch):
        WeightedSpace.from_matrix(np.ones((2, 3)))


def test_weighted_space_of_elastic_basis(blob_elastic):
    s = weighted_space(blob_elastic)
    np.testing.assert_allclose(s.reduced_mass, blob_elastic.reduced_mass, rtol=1e-12)


# ------------------------------------------------------------------ projector


def test_projecting_the_basis_gives_identity(blob, blob_lb, blob_elastic):
    for basis in (blob_lb, blob_elastic):
        np.testing.assert_allclose(projector(basis, blob)(basis.functions), np.eye(basis.k), atol=1e-10)


def test_constant_projects_onto_first_mode(sphere, sphere_lb):
    coeffs = projector(sphere_lb, sphere)(np.full(sphere.n_vertices, 2.5))
    assert coeffs[0] == pytest.approx(np.sqrt(sphere.total_area) * 2.5, rel=1e-6)
    assert np.abs(coeffs[1:]).max() < 1e-6


def test_projection_is_idempotent(blob, blob_elastic, rng):
    proj = projector(blob_elastic, blob)
    f = rng.standard_normal(blob.n_vertices)
    rec = blob_elastic.functions @ proj(f)
    mass = blob.vertex_mass
    assert np.sum(mass * (f - rec) ** 2) <= np.sum(mass * f**2)
    np.testing.assert_allclose(proj(rec), proj(f), atol=1e-9)


def test_projector_dimension_errors(blob, sphere, blob_lb):
    with pytest.raises(DimensionMismatch):
        projector(blob_lb, sphere)
    with pytest.raises(DimensionMismatch):
        projector(blob_lb, blob)(np.ones(3))
    with pytest.raises(DimensionMismatch):
        projector(blob_lb, np.ones((blob.n_vertices, 2)))


# -------------------------------------------------------------------- HS norm


def test_hs_norm_identity_weights_is_frobenius(rng):
    for _ in range(100):
        k1, k2 = rng.integers(1, 12, 2)
        a = rng.standard_normal((k2, k1))
        got = hs_norm(a, WeightedSpace.identity(k1), WeightedSpace.identity(k2))
        assert got == pytest.approx(np.linalg.norm(a), rel=1e-12)


def test_hs_norm_of_zero():
    s = WeightedSpace.from_matrix(np.diag([2.0, 3.0, 5.0]))
    assert hs_norm(np.zeros((3, 3)), s, s) == 0.0


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_hs_norm_trace_and_frobenius_forms_agree(seed):
    rng = np.random.default_rng(seed)
    s1 = WeightedSpace.from_matrix(random_spd(rng, 7))
    s2 = WeightedSpace.from_matrix(random_spd(rng, 5))
    a = rng.standard_normal((5, 7))
    n1, n2 = hs_norm(a, s1, s2), hs_norm_trace(a, s1, s2)
    assert abs(n1 - n2) <= 1e-10 * n1
    assert n1 > 1e-14


def test_hs_norm_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        hs_norm(np.ones((2, 3)), WeightedSpace.identity(2), WeightedSpace.identity(3))


# -------------------------------------------------------------------- adjoint


def test_adjoint_identity_weights_is_transpose(rng):
    c = rng.standard_normal((4, 6))
    np.testing.assert_array_equal(adjoint(c, WeightedSpace.identity(6), WeightedSpace.identity(4)), c.T)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_adjoint_inner_product_and_involution(seed):
    rng = np.random.default_rng(seed)
    s1 = WeightedSpace.from_matrix(random_spd(rng, 6))
    s2 = WeightedSpace.from_matrix(random_spd(rng, 6))
    c = rng.standard_normal((6, 6))
    x, y = rng.standard_normal(6), rng.standard_normal(6)
    cs = adjoint(c, s1, s2)
    lhs = (c @ x) @ s2.reduced_mass @ y
    rhs = x @ s1.reduced_mass @ (cs @ y)
    assert abs(lhs - rhs) < 1e-10 * (1 + abs(lhs))
    np.testing.assert_allclose(adjoint(cs, s2, s1), c, rtol=0, atol=1e-12)


def test_adjoint_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        adjoint(np.ones((3, 3)), WeightedSpace.identity(2), WeightedSpace.identity(3))


# ------------------------------------------------------------------ kronecker


def test_vec_is_column_stacked():
    a = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(vec(a), [1, 3, 2, 4])
    np.testing.assert_array_equal(unvec(vec(a), (2, 2)), a)


def test_kron_identity_leaves_vec_unchanged(rng):
    f = rng.standard_normal((3, 4))
    np.testing.assert_array_equal(kron_vec_apply(np.eye(3), f, np.eye(4)), vec(f))


def test_kron_all_ones():
    ones = np.ones((2, 2))
    np.testing.assert_array_equal(kron_vec_apply(ones, ones, ones), np.full(4, 4.0))
    np.testing.assert_array_equal(kron_matrix(ones, ones) @ vec(ones), np.full(4, 4.0))


def test_kron_two_paths_random(rng):
    for _ in range(100):
        e, f, g = rng.standard_normal((5, 4)), rng.standard_normal((4, 3)), rng.standard_normal((3, 6))
        np.testing.assert_allclose(kron_vec_apply(e, f, g), kron_matrix(e, g) @ vec(f), atol=1e-12)


def test_kron_shape_errors():
    with pytest.raises(DimensionMismatch):
        kron_vec_apply(np.ones((2, 3)), np.ones((2, 2)), np.ones((2, 2)))
