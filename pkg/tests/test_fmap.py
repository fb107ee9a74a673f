import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfm.algebra import WeightedSpace, hs_norm
from hybridfm.conversion import space_of
from hybridfm.errors import DimensionError, DimensionMismatch, SingularSystem
from hybridfm.fmap import (
    HS_MAX_K,
    K_ELASTIC,
    K_LB,
    LAMBDA_ELASTIC,
    LAMBDA_LB,
    HybridMap,
    annealing_and_scales,
    energy_hs,
    energy_standard,
    loss_bijectivity,
    loss_couple_hs,
    loss_gt_hs,
    loss_orthogonality_hs,
    pulled_back_map,
    solve_hs,
    solve_hybrid,
    solve_standard,
)
from hybridfm.operators import elastic_basis, laplace_basis
from tests.conftest import bumpy_sphere, random_spd
from tests.oracles import (
    fd_gradient,
    hs_problem,
    joint_block_oracle,
    nesterov,
    random_instance,
    standard_lstsq,
    sym_sqrt,
)

seeds = st.integers(0, 2**32 - 1)


def spaces(m1, m2):
    return WeightedSpace.from_matrix(m1), WeightedSpace.from_matrix(m2)


# ------------------------------------------------------------ solve_standard


def test_standard_identity_descriptors():
    ev = np.arange(6.0)
    np.testing.assert_allclose(solve_standard(np.eye(6), np.eye(6), ev, ev, lam=0), np.eye(6), atol=1e-12)


def test_standard_large_lambda_kills_map(rng):
    d1, d2 = rng.standard_normal((6, 20)), rng.standard_normal((6, 20))
    ev1, ev2 = np.arange(6.0), np.arange(6.0) + 0.5
    assert np.abs(solve_standard(d1, d2, ev1, ev2, lam=1e12)).max() < 1e-6


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_standard_matches_vectorized_least_squares(seed):
    d1, d2, ev1, ev2, _, _ = random_instance(np.random.default_rng(seed), 8, d=30)
    c = solve_standard(d1, d2, ev1, ev2, lam=0.1)
    np.testing.assert_allclose(c, standard_lstsq(d1, d2, ev1, ev2, 0.1), atol=1e-9)


def test_standard_rectangular(rng):
    d1, d2, ev1, ev2, _, _ = random_instance(rng, 7, 5, d=30)
    c = solve_standard(d1, d2, ev1, ev2, lam=0.3)
    assert c.shape == (5, 7)
    np.testing.assert_allclose(c, standard_lstsq(d1, d2, ev1, ev2, 0.3), atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(1e-3, 1e3))
def test_standard_scale_covariance(seed, s):
    d1, d2, ev1, ev2, _, _ = random_instance(np.random.default_rng(seed), 8, d=20)
    a = solve_standard(d1, d2, ev1, ev2, lam=0)
    b = solve_standard(s * d1, s * d2, ev1, ev2, lam=0)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_standard_singular():
    with pytest.raises(SingularSystem):
        solve_standard(np.zeros((4, 5)), np.ones((4, 5)), np.arange(4.0), np.arange(4.0), lam=0)


def test_standard_dimension_errors(rng):
    with pytest.raises(DimensionMismatch):
        solve_standard(np.ones((3, 4)), np.ones((3, 5)), np.ones(3), np.ones(3))
    with pytest.raises(DimensionMismatch):
        solve_standard(np.ones((3, 4)), np.ones((3, 4)), np.ones(2), np.ones(3))


@pytest.mark.parametrize("seed", range(5))
def test_standard_gradient_vanishes(seed):
    d1, d2, ev1, ev2, m1, m2 = random_instance(np.random.default_rng(seed), 8, orthonormal=True)
    c = solve_standard(d1, d2, ev1, ev2, lam=0.2)
    f = lambda x: energy_standard(x, d1, d2, ev1, ev2, 0.2)  # noqa: E731
    assert np.abs(fd_gradient(f, c)).max() < 1e-5 * (1 + f(c))
    assert f(c) == pytest.approx(hs_problem(d1, d2, ev1, ev2, m1, m2, 0.2)[0](c), rel=1e-12)


# ------------------------------------------------------------------- solve_hs


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_hs_with_identity_weights_reduces_to_standard(seed):
    d1, d2, ev1, ev2, _, _ = random_instance(np.random.default_rng(seed), 8)
    eye = WeightedSpace.identity(8)
    a = solve_hs(d1, d2, ev1, ev2, eye, eye, lam=0.1)
    b = solve_standard(d1, d2, ev1, ev2, lam=0.1)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-8)


def test_hs_identity_descriptors_any_mass(rng):
    s1, s2 = spaces(random_spd(rng, 6), random_spd(rng, 6))
    ev = np.arange(6.0)
    c = solve_hs(np.eye(6), np.eye(6), ev, ev, s1, s2, lam=0)
    np.testing.assert_allclose(c, np.eye(6), atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_hs_matches_descent_oracle_and_beats_perturbations(seed):
    rng = np.random.default_rng(seed)
    d1, d2, ev1, ev2, m1, m2 = random_instance(rng, 8)
    c = solve_hs(d1, d2, ev1, ev2, *spaces(m1, m2), lam=0.1)
    f, g = hs_problem(d1, d2, ev1, ev2, m1, m2, 0.1)
    e = f(c)
    assert abs(f(nesterov(f, g, np.zeros_like(c))) - e) < 1e-8
    for _ in range(1000):
        assert f(c + 1e-3 * rng.standard_normal(c.shape)) >= e
    assert np.abs(fd_gradient(f, c)).max() < 1e-5 * (1 + e)


def test_energy_hs_matches_oracle(rng):
    d1, d2, ev1, ev2, m1, m2 = random_instance(rng, 6, 5)
    c = rng.standard_normal((5, 6))
    f, _ = hs_problem(d1, d2, ev1, ev2, m1, m2, 0.7)
    assert energy_hs(c, d1, d2, ev1, ev2, *spaces(m1, m2), 0.7) == pytest.approx(f(c), rel=1e-12)


def test_hs_rectangular_is_stationary(rng):
    d1, d2, ev1, ev2, m1, m2 = random_instance(rng, 7, 5)
    c = solve_hs(d1, d2, ev1, ev2, *spaces(m1, m2), lam=0.05)
    f, g = hs_problem(d1, d2, ev1, ev2, m1, m2, 0.05)
    assert c.shape == (5, 7)
    assert np.abs(g(c)).max() < 1e-9 * (1 + f(c))


def test_hs_size_guard():
    k = HS_MAX_K + 1
    eye = WeightedSpace.identity(k)
    with pytest.raises(DimensionError):
        solve_hs(np.eye(k), np.eye(k), np.ones(k), np.ones(k), eye, eye)


def test_hs_singular():
    eye = WeightedSpace.identity(3)
    with pytest.raises(SingularSystem):
        solve_hs(np.zeros((3, 4)), np.ones((3, 4)), np.ones(3), np.ones(3), eye, eye, lam=0)


def test_hs_space_mismatch(rng):
    eye3, eye4 = WeightedSpace.identity(3), WeightedSpace.identity(4)
    with pytest.raises(DimensionMismatch):
        solve_hs(np.ones((3, 5)), np.ones((3, 5)), np.ones(3), np.ones(3), eye3, eye4)


# ---------------------------------------------------------------- solve_hybrid


def test_hybrid_identity_blocks(rng):
    s = WeightedSpace.from_matrix(random_spd(rng, 4))
    h = solve_hybrid(
        (np.eye(5), np.eye(5), np.arange(5.0), np.arange(5.0)),
        (np.eye(4), np.eye(4), np.arange(4.0), np.arange(4.0), s, s),
        lambda_lb=0,
        lambda_elastic=0,
    )
    np.testing.assert_allclose(h.lb, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(h.elastic, np.eye(4), atol=1e-10)
    assert h.shape == (9, 9)
    dense = h.dense()
    assert np.all(dense[:5, 5:] == 0) and np.all(dense[5:, :5] == 0)


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from([(10, 6), (8, 8), (12, 4)]))
def test_hybrid_equals_joint_block_constrained_solve(seed, split):
    rng = np.random.default_rng(seed)
    k_lb, k_el = split
    lb = random_instance(rng, k_lb, d=25, orthonormal=True)[:4]
    el = random_instance(rng, k_el, d=25)
    lam = 0.05
    h = solve_hybrid(lb, (*el[:4], *spaces(*el[4:])), lambda_lb=lam, lambda_elastic=lam)
    c_lb, c_el, _ = joint_block_oracle(lb, el, lam)
    np.testing.assert_allclose(h.lb, c_lb, rtol=0, atol=1e-8)
    np.testing.assert_allclose(h.elastic, c_el, rtol=0, atol=1e-8)


def test_hybrid_without_elastic_block(rng):
    lb = random_instance(rng, 5, orthonormal=True)[:4]
    h = solve_hybrid(lb, None)
    assert h.elastic.shape == (0, 0) and h.shape == (5, 5)
    np.testing.assert_array_equal(h.dense(), h.lb)


def test_default_partition_is_accepted(rng):
    assert (K_LB, K_ELASTIC) == (140, 60)
    assert (LAMBDA_LB, LAMBDA_ELASTIC) == (1e-3, 5e-4)
    d = 200
    lb = random_instance(rng, K_LB, d=d, orthonormal=True)[:4]
    el = random_instance(rng, K_ELASTIC, d=d)
    h = solve_hybrid(lb, (*el[:4], *spaces(*el[4:])))
    assert h.lb.shape == (140, 140) and h.elastic.shape == (60, 60)
    assert h.shape == (200, 200)
    assert np.all(np.isfinite(h.dense()))


# --------------------------------------------------------------------- losses


def test_bijectivity_examples(rng):
    assert loss_bijectivity(np.eye(5), np.eye(5)) == 0.0
    a = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    assert loss_bijectivity(a, np.linalg.inv(a)) < 1e-12
    b = rng.standard_normal((6, 6))
    ab, ba = a @ b, b @ a
    expanded = np.trace(ab.T @ ab) - 2 * np.trace(ab) + np.trace(ba.T @ ba) - 2 * np.trace(ba) + 12
    assert loss_bijectivity(a, b) == pytest.approx(expanded, rel=1e-10)
    with pytest.raises(DimensionMismatch):
        loss_bijectivity(np.ones((2, 3)), np.ones((2, 3)))


def m_orthogonal_map(rng, m1, m2):
    q, _ = np.linalg.qr(rng.standard_normal((len(m1), len(m1))))
    return np.linalg.inv(sym_sqrt(m2)) @ q @ sym_sqrt(m1)


def test_orthogonality_examples(rng):
    m1, m2 = random_spd(rng, 6), random_spd(rng, 6)
    s1, s2 = spaces(m1, m2)
    c12, c21 = m_orthogonal_map(rng, m1, m2), m_orthogonal_map(rng, m2, m1)
    assert loss_orthogonality_hs(c12, c21, s1, s2) < 1e-10
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    eye = WeightedSpace.identity(4)
    assert loss_orthogonality_hs(q, q.T, eye, eye) < 1e-28


def test_orthogonality_trace_expansion(rng):
    m1, m2 = random_spd(rng, 5), random_spd(rng, 5)
    s1, s2 = spaces(m1, m2)
    a, b = rng.standard_normal((5, 5)), rng.standard_normal((5, 5))

    def expanded(c, src, dst):
        p = np.linalg.inv(src) @ c.T @ dst @ c
        return np.trace(p.T @ p) - 2 * np.trace(p) + len(p)

    want = expanded(a, m1, m2) + expanded(b, m2, m1)
    assert loss_orthogonality_hs(a, b, s1, s2) == pytest.approx(want, rel=1e-10)


def test_gt_loss(rng):
    m1, m2 = random_spd(rng, 5), random_spd(rng, 4)
    s1, s2 = spaces(m1, m2)
    c, g = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
    assert loss_gt_hs(c, c, s1, s2) == 0.0
    assert loss_gt_hs(c, g, s1, s2) == pytest.approx(hs_norm(c - g, s1, s2) ** 2, rel=1e-12)
    diff = c - g
    assert loss_gt_hs(c, g, s1, s2) == pytest.approx(np.trace(np.linalg.inv(m1) @ diff.T @ m2 @ diff), rel=1e-10)
    eye5, eye4 = WeightedSpace.identity(5), WeightedSpace.identity(4)
    assert loss_gt_hs(c, g, eye5, eye4) == pytest.approx(np.sum(diff**2), rel=1e-12)


@pytest.fixture(scope="module")
def small_pair():
    m1, m2 = bumpy_sphere(1, seed=0), bumpy_sphere(1, seed=1)
    assert m1.n_vertices <= 50
    return m1, m2, elastic_basis(m1, 8), elastic_basis(m2, 8), laplace_basis(m1, 10), laplace_basis(m2, 10)


def materialized_pullback(pi, b_src, b_dst, mesh_dst):
    pi_mat = np.zeros((len(pi), b_src.n_vertices))
    pi_mat[np.arange(len(pi)), pi] = 1
    mass = np.diag(mesh_dst.vertex_mass)
    dagger = np.linalg.inv(b_dst.functions.T @ mass @ b_dst.functions) @ b_dst.functions.T @ mass
    return dagger @ pi_mat @ b_src.functions


@pytest.mark.parametrize("which", ["elastic", "lb"])
def test_couple_loss(small_pair, which, rng):
    m1, m2, e1, e2, l1, l2 = small_pair
    b1, b2 = (e1, e2) if which == "elastic" else (l1, l2)
    pi21 = rng.integers(0, m1.n_vertices, m2.n_vertices)
    pi12 = rng.integers(0, m2.n_vertices, m1.n_vertices)
    exact12 = pulled_back_map(pi21, b1, b2, m2)
    exact21 = pulled_back_map(pi12, b2, b1, m1)
    assert loss_couple_hs(exact12, exact21, pi21, pi12, b1, b2, m1, m2) < 1e-8
    np.testing.assert_allclose(exact12, materialized_pullback(pi21, b1, b2, m2), atol=1e-10)

    c12, c21 = rng.standard_normal((b2.k, b1.k)), rng.standard_normal((b1.k, b2.k))
    mk1, mk2 = b1.reduced_mass, b2.reduced_mass
    r12 = c12 - materialized_pullback(pi21, b1, b2, m2)
    r21 = c21 - materialized_pullback(pi12, b2, b1, m1)
    want = np.trace(np.linalg.inv(mk1) @ r12.T @ mk2 @ r12) + np.trace(np.linalg.inv(mk2) @ r21.T @ mk1 @ r21)
    got = loss_couple_hs(c12, c21, pi21, pi12, b1, b2, m1, m2)
    assert got == pytest.approx(want, rel=1e-10)


def test_couple_loss_identity_on_same_shape(small_pair):
    m1, _, _, _, l1, _ = small_pair
    ident = np.arange(m1.n_vertices)
    k = l1.k
    assert loss_couple_hs(np.eye(k), np.eye(k), ident, ident, l1, l1, m1, m1, space_of(l1), space_of(l1)) < 1e-20


def test_pulled_back_map_length_check(small_pair):
    m1, m2, e1, e2, _, _ = small_pair
    with pytest.raises(DimensionMismatch):
        pulled_back_map(np.zeros(3, dtype=int), e1, e2, m2)


# ------------------------------------------------------------------ annealing


def test_annealing_schedule():
    assert annealing_and_scales(0, 200, 140, 60)[0] == 0
    assert annealing_and_scales(1000, 200, 140, 60)[0] == 0.5
    assert annealing_and_scales(2000, 200, 140, 60)[0] == 1
    assert annealing_and_scales(10**6, 200, 140, 60)[0] == 1
    _, alpha, beta = annealing_and_scales(0, 200, 140, 60)
    assert alpha == pytest.approx(1.0204, abs=1e-4)
    assert beta == pytest.approx(5.5556, abs=1e-4)
    assert annealing_and_scales(5, 10, 5, 5, ramp_steps=10)[0] == 0.5


@pytest.mark.parametrize("args", [(0, 200, 150, 60), (0, 60, 0, 60), (0, 200, 140, 60, 0)])
def test_annealing_rejects_bad_partitions(args):
    with pytest.raises(ValueError):
        annealing_and_scales(*args)


def test_hybrid_map_dense_layout(rng):
    h = HybridMap(rng.standard_normal((3, 4)), rng.standard_normal((2, 5)))
    d = h.dense()
    assert d.shape == (5, 9)
    np.testing.assert_array_equal(d[:3, :4], h.lb)
    np.testing.assert_array_equal(d[3:, 4:], h.elastic)
