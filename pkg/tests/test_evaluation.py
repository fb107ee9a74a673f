import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfm.conversion import embed_for_matching, encode_gt, extract_p2p
from hybridfm.errors import LengthMismatch
from hybridfm.evaluation import (
    DEFAULT_THRESHOLDS,
    GeodesicCache,
    edge_graph,
    geodesic_distances,
    is_connected,
    mean_geodesic_error,
    pck_curve,
    pointwise_errors,
    write_pck_csv,
)
from hybridfm.mesh import Mesh
from hybridfm.operators import laplace_basis
from hybridfm.shapes import icosphere, path_triangles

TWO_TRIANGLES = Mesh.from_arrays(
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]],
    [[0, 1, 2], [3, 4, 5]],
)


def test_path_graph_distances():
    m = path_triangles(3)
    field = geodesic_distances(m, 0)
    np.testing.assert_allclose(field.distances[:3], [0, 1, 2])
    assert not field.disconnected


def test_self_distance_zero_and_normalization(sphere):
    raw = geodesic_distances(sphere, 17)
    norm = geodesic_distances(sphere, 17, normalize=True)
    assert raw.distances[17] == 0
    np.testing.assert_allclose(norm.distances, raw.distances / np.sqrt(sphere.total_area))
    assert norm.normalized


def test_icosphere_antipodal_distance(sphere):
    d = geodesic_distances(sphere, 0).distances
    assert abs(d.max() - np.pi) / np.pi < 0.08


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 641))
def test_triangle_inequality_along_edges(sphere, source):
    d = geodesic_distances(sphere, source).distances
    e = sphere.edges
    lengths = np.linalg.norm(sphere.vertices[e[:, 0]] - sphere.vertices[e[:, 1]], axis=1)
    assert np.all(d[e[:, 1]] <= d[e[:, 0]] + lengths + 1e-9)
    assert np.all(d[e[:, 0]] <= d[e[:, 1]] + lengths + 1e-9)
    assert d[source] == 0


def test_disconnected_mesh_warns(caplog):
    assert not is_connected(TWO_TRIANGLES)
    with caplog.at_level(logging.WARNING):
        field = geodesic_distances(TWO_TRIANGLES, 0)
    assert field.disconnected
    assert np.isinf(field.distances[3:]).all()
    assert "disconnected" in caplog.text


def test_edge_graph_symmetric(sphere):
    g = edge_graph(sphere)
    assert abs(g - g.T).max() == 0
    assert g.nnz == 2 * len(sphere.edges)


# ---------------------------------------------------------------- errors, PCK


def test_mean_error_zero_for_exact(sphere):
    gt = np.random.default_rng(0).permutation(sphere.n_vertices)
    assert mean_geodesic_error(gt, gt, sphere) == 0


def test_mean_error_on_path():
    m = path_triangles(6)
    gt = np.array([0, 1, 2, 3])
    pred = np.array([1, 3, 2, 0])  # graph distances 1, 2, 0, 3
    assert mean_geodesic_error(pred, gt, m, normalize=False) == pytest.approx(1.5)
    assert mean_geodesic_error(pred, gt, m) == pytest.approx(100 * 1.5 / np.sqrt(m.total_area))


def test_zero_iff_equal(sphere, rng):
    gt = rng.permutation(sphere.n_vertices)
    pred = gt.copy()
    pred[5] = (pred[5] + 1) % sphere.n_vertices
    assert mean_geodesic_error(pred, gt, sphere) > 0


def test_length_mismatch(sphere):
    with pytest.raises(LengthMismatch):
        mean_geodesic_error(np.arange(3), np.arange(4), sphere)


def test_pck_exact_and_threshold_zero(sphere, rng):
    gt = rng.permutation(sphere.n_vertices)
    curve = pck_curve(gt, gt, sphere)
    assert len(curve) == 101
    assert all(f == 1.0 for _, f in curve)
    pred = gt.copy()
    pred[:100] = rng.integers(0, sphere.n_vertices, 100)
    curve = pck_curve(pred, gt, sphere)
    assert curve[0][1] == pytest.approx(np.mean(pred == gt))
    fracs = [f for _, f in curve]
    assert np.all(np.diff(fracs) >= 0)


def test_pck_hand_count_on_path():
    m = path_triangles(6)
    gt = np.array([0, 1, 2, 3])
    pred = np.array([1, 3, 2, 0])
    scale = np.sqrt(m.total_area)
    curve = pck_curve(pred, gt, m, thresholds=np.array([0, 1, 2, 3, 10]) / scale + 1e-12)
    assert [f for _, f in curve] == [0.25, 0.5, 0.75, 1.0, 1.0]


def test_pck_reaches_one_on_connected_mesh(sphere, rng):
    pred = rng.integers(0, sphere.n_vertices, sphere.n_vertices)
    gt = rng.integers(0, sphere.n_vertices, sphere.n_vertices)
    assert pck_curve(pred, gt, sphere, thresholds=[0.0, 1e9])[-1][1] == 1.0


def test_pck_rejects_descending(sphere):
    with pytest.raises(ValueError):
        pck_curve(np.arange(5), np.arange(5), sphere, thresholds=[0.2, 0.1])


def test_default_thresholds():
    assert len(DEFAULT_THRESHOLDS) == 101
    assert DEFAULT_THRESHOLDS[0] == 0 and DEFAULT_THRESHOLDS[-1] == 0.25
    np.testing.assert_allclose(np.diff(DEFAULT_THRESHOLDS), 0.0025)


def test_pck_csv_format(tmp_path):
    write_pck_csv([(0.0, 0.5), (0.1, 1 / 3)], tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "threshold,fraction"
    assert lines[2] == "0.10000000000000001,0.33333333333333331"


def test_self_pair_round_trip_k200():
    m = icosphere(4)
    basis = laplace_basis(m, 200)
    ident = np.arange(m.n_vertices)
    c = encode_gt(ident, basis, basis, m)
    p2p = extract_p2p(*embed_for_matching(c, basis, basis))
    assert mean_geodesic_error(p2p, ident, m) < 0.5


# ---------------------------------------------------------------------- cache


def test_cache_reuses_rows(sphere):
    cache = GeodesicCache(sphere)
    a = cache.pairwise([0, 0, 5], [1, 2, 3])
    assert len(cache) == 2
    np.testing.assert_allclose(a[0], geodesic_distances(sphere, 0).distances[1])
    pointwise_errors([1, 2], [0, 5], sphere, cache=cache)
    assert len(cache) == 2


def test_cache_persistence(tmp_path, sphere):
    cache = GeodesicCache(sphere)
    cache.rows([3, 9, 3])
    cache.save(tmp_path / "geo.fmb")
    back = GeodesicCache.load(sphere, tmp_path / "geo.fmb")
    assert len(back) == 2
    np.testing.assert_array_equal(back.rows([9]), cache.rows([9]))
    assert len(GeodesicCache.load(sphere, tmp_path / "missing.fmb")) == 0


def test_cache_for_other_mesh_is_ignored(tmp_path, sphere, blob, caplog):
    cache = GeodesicCache(sphere)
    cache.rows([1])
    cache.save(tmp_path / "geo.fmb")
    with caplog.at_level(logging.WARNING):
        other = GeodesicCache.load(blob, tmp_path / "geo.fmb")
    assert len(other) == 0
    assert "another mesh" in caplog.text
