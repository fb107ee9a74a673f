"""Geodesic distances and correspondence quality metrics."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import LengthMismatch
from .fmb import read_fmb, write_fmb
from .mesh import Mesh

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = np.linspace(0.0, 0.25, 101)


@dataclass(frozen=True, eq=False)
class GeodesicField:
    source_vertex: int
    distances: np.ndarray
    normalized: bool = False

    @property
    def disconnected(self) -> bool:
        return bool(np.any(np.isinf(self.distances)))


def edge_graph(mesh: Mesh) -> sparse.csr_matrix:
    e = mesh.edges
    w = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    n = mesh.n_vertices
    g = sparse.coo_matrix((w, (e[:, 0], e[:, 1])), shape=(n, n))
    return (g + g.T).tocsr()


def is_connected(mesh: Mesh) -> bool:
    return connected_components(edge_graph(mesh), directed=False)[0] == 1


def geodesic_distances(mesh: Mesh, source: int, normalize=False) -> GeodesicField:
    """Shortest edge-path distances from ``source``; unreachable vertices get ``inf``."""
    d = dijkstra(edge_graph(mesh), directed=False, indices=int(source))
    if normalize:
        d = d / np.sqrt(mesh.total_area)
    field = GeodesicField(int(source), d, normalize)
    if field.disconnected:
        logger.warning("mesh is disconnected; %d vertices unreachable", np.isinf(d).sum())
    return field


class GeodesicCache:
    """Lazily computed distance rows keyed by source vertex.

    Rows can be persisted with :meth:`save` and restored with :meth:`load`;
    the file records the mesh content hash and is ignored for other meshes.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self._graph = edge_graph(mesh)
        self._rows = {}

    def __len__(self):
        return len(self._rows)

    def save(self, path) -> None:
        sources = np.array(sorted(self._rows), dtype=np.int64)
        dist = np.zeros((len(sources), self.mesh.n_vertices))
        for i, s in enumerate(sources.tolist()):
            dist[i] = self._rows[s]
        digest = np.frombuffer(bytes.fromhex(self.mesh.content_hash()), dtype=np.uint8)
        write_fmb(path, {"mesh_hash": digest, "sources": sources, "distances": dist})

    @classmethod
    def load(cls, mesh: Mesh, path) -> "GeodesicCache":
        """Cache for ``mesh`` pre-filled from ``path`` when it exists and matches."""
        cache = cls(mesh)
        if not os.path.exists(path):
            return cache
        data = read_fmb(path)
        digest = bytes(data["mesh_hash"].astype(np.uint8).tolist()).hex()
        if digest != mesh.content_hash():
            logger.warning("geodesic cache %s belongs to another mesh; ignoring it", path)
            return cache
        for s, row in zip(data["sources"].tolist(), data["distances"]):
            cache._rows[int(s)] = row
        return cache

    def rows(self, sources) -> np.ndarray:
        sources = np.asarray(sources, dtype=np.int64)
        missing = np.setdiff1d(np.unique(sources), np.fromiter(self._rows, np.int64, len(self._rows)))
        if missing.size:
            dist = dijkstra(self._graph, directed=False, indices=missing)
            for s, row in zip(missing, np.atleast_2d(dist)):
                self._rows[int(s)] = row
        return np.stack([self._rows[int(s)] for s in sources]) if sources.size else np.zeros((0,))

    def pairwise(self, a, b) -> np.ndarray:
        """Distances ``d(a[i], b[i])``."""
        a, b = np.asarray(a), np.asarray(b)
        uniq, inv = np.unique(a, return_inverse=True)
        table = self.rows(uniq)
        return table[inv, b]


def pointwise_errors(pred, gt, mesh1: Mesh, normalize=True, cache=None) -> np.ndarray:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise LengthMismatch(f"prediction length {len(pred)} != ground truth length {len(gt)}")
    cache = cache or GeodesicCache(mesh1)
    err = cache.pairwise(gt, pred)
    if normalize:
        err = err / np.sqrt(mesh1.total_area)
    return err


def mean_geodesic_error(pred, gt, mesh1: Mesh, normalize=True, cache=None) -> float:
    """Mean geodesic distance on shape 1 between predicted and true images.

    With ``normalize`` distances are divided by the square root of the
    surface area and the mean is reported times 100.
    """
    err = pointwise_errors(pred, gt, mesh1, normalize, cache)
    mean = float(np.mean(err))
    return 100.0 * mean if normalize else mean


def pck_curve(pred, gt, mesh1: Mesh, thresholds=DEFAULT_THRESHOLDS, cache=None):
    """Fraction of vertices with normalized geodesic error at most each threshold."""
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be ascending")
    err = np.sort(pointwise_errors(pred, gt, mesh1, True, cache))
    frac = np.searchsorted(err, thresholds, side="right") / len(err)
    return list(zip(thresholds.tolist(), frac.tolist()))


def write_pck_csv(curve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fraction"])
        for t, f in curve:
            w.writerow([f"{t:.17g}", f"{f:.17g}"])
