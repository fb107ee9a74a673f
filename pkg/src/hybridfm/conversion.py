"""Point-map extraction, ground-truth encoding and ZoomOut refinement.

Direction conventions used throughout:

* a functional map ``C`` (shape ``(k2, k1)``) transfers functions from
  shape 1 to shape 2;
* a point map (correspondence) is an integer array of length ``n2`` giving,
  for every vertex of shape 2, a vertex index on shape 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .algebra import WeightedSpace, vertex_mass_of
from .errors import DimensionMismatch, EmptyEmbedding, ScheduleError
from .fmap import HybridMap, pulled_back_map
from .mesh import Mesh
from .operators import SpectralBasis

KDTREE_THRESHOLD = 20000
_CHUNK = 1024


def space_of(basis: SpectralBasis) -> WeightedSpace:
    """Weighted space of a basis; orthonormal bases get the exact identity."""
    if basis.orthonormal:
        return WeightedSpace.identity(basis.k)
    return WeightedSpace.from_matrix(basis.reduced_mass)


@dataclass(frozen=True, eq=False)
class HybridBasis:
    """Laplace-Beltrami and elastic bases of one shape.

    ``mesh`` is the :class:`Mesh` or just its vertex mass vector.
    """

    mesh: Mesh
    lb: SpectralBasis
    elastic: Optional[SpectralBasis] = None

    @property
    def k_lb(self) -> int:
        return self.lb.k

    @property
    def k_elastic(self) -> int:
        return 0 if self.elastic is None else self.elastic.k

    def truncate(self, k_lb: int, k_elastic: int) -> "HybridBasis":
        el = None if k_elastic == 0 else self.elastic.truncate(k_elastic)
        return HybridBasis(self.mesh, self.lb.truncate(k_lb), el)

    def functions(self) -> np.ndarray:
        """Concatenated ``[Phi Psi]``, shape (n, k_lb + k_elastic)."""
        if self.elastic is None:
            return np.asarray(self.lb.functions)
        return np.hstack([self.lb.functions, self.elastic.functions])

    def reduced_mass(self) -> np.ndarray:
        """Full hybrid Gram matrix ``[Phi Psi]^T M [Phi Psi]``, including cross blocks."""
        theta = self.functions()
        return theta.T @ (vertex_mass_of(self.mesh)[:, None] * theta)


def _fit(basis, k):
    if k > basis.k:
        raise DimensionMismatch(f"map needs {k} basis functions, basis has {basis.k}")
    return basis if k == basis.k else basis.truncate(k)


def embed_for_matching(c, basis1: SpectralBasis, basis2: SpectralBasis):
    """Per-vertex embeddings whose nearest neighbours realize the point map of ``C``.

    Rows of ``emb1`` are the columns of ``sqrt(M2) C M1^{-1} Psi1^T`` and rows
    of ``emb2`` the columns of ``sqrt(M2)^{-1} Psi2^T``. Bases are truncated
    to the size of ``C`` when larger.

    Returns
    -------
    emb1 : ndarray, shape (n1, k2)
    emb2 : ndarray, shape (n2, k2)
    """
    c = np.asarray(c, dtype=float)
    b1, b2 = _fit(basis1, c.shape[1]), _fit(basis2, c.shape[0])
    s1, s2 = space_of(b1), space_of(b2)
    emb1 = b1.functions @ (s1.inv_mass @ c.T @ s2.sqrt_mass)
    emb2 = b2.functions @ s2.inv_sqrt_mass
    return emb1, emb2


def extract_p2p(emb1, emb2) -> np.ndarray:
    """Index of the nearest ``emb1`` row for every ``emb2`` row.

    Exact Euclidean search; ties go to the smallest index.
    """
    emb1 = np.ascontiguousarray(emb1, dtype=float)
    emb2 = np.ascontiguousarray(emb2, dtype=float)
    if len(emb1) == 0 or len(emb2) == 0:
        raise EmptyEmbedding("empty embedding")
    if emb1.shape[1] != emb2.shape[1]:
        raise DimensionMismatch(f"embedding widths differ: {emb1.shape[1]} vs {emb2.shape[1]}")
    if emb1.shape[1] == 0:
        return np.zeros(len(emb2), dtype=np.int64)
    if len(emb1) > KDTREE_THRESHOLD:
        return _nn_kdtree(emb1, emb2)
    out = np.empty(len(emb2), dtype=np.int64)
    for start in range(0, len(emb2), _CHUNK):
        d = cdist(emb2[start : start + _CHUNK], emb1, "sqeuclidean")
        out[start : start + _CHUNK] = np.argmin(d, axis=1)
    return out


def _nn_kdtree(emb1, emb2):
    tree = cKDTree(emb1)
    dist, idx = tree.query(emb2, k=1)
    out = idx.astype(np.int64)
    # re-resolve every query against all points at the nearest distance
    for q in range(len(emb2)):
        cand = tree.query_ball_point(emb2[q], dist[q] * (1 + 1e-12) + 1e-300)
        if len(cand) > 1:
            cand = np.sort(cand)
            d = np.sum((emb1[cand] - emb2[q]) ** 2, axis=1)
            out[q] = cand[np.argmin(d)]
    return out


def encode_gt(pi, basis1: SpectralBasis, basis2: SpectralBasis, mesh2: Mesh) -> np.ndarray:
    """Functional map ``Psi2^dagger Pi Psi1`` of a point map from shape 2 into shape 1."""
    pi = np.asarray(pi)
    if pi.size and (pi.min() < 0 or pi.max() >= basis1.n_vertices):
        raise DimensionMismatch("point map index outside the source shape")
    return pulled_back_map(pi, basis1, basis2, mesh2)


def encode_gt_hybrid(pi, hybrid1: HybridBasis, hybrid2: HybridBasis) -> HybridMap:
    c_lb = encode_gt(pi, hybrid1.lb, hybrid2.lb, hybrid2.mesh)
    if hybrid1.k_elastic == 0 or hybrid2.k_elastic == 0:
        return HybridMap(c_lb, np.zeros((0, 0)))
    return HybridMap(c_lb, encode_gt(pi, hybrid1.elastic, hybrid2.elastic, hybrid2.mesh))


def hybrid_embeddings(h: HybridMap, hybrid1: HybridBasis, hybrid2: HybridBasis):
    emb1, emb2 = embed_for_matching(h.lb, hybrid1.lb, hybrid2.lb)
    if h.elastic.size:
        e1, e2 = embed_for_matching(h.elastic, hybrid1.elastic, hybrid2.elastic)
        emb1, emb2 = np.hstack([emb1, e1]), np.hstack([emb2, e2])
    return emb1, emb2


def extract_p2p_hybrid(h: HybridMap, hybrid1: HybridBasis, hybrid2: HybridBasis) -> np.ndarray:
    """Single point map from the concatenated LB and elastic block embeddings."""
    return extract_p2p(*hybrid_embeddings(h, hybrid1, hybrid2))


# ------------------------------------------------------------------ ZoomOut


def make_schedule(start, end, step=10):
    """Targets growing every entry of ``start`` by ``step`` until ``end`` is reached.

    >>> make_schedule((20, 10), (40, 30))
    [(30, 20), (40, 30)]
    """
    start, end = tuple(int(s) for s in start), tuple(int(e) for e in end)
    if any(e < s for s, e in zip(start, end)):
        raise ScheduleError(f"schedule end {end} below start {start}")
    if step <= 0:
        raise ScheduleError("step must be positive")
    out, cur = [], start
    while cur != end or not out:
        cur = tuple(min(c + step, e) for c, e in zip(cur, end))
        out.append(cur)
    return out


def _check_schedule(current, schedule, limits):
    prev = tuple(current)
    for target in schedule:
        target = tuple(target)
        if any(t < p for t, p in zip(target, prev)):
            raise ScheduleError(f"non-monotone schedule step {prev} -> {target}")
        if any(t > lim for t, lim in zip(target, limits)):
            raise ScheduleError(f"schedule size {target} exceeds available basis {limits}")
        prev = target


def zoomout(c0, basis1: SpectralBasis, basis2: SpectralBasis, mesh2: Mesh, schedule):
    """Spectral upsampling of a functional map.

    Every step extracts the point map of the current ``C`` and re-encodes it
    at the next size of ``schedule``, a list of ``(k1, k2)`` targets.
    """
    c = np.asarray(c0, dtype=float)
    schedule = [tuple(s) for s in schedule]
    _check_schedule((c.shape[1], c.shape[0]), schedule, (basis1.k, basis2.k))
    for k1, k2 in schedule:
        p2p = extract_p2p(*embed_for_matching(c, basis1, basis2))
        c = encode_gt(p2p, basis1.truncate(k1), basis2.truncate(k2), mesh2)
    return c


def zoomout_hybrid(h0: HybridMap, hybrid1: HybridBasis, hybrid2: HybridBasis, schedule):
    """Hybrid ZoomOut: joint point map in the hybrid embedding, per-block re-encoding.

    ``schedule`` lists ``(k_lb, k_elastic)`` sizes, used for both shapes.
    """
    h = h0
    schedule = [tuple(s) for s in schedule]
    limits = (
        min(hybrid1.k_lb, hybrid2.k_lb),
        min(hybrid1.k_elastic, hybrid2.k_elastic),
    )
    current = (max(h.lb.shape), max(h.elastic.shape) if h.elastic.size else 0)
    _check_schedule(current, schedule, limits)
    for k_lb, k_el in schedule:
        p2p = extract_p2p_hybrid(h, hybrid1, hybrid2)
        h = encode_gt_hybrid(p2p, hybrid1.truncate(k_lb, k_el), hybrid2.truncate(k_lb, k_el))
    return h
