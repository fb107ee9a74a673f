"""Linear algebra on coefficient spaces weighted by a reduced mass matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotSPD
from .mesh import Mesh
from .operators import SpectralBasis

NOT_SPD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    """Coefficient space with inner product ``<x, y> = x^T M_k y``.

    ``sqrt_mass`` is the symmetric principal root of ``reduced_mass``.
    """

    reduced_mass: np.ndarray
    sqrt_mass: np.ndarray
    inv_sqrt_mass: np.ndarray
    inv_mass: np.ndarray

    @property
    def k(self) -> int:
        return self.reduced_mass.shape[0]

    @classmethod
    def from_matrix(cls, reduced_mass) -> "WeightedSpace":
        m = np.asarray(reduced_mass, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"reduced mass must be square, got {m.shape}")
        m = 0.5 * (m + m.T)
        d, q = np.linalg.eigh(m)
        if d.size and d.min() <= NOT_SPD_TOL * max(d.max(), 0.0):
            raise NotSPD(f"reduced mass eigenvalue {d.min():.3g} (max {d.max():.3g})")
        root = np.sqrt(d)
        return cls(
            m,
            (q * root) @ q.T,
            (q / root) @ q.T,
            (q / d) @ q.T,
        )

    @classmethod
    def identity(cls, k: int) -> "WeightedSpace":
        eye = np.eye(k)
        return cls(eye, eye, eye, eye)


def weighted_space(basis: SpectralBasis) -> WeightedSpace:
    """Weighted coefficient space of ``basis``; raises NotSPD for degenerate bases."""
    return WeightedSpace.from_matrix(basis.reduced_mass)


def vertex_mass_of(mesh) -> np.ndarray:
    """Lumped vertex areas of a :class:`Mesh`, or the array itself if one is given."""
    if isinstance(mesh, Mesh):
        return mesh.vertex_mass
    mass = np.asarray(mesh, dtype=float)
    if mass.ndim != 1:
        raise DimensionMismatch(f"vertex mass must be 1-D, got shape {mass.shape}")
    return mass


def projector(basis: SpectralBasis, mesh):
    """Orthogonal projector onto ``span(basis)`` as a function ``D -> M_k^{-1} Psi^T M D``.

    ``mesh`` is a :class:`Mesh` or its vertex mass vector. ``D`` may be a
    vector of length ``n`` or an ``n x d`` matrix. For orthonormal bases the
    solve is skipped.
    """
    mass = vertex_mass_of(mesh)
    n = len(mass)
    if basis.n_vertices != n:
        raise DimensionMismatch(f"basis has {basis.n_vertices} rows but mesh has {n} vertices")
    weighted_t = (basis.functions * mass[:, None]).T
    chol = None if basis.orthonormal else scipy.linalg.cho_factor(basis.reduced_mass)

    def apply(d):
        d = np.asarray(d, dtype=float)
        if d.shape[0] != n:
            raise DimensionMismatch(f"function has {d.shape[0]} rows, expected {n}")
        coeffs = weighted_t @ d
        return coeffs if chol is None else scipy.linalg.cho_solve(chol, coeffs)

    return apply


def _check(a, space_dom, space_rng):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape != (space_rng.k, space_dom.k):
        raise DimensionMismatch(
            f"operator of shape {a.shape} between spaces of size {space_dom.k} -> {space_rng.k}"
        )
    return a


def hs_norm(a, domain: WeightedSpace, range: WeightedSpace) -> float:
    """Hilbert-Schmidt norm ``||sqrt(M_2) A sqrt(M_1)^{-1}||_F`` of ``A: domain -> range``."""
    a = _check(a, domain, range)
    return float(np.linalg.norm(range.sqrt_mass @ a @ domain.inv_sqrt_mass))


def hs_norm_trace(a, domain: WeightedSpace, range: WeightedSpace) -> float:
    """Same norm through the trace form ``sqrt(tr(M_1^{-1} A^T M_2 A))``."""
    a = _check(a, domain, range)
    return float(np.sqrt(max(np.trace(domain.inv_mass @ a.T @ range.reduced_mass @ a), 0.0)))


def adjoint(c, domain: WeightedSpace, range: WeightedSpace) -> np.ndarray:
    """Adjoint ``M_1^{-1} C^T M_2`` of ``C: domain -> range``."""
    c = _check(c, domain, range)
    return domain.inv_mass @ c.T @ range.reduced_mass


def vec(a) -> np.ndarray:
    """Column-stacked vectorization."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, shape) -> np.ndarray:
    return np.asarray(v).reshape(shape, order="F")


def kron_vec_apply(e, f, g) -> np.ndarray:
    """``vec(E F G)`` computed by direct multiplication."""
    e, f, g = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (e, f, g))
    if e.shape[1] != f.shape[0] or f.shape[1] != g.shape[0]:
        raise DimensionMismatch(f"cannot multiply {e.shape} @ {f.shape} @ {g.shape}")
    return vec(e @ f @ g)


def kron_matrix(e, g) -> np.ndarray:
    """Explicit ``G^T (x) E`` so that ``kron_matrix(E, G) @ vec(F) == vec(E F G)``."""
    return np.kron(np.asarray(g, dtype=float).T, np.asarray(e, dtype=float))
