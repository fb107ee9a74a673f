"""Functional map solvers, hybrid block maps and mass-weighted map losses.

Convention: a functional map ``C`` of shape ``(k2, k1)`` sends coefficients
on shape 1 to coefficients on shape 2. Point maps go the other way, see
:mod:`hybridfm.conversion`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .algebra import WeightedSpace, adjoint, hs_norm, projector, unvec, vec, vertex_mass_of
from .errors import DimensionError, DimensionMismatch, SingularSystem
from .operators import SpectralBasis

LAMBDA_LB = 1e-3
LAMBDA_ELASTIC = 5e-4
K_LB = 140
K_ELASTIC = 60
RAMP_STEPS = 2000
HS_MAX_K = 128
ROW_COND_LIMIT = 1e14


@dataclass(frozen=True, eq=False)
class HybridMap:
    """Block-diagonal functional map between two hybrid bases.

    Only the diagonal blocks are stored; the inter-basis blocks are zero.
    """

    lb: np.ndarray
    elastic: np.ndarray

    @property
    def shape(self):
        return (
            self.lb.shape[0] + self.elastic.shape[0],
            self.lb.shape[1] + self.elastic.shape[1],
        )

    def dense(self) -> np.ndarray:
        return scipy.linalg.block_diag(self.lb, self.elastic).reshape(self.shape)


def _coeffs(d1, d2):
    d1, d2 = np.atleast_2d(np.asarray(d1, float)), np.atleast_2d(np.asarray(d2, float))
    if d1.shape[1] != d2.shape[1]:
        raise DimensionMismatch(f"descriptor counts differ: {d1.shape[1]} vs {d2.shape[1]}")
    return d1, d2


def _diag(evals, k):
    evals = np.asarray(evals, dtype=float).ravel()
    if len(evals) != k:
        raise DimensionMismatch(f"{len(evals)} eigenvalues for a {k}-dimensional basis")
    return evals


def solve_standard(d1, d2, evals1, evals2, lam=LAMBDA_LB) -> np.ndarray:
    """Functional map between orthonormal bases.

    Minimizes ``||C D1 - D2||_F^2 + lam ||C L1 - L2 C||_F^2`` with diagonal
    eigenvalue matrices ``L1``, ``L2``. The problem decouples into one
    ``k1 x k1`` system per row of ``C``.

    Parameters
    ----------
    d1, d2 : ndarray, shapes (k1, d) and (k2, d)
        Descriptor coefficients.
    evals1, evals2 : array_like, shapes (k1,) and (k2,)
    lam : float

    Returns
    -------
    ndarray, shape (k2, k1)
    """
    d1, d2 = _coeffs(d1, d2)
    k1, k2 = d1.shape[0], d2.shape[0]
    ev1, ev2 = _diag(evals1, k1), _diag(evals2, k2)
    gram = d1 @ d1.T
    rhs = d2 @ d1.T
    systems = gram[None, :, :] + lam * np.einsum(
        "ij,jk->ijk", (ev1[None, :] - ev2[:, None]) ** 2, np.eye(k1)
    )
    w, v = np.linalg.eigh(systems)
    w_abs = np.abs(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(w_abs.min(axis=1) > 0, w_abs.max(axis=1) / w_abs.min(axis=1), np.inf)
    if np.any(cond > ROW_COND_LIMIT):
        raise SingularSystem(f"row system condition number {cond.max():.3g}")
    proj = np.einsum("ikj,ik->ij", v, rhs) / w
    return np.einsum("ijk,ik->ij", v, proj)


def hs_system(d1, d2, evals1, evals2, space1: WeightedSpace, space2: WeightedSpace, lam):
    """Normal equations ``(A^T A + lam Z^T Z) vec(C) = A^T vec(B)`` of the weighted problem.

    ``A = D1^T (x) sqrt(M2)``, ``B = sqrt(M2) D2`` and
    ``Z = (sqrt(M1)^{-1} L1) (x) sqrt(M2) - sqrt(M1)^{-1} (x) (sqrt(M2) L2)``.

    Expanding the products, ``Z^T Z = W (M1^{-1} (x) M2) W`` with
    ``W = diag(vec(lam1_j - lam2_i))``, so entry ``((j, i), (l, k))`` of the
    matrix is ``M2[i, k] (G[j, l] + lam M1^{-1}[j, l] w_ji w_lk)`` with
    ``G = D1 D1^T``. It is filled in one broadcast pass and is exactly
    symmetric.
    """
    d1, d2 = _coeffs(d1, d2)
    k1, k2 = d1.shape[0], d2.shape[0]
    if space1.k != k1 or space2.k != k2:
        raise DimensionMismatch("weighted spaces do not match descriptor coefficient sizes")
    ev1, ev2 = _diag(evals1, k1), _diag(evals2, k2)

    def sym(m):
        return 0.5 * (m + m.T)

    gram, m1i, m2 = sym(d1 @ d1.T), sym(space1.inv_mass), sym(space2.reduced_mass)
    w = ev1[:, None] - ev2[None, :]  # w[j, i] = lam1_j - lam2_i
    # (k1, k2, k1, k2) layout flattens to the column-major vec ordering
    lhs = (lam * m1i)[:, None, :, None] * (w[:, :, None, None] * w[None, None, :, :])
    lhs += gram[:, None, :, None]
    lhs *= m2[None, :, None, :]
    rhs = vec(m2 @ d2 @ d1.T)
    return lhs.reshape(k1 * k2, k1 * k2), rhs


def _spd_solve(build):
    """Cholesky solve of the system ``build() -> (lhs, rhs)``.

    On failure the solve is retried once with a ``1e-12 trace`` ridge. The
    matrix is factored in place, so the retry rebuilds it.
    """
    for attempt in range(2):
        lhs, rhs = build()
        if attempt:
            lhs[np.diag_indices_from(lhs)] += 1e-12 * np.trace(lhs)
        try:
            factor = scipy.linalg.cho_factor(lhs, overwrite_a=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    raise SingularSystem("normal equations are not positive definite")


def solve_hs(d1, d2, evals1, evals2, space1, space2, lam=LAMBDA_ELASTIC) -> np.ndarray:
    """Functional map between non-orthogonal bases in the mass-weighted norms.

    Minimizes ``||sqrt(M2)(C D1 - D2)||_F^2 + lam ||C L1 - L2 C||_HS^2``
    through the ``k1 k2 x k1 k2`` normal equations of :func:`hs_system`.
    """
    d1, d2 = _coeffs(d1, d2)
    k1, k2 = d1.shape[0], d2.shape[0]
    if max(k1, k2) > HS_MAX_K:
        raise DimensionError(f"k={max(k1, k2)} exceeds the dense-system guard {HS_MAX_K}")
    inputs = (d1, d2, evals1, evals2, space1.inv_mass, space2.reduced_mass, lam)
    if not all(np.all(np.isfinite(x)) for x in inputs):
        raise ValueError("non-finite input to the weighted map solver")
    sol = _spd_solve(lambda: hs_system(d1, d2, evals1, evals2, space1, space2, lam))
    return unvec(sol, (k2, k1))


def energy_standard(c, d1, d2, evals1, evals2, lam) -> float:
    c = np.asarray(c)
    reg = c * np.asarray(evals1)[None, :] - np.asarray(evals2)[:, None] * c
    return float(np.sum((c @ d1 - d2) ** 2) + lam * np.sum(reg**2))


def energy_hs(c, d1, d2, evals1, evals2, space1, space2, lam) -> float:
    c = np.asarray(c)
    data = space2.sqrt_mass @ (c @ d1 - d2)
    reg = c * np.asarray(evals1)[None, :] - np.asarray(evals2)[:, None] * c
    return float(np.sum(data**2) + lam * hs_norm(reg, space1, space2) ** 2)


def solve_hybrid(lb, elastic, lambda_lb=LAMBDA_LB, lambda_elastic=LAMBDA_ELASTIC) -> HybridMap:
    """Block-diagonal hybrid map from two independent solves.

    Parameters
    ----------
    lb : tuple
        ``(d1, d2, evals1, evals2)`` in the orthonormal Laplace-Beltrami bases.
    elastic : tuple or None
        ``(d1, d2, evals1, evals2, space1, space2)`` in the elastic bases.
        ``None`` gives an empty elastic block.
    """
    c_lb = solve_standard(*lb, lam=lambda_lb)
    if elastic is None:
        c_el = np.zeros((0, 0))
    else:
        c_el = solve_hs(*elastic, lam=lambda_elastic)
    return HybridMap(c_lb, c_el)


# ------------------------------------------------------------------- losses


def loss_bijectivity(c12, c21) -> float:
    """``||C12 C21 - I||_F^2 + ||C21 C12 - I||_F^2``."""
    c12, c21 = np.asarray(c12), np.asarray(c21)
    if c12.shape != c21.T.shape:
        raise DimensionMismatch(f"maps of shapes {c12.shape} and {c21.shape} do not compose")
    a = c12 @ c21 - np.eye(c12.shape[0])
    b = c21 @ c12 - np.eye(c21.shape[0])
    return float(np.sum(a**2) + np.sum(b**2))


def loss_orthogonality_hs(c12, c21, space1, space2) -> float:
    """``||C12* C12 - I||_F^2 + ||C21* C21 - I||_F^2`` with mass-weighted adjoints."""
    a = adjoint(c12, space1, space2) @ c12 - np.eye(space1.k)
    b = adjoint(c21, space2, space1) @ c21 - np.eye(space2.k)
    return float(np.sum(a**2) + np.sum(b**2))


def pulled_back_map(pi, basis_src: SpectralBasis, basis_dst: SpectralBasis, mesh_dst):
    """``Psi_dst^dagger Pi Psi_src`` for a point map ``pi`` from ``mesh_dst`` into the source.

    ``mesh_dst`` may also be given as its vertex mass vector.
    """
    pi = np.asarray(pi)
    n_dst = len(vertex_mass_of(mesh_dst))
    if len(pi) != n_dst:
        raise DimensionMismatch(f"point map of length {len(pi)} for {n_dst} vertices")
    return projector(basis_dst, mesh_dst)(basis_src.functions[pi])


def loss_couple_hs(
    c12, c21, pi21, pi12, basis1, basis2, mesh1, mesh2, space1=None, space2=None
) -> float:
    """Coupling between functional maps and point maps in the HS norm.

    ``pi21`` gives, for every vertex of shape 2, its image on shape 1 (the
    point map realizing ``C12``); ``pi12`` is the reverse.
    """
    space1 = space1 or WeightedSpace.from_matrix(basis1.reduced_mass)
    space2 = space2 or WeightedSpace.from_matrix(basis2.reduced_mass)
    r12 = np.asarray(c12) - pulled_back_map(pi21, basis1, basis2, mesh2)
    r21 = np.asarray(c21) - pulled_back_map(pi12, basis2, basis1, mesh1)
    return hs_norm(r12, space1, space2) ** 2 + hs_norm(r21, space2, space1) ** 2


def loss_gt_hs(c, c_gt, space1, space2) -> float:
    """``||C - C_gt||_HS^2``."""
    return hs_norm(np.asarray(c) - np.asarray(c_gt), space1, space2) ** 2


def annealing_and_scales(step, k_total, k_lb, k_elastic, ramp_steps=RAMP_STEPS):
    """Elastic loss ramp ``mu`` and block normalizers ``alpha``, ``beta``.

    ``mu`` grows linearly from 0 to 1 over ``ramp_steps``; the normalizers
    are ``k^2 / (2 k_lb^2)`` and ``k^2 / (2 k_elastic^2)``.
    """
    if k_lb <= 0 or k_elastic <= 0 or k_lb + k_elastic != k_total:
        raise ValueError(f"invalid partition {k_lb} + {k_elastic} != {k_total}")
    if ramp_steps <= 0:
        raise ValueError("ramp_steps must be positive")
    mu = min(max(step, 0) / ramp_steps, 1.0)
    alpha = 0.5 * k_total**2 / k_lb**2
    beta = 0.5 * k_total**2 / k_elastic**2
    return mu, alpha, beta
