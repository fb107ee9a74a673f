"""Laplace-Beltrami and elastic thin-shell operators and their spectral bases."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .elastic import DEFAULT_BENDING_WEIGHT, ShellEnergy
from .errors import ConvergenceError, DimensionMismatch, NumericalError, RankError
from .mesh import Mesh

logger = logging.getLogger(__name__)

LAPLACE_BELTRAMI = "LaplaceBeltrami"
ELASTIC_HESSIAN = "ElasticHessian"
# kinds of spectral bases
LB = "LB"
ELASTIC = "Elastic"

KERNEL_TOL = 1e-5
EIGSH_TOL = 1e-10
# residual bound relative to max|T| * ||phi||
RESIDUAL_TOL = 1e-8
DEFAULT_SEED = 42
# eigenpairs sought per pass when checking for missed eigenvalues
DEFLATION_BLOCK = 4
MAX_DEFLATION_PASSES = 20
# dimension below which the dense solver is used
DENSE_LIMIT = 600


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Symmetric positive semidefinite operator on a mesh."""

    matrix: sparse.csr_matrix
    kind: str

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """A truncated set of ``k`` basis functions on ``n`` vertices.

    Attributes
    ----------
    functions : ndarray, shape (n, k)
    eigenvalues : ndarray, shape (k,)
        Ascending.
    reduced_mass : ndarray, shape (k, k)
        Gram matrix ``functions.T @ M @ functions``.
    orthonormal : bool
    kind : {LB, ELASTIC}
    """

    functions: np.ndarray
    eigenvalues: np.ndarray
    reduced_mass: np.ndarray
    orthonormal: bool
    kind: str

    @property
    def k(self) -> int:
        return self.functions.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.functions.shape[0]

    def truncate(self, k: int) -> "SpectralBasis":
        """Leading ``k`` functions; the reduced mass is the leading block."""
        if k > self.k:
            raise RankError(f"cannot truncate a {self.k}-function basis to {k}")
        return SpectralBasis(
            self.functions[:, :k],
            self.eigenvalues[:k],
            self.reduced_mass[:k, :k],
            self.orthonormal,
            self.kind,
        )


def cotangent_weights(mesh: Mesh):
    """Half-cotangent of the angle opposite each face edge.

    Returns ``(i, j, w)`` arrays with one entry per face corner, where
    ``w = cot(angle at the third corner) / 2`` for the edge ``(i, j)``.
    """
    f = mesh.faces
    v = mesh.vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = f[:, (k + 1) % 3], f[:, (k + 2) % 3], f[:, k]
        u, w = v[i] - v[o], v[j] - v[o]
        cot = np.einsum("ij,ij->i", u, w) / np.linalg.norm(np.cross(u, w), axis=1)
        rows.append(i)
        cols.append(j)
        vals.append(0.5 * cot)
    vals = np.concatenate(vals)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite cotangent weight")
    return np.concatenate(rows), np.concatenate(cols), vals


def assemble_laplacian(mesh: Mesh) -> SparseOperator:
    """Cotangent stiffness matrix, ``n x n``, symmetric, rows summing to zero."""
    i, j, w = cotangent_weights(mesh)
    n = mesh.n_vertices
    off = sparse.coo_matrix((-w, (i, j)), shape=(n, n))
    off = (off + off.T).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return SparseOperator((off + sparse.diags(diag)).tocsr(), LAPLACE_BELTRAMI)


def assemble_elastic_hessian(mesh: Mesh, bending_weight=DEFAULT_BENDING_WEIGHT) -> SparseOperator:
    """Hessian of the thin-shell energy at the identity deformation, ``3n x 3n``."""
    return SparseOperator(ShellEnergy(mesh, bending_weight).rest_hessian(), ELASTIC_HESSIAN)


def _mass_for(op: SparseOperator, mesh: Mesh) -> np.ndarray:
    if op.kind == ELASTIC_HESSIAN:
        return np.repeat(mesh.vertex_mass, 3)
    return np.asarray(mesh.vertex_mass)


def _fix_signs(vecs):
    # largest-magnitude entry of every column made positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _shift_invert_eigh(matrix, mass_diag, n_eigs, seed):
    """Lanczos in shift-invert mode, followed by deflated passes.

    A single Lanczos run can return one member of a degenerate cluster and
    skip its siblings. Each deflated pass searches the mass-orthogonal
    complement of the pairs found so far; anything below the current largest
    eigenvalue is merged in, until a pass comes back empty.
    """
    dim = matrix.shape[0]
    scale = matrix.diagonal().sum() / mass_diag.sum()
    sigma = -1e-8 * scale
    mass = sparse.diags(mass_diag).tocsc()
    # the shifted matrix is SPD: symmetric ordering, diagonal pivots
    lu = splu(
        (matrix - sigma * mass).tocsc(),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    rng = np.random.default_rng(seed)

    def run(k, basis):
        if basis is None:
            apply = lu.solve
        else:
            # ARPACK feeds M x; project that on the dual side, the result on the primal
            weighted = basis * mass_diag[:, None]

            def apply(y):
                z = lu.solve(y - weighted @ (basis.T @ y))
                return z - basis @ (weighted.T @ z)

        op = LinearOperator((dim, dim), matvec=apply, dtype=float)
        v0 = rng.standard_normal(dim)
        if basis is not None:
            v0 -= basis @ (basis.T @ (mass_diag * v0))
        try:
            return eigsh(
                matrix, k=k, M=mass, sigma=sigma, which="LM", OPinv=op,
                v0=v0, tol=EIGSH_TOL, maxiter=500 * max(k, 10),
            )
        except ArpackNoConvergence as exc:
            raise ConvergenceError(str(exc)) from None

    evals, evecs = run(n_eigs, None)
    for _ in range(MAX_DEFLATION_PASSES):
        room = dim - evecs.shape[1] - 1
        if room < 1:
            break
        extra_vals, extra_vecs = run(min(DEFLATION_BLOCK, room), evecs)
        # ties with the current maximum are interchangeable with it
        missed = extra_vals < evals.max() - 1e-9 * max(abs(evals.max()), scale)
        if not np.any(missed):
            break
        logger.debug("deflation pass recovered %d eigenpairs", np.count_nonzero(missed))
        evals = np.concatenate([evals, extra_vals[missed]])
        evecs = np.hstack([evecs, extra_vecs[:, missed]])
        keep = np.argsort(evals, kind="stable")[:n_eigs]
        evals, evecs = evals[keep], evecs[:, keep]
    else:
        raise ConvergenceError("eigenpairs still missing after deflation passes")
    return evals, evecs


def generalized_eigh(matrix, mass_diag, n_eigs, seed=DEFAULT_SEED):
    """Smallest ``n_eigs`` eigenpairs of ``matrix x = lam diag(mass_diag) x``.

    Uses shift-invert Lanczos around a slightly negative shift, or a dense
    solve for small problems. Eigenvectors are mass-orthonormal.
    """
    dim = matrix.shape[0]
    if n_eigs > dim:
        raise RankError(f"requested {n_eigs} eigenpairs of a {dim}-dimensional operator")
    if dim <= DENSE_LIMIT or n_eigs >= dim - 1:
        evals, evecs = scipy.linalg.eigh(
            matrix.toarray(), np.diag(mass_diag), subset_by_index=[0, n_eigs - 1]
        )
    else:
        evals, evecs = _shift_invert_eigh(matrix, mass_diag, n_eigs, seed)
    order = np.argsort(evals, kind="stable")
    evals, evecs = evals[order], _fix_signs(evecs[:, order])

    residual = matrix @ evecs - evecs * mass_diag[:, None] * evals
    bound = RESIDUAL_TOL * abs(matrix).max() * np.linalg.norm(evecs, axis=0)
    worst = np.linalg.norm(residual, axis=0) / bound
    if np.any(worst > 1.0):
        raise ConvergenceError(f"eigen-residual {worst.max():.3g}x above tolerance")
    return evals, evecs


def compute_eigenbasis(
    op: SparseOperator,
    mesh: Mesh,
    k: int,
    drop_kernel=True,
    kernel_tol=KERNEL_TOL,
    seed=DEFAULT_SEED,
) -> SpectralBasis:
    """Spectral basis from the ``k`` smallest generalized eigenpairs of ``op``.

    Laplace-Beltrami eigenfunctions are returned mass-orthonormal. Elastic
    modes are vector fields; each one is projected onto the vertex normals
    and kept unnormalized, so the basis carries its reduced mass matrix.

    With ``drop_kernel`` the near-zero modes (relative to the largest
    computed eigenvalue) are discarded first: the constant function for the
    Laplacian, the six rigid motions for the elastic Hessian.
    """
    expected = (6 if op.kind == ELASTIC_HESSIAN else 1) if drop_kernel else 0
    mass = _mass_for(op, mesh)
    if len(mass) != op.dimension:
        raise DimensionMismatch(f"operator of size {op.dimension} does not match mesh")
    n_eigs = min(k + expected, op.dimension)
    if k > op.dimension:
        raise RankError(f"k={k} exceeds operator dimension {op.dimension}")
    evals, evecs = generalized_eigh(op.matrix, mass, n_eigs, seed=seed)

    if drop_kernel:
        keep = evals >= kernel_tol * evals.max()
        dropped = np.count_nonzero(~keep)
        if dropped != expected:
            logger.warning("found %d near-kernel modes, expected %d", dropped, expected)
        evals, evecs = evals[keep], evecs[:, keep]
        if len(evals) < k:
            raise RankError(f"only {len(evals)} non-kernel modes available, k={k}")
    evals, evecs = evals[:k], evecs[:, :k]
    evals = np.maximum(evals, 0.0)

    if op.kind == ELASTIC_HESSIAN:
        fields = evecs.reshape(mesh.n_vertices, 3, k)
        funcs = _fix_signs(np.einsum("nck,nc->nk", fields, mesh.vertex_normals))
        kind, orthonormal = ELASTIC, False
    else:
        funcs, kind, orthonormal = evecs, LB, True
    reduced = funcs.T @ (mesh.vertex_mass[:, None] * funcs)
    reduced = 0.5 * (reduced + reduced.T)
    for arr in (funcs, evals, reduced):
        arr.setflags(write=False)
    return SpectralBasis(funcs, evals, reduced, orthonormal, kind)


def laplace_basis(mesh: Mesh, k: int, drop_kernel=False, seed=DEFAULT_SEED) -> SpectralBasis:
    """Shorthand for the Laplace-Beltrami basis of ``mesh``."""
    return compute_eigenbasis(assemble_laplacian(mesh), mesh, k, drop_kernel=drop_kernel, seed=seed)


def elastic_basis(
    mesh: Mesh, k: int, bending_weight=DEFAULT_BENDING_WEIGHT, seed=DEFAULT_SEED
) -> SpectralBasis:
    """Shorthand for the normal-projected elastic basis with rigid motions removed."""
    op = assemble_elastic_hessian(mesh, bending_weight)
    return compute_eigenbasis(op, mesh, k, drop_kernel=True, seed=seed)
