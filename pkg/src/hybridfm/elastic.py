"""Discrete thin-shell energy (membrane + hinge bending) and its Hessian at rest.

The membrane term is a per-face hyperelastic density of the Cauchy-Green
distortion ``G = g_ref^{-1} g`` of the first fundamental form,

    A_f * [ mu/2 tr G + lam/4 det G - (mu/2 + lam/4) log det G - mu - lam/4 ],

which vanishes together with its gradient at the reference configuration.
The bending term sums ``(theta_e - theta_ref_e)^2 * l_e^2 / d_e`` over
interior edges, with ``d_e`` a third of the two incident face areas.
Boundary edges carry no bending term.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .errors import DegenerateMeshError, NumericalError
from .mesh import Mesh

MU = 1.0
LAM = 1.0
DEFAULT_BENDING_WEIGHT = 1e-2


# ------------------------------------------------------------------ membrane


def _first_fundamental_form(x):
    # x: (m, 3, 3) corner positions -> edge frame D (m, 3, 2) and g = D^T D
    d = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)
    return d, np.einsum("mki,mkj->mij", d, d)


def _inv2(g):
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
    inv = np.empty_like(g)
    inv[:, 0, 0] = g[:, 1, 1]
    inv[:, 1, 1] = g[:, 0, 0]
    inv[:, 0, 1] = -g[:, 0, 1]
    inv[:, 1, 0] = -g[:, 1, 0]
    return inv / det[:, None, None], det


class _Membrane:
    def __init__(self, ref, mu=MU, lam=LAM):
        _, g_ref = _first_fundamental_form(ref)
        self.r, det_ref = _inv2(g_ref)
        self.area = 0.5 * np.sqrt(det_ref)
        self.mu, self.lam = mu, lam

    def _distortion(self, x):
        d, g = _first_fundamental_form(x)
        rg = np.einsum("mij,mjk->mik", self.r, g)
        tr = rg[:, 0, 0] + rg[:, 1, 1]
        det = rg[:, 0, 0] * rg[:, 1, 1] - rg[:, 0, 1] * rg[:, 1, 0]
        return d, g, tr, det

    def energy(self, x):
        _, _, tr, det = self._distortion(x)
        mu, lam = self.mu, self.lam
        c = mu / 2 + lam / 4
        with np.errstate(invalid="ignore", divide="ignore"):
            w = mu / 2 * tr + lam / 4 * det - c * np.log(det) - mu - lam / 4
        return self.area * w

    def gradient(self, x):
        """Per-face gradient with respect to the three corners, shape (m, 3, 3)."""
        d, g, _, det = self._distortion(x)
        ginv, _ = _inv2(g)
        c = self.mu / 2 + self.lam / 4
        s = self.mu / 2 * self.r + (self.lam / 4 * det - c)[:, None, None] * ginv
        s *= self.area[:, None, None]
        dd = 2.0 * np.einsum("mki,mij->mkj", d, s)
        out = np.empty_like(x)
        out[:, 1] = dd[:, :, 0]
        out[:, 2] = dd[:, :, 1]
        out[:, 0] = -(out[:, 1] + out[:, 2])
        return out

    def rest_hessian(self, ref):
        """Exact per-face Hessians at the reference state, shape (m, 9, 9).

        The stress vanishes at rest, so only the linearized stress
        ``dS = A [(lam/4) tr(R dg) R + (mu/2) R dg R]`` contributes.
        """
        d, _ = _first_fundamental_form(ref)
        m = len(ref)
        local = np.empty((m, 9, 9))
        for k in range(9):
            v = np.zeros((m, 9))
            v[:, k] = 1.0
            v = v.reshape(m, 3, 3)
            dd = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
            dg = np.einsum("mki,mkj->mij", dd, d)
            dg = dg + dg.transpose(0, 2, 1)
            tr = np.einsum("mij,mji->m", self.r, dg)
            ds = self.lam / 4 * tr[:, None, None] * self.r + self.mu / 2 * (self.r @ dg @ self.r)
            ds *= self.area[:, None, None]
            col = 2.0 * np.einsum("mki,mij->mkj", d, ds)
            out = np.empty((m, 3, 3))
            out[:, 1] = col[:, :, 0]
            out[:, 2] = col[:, :, 1]
            out[:, 0] = -(out[:, 1] + out[:, 2])
            local[:, :, k] = out.reshape(m, 9)
        return local


# ------------------------------------------------------------------- hinges


def interior_hinges(faces):
    """Hinges ``(a, b, c, d)`` for every interior edge.

    ``a -> b`` is a half-edge of the face ``(a, b, c)``; ``d`` is the apex of
    the face on the other side. Raises on non-manifold edges.
    """
    faces = np.asarray(faces)
    half = {}
    for a, b, c in faces:
        for i, j, k in ((a, b, c), (b, c, a), (c, a, b)):
            if (i, j) in half:
                raise DegenerateMeshError(f"half-edge ({i}, {j}) appears twice")
            half[(i, j)] = k
    hinges = [(i, j, k, half[(j, i)]) for (i, j), k in half.items() if i < j and (j, i) in half]
    return np.array(hinges, dtype=np.int64).reshape(-1, 4)


def _hinge_normals(x):
    a, b, c, d = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    n1 = np.cross(c - a, c - b)
    n2 = np.cross(d - b, d - a)
    return a, b, c, d, n1, n2


def dihedral_angles(x):
    """Signed bending angle of each hinge, zero when flat; ``x`` has shape (h, 4, 3)."""
    a, b, _, _, n1, n2 = _hinge_normals(x)
    e = b - a
    e_hat = e / np.linalg.norm(e, axis=1, keepdims=True)
    sin = np.einsum("hi,hi->h", np.cross(n1, n2), e_hat)
    cos = np.einsum("hi,hi->h", n1, n2)
    return np.arctan2(sin, cos)


def dihedral_gradient(x):
    """Analytic gradient of :func:`dihedral_angles` with respect to the four hinge vertices."""
    a, b, c, d, n1, n2 = _hinge_normals(x)
    e = b - a
    le = np.linalg.norm(e, axis=1)
    q1 = n1 / np.einsum("hi,hi->h", n1, n1)[:, None]
    q2 = n2 / np.einsum("hi,hi->h", n2, n2)[:, None]
    ec = np.einsum("hi,hi->h", c - b, e) / le
    ed = np.einsum("hi,hi->h", d - b, e) / le
    fc = np.einsum("hi,hi->h", c - a, e) / le
    fd = np.einsum("hi,hi->h", d - a, e) / le
    out = np.empty_like(x)
    out[:, 2] = -le[:, None] * q1
    out[:, 3] = -le[:, None] * q2
    out[:, 0] = -(ec[:, None] * q1 + ed[:, None] * q2)
    out[:, 1] = fc[:, None] * q1 + fd[:, None] * q2
    return out


class _Bending:
    def __init__(self, ref_vertices, faces):
        self.hinges = interior_hinges(faces)
        x = ref_vertices[self.hinges]
        self.theta_ref = dihedral_angles(x)
        _, _, _, _, n1, n2 = _hinge_normals(x)
        area = 0.5 * (np.linalg.norm(n1, axis=1) + np.linalg.norm(n2, axis=1))
        length2 = np.einsum("hi,hi->h", x[:, 1] - x[:, 0], x[:, 1] - x[:, 0])
        self.weight = length2 / (area / 3.0)

    def energy(self, vertices):
        theta = dihedral_angles(vertices[self.hinges])
        return self.weight * (theta - self.theta_ref) ** 2

    def gradient(self, vertices):
        x = vertices[self.hinges]
        scale = 2.0 * self.weight * (dihedral_angles(x) - self.theta_ref)
        return scale[:, None, None] * dihedral_gradient(x)

    def rest_hessian(self, ref_vertices):
        # at rest theta == theta_ref, so only the Gauss-Newton part survives
        u = dihedral_gradient(ref_vertices[self.hinges]).reshape(-1, 12)
        return 2.0 * self.weight[:, None, None] * u[:, :, None] * u[:, None, :]


# --------------------------------------------------------------- public API


class ShellEnergy:
    """Thin-shell energy of deformed vertex positions relative to ``mesh``.

    Parameters
    ----------
    mesh : Mesh
        Reference (undeformed) surface.
    bending_weight : float
        Factor on the bending term.
    """

    def __init__(self, mesh: Mesh, bending_weight=DEFAULT_BENDING_WEIGHT, mu=MU, lam=LAM):
        if not bending_weight > 0:
            raise ValueError("bending_weight must be positive")
        self.mesh = mesh
        self.bending_weight = float(bending_weight)
        self.membrane = _Membrane(mesh.vertices[mesh.faces], mu, lam)
        self.bending = _Bending(mesh.vertices, mesh.faces)

    def membrane_energy(self, vertices):
        return float(np.sum(self.membrane.energy(np.asarray(vertices)[self.mesh.faces])))

    def bending_energy(self, vertices):
        return float(np.sum(self.bending.energy(np.asarray(vertices))))

    def __call__(self, vertices):
        return self.membrane_energy(vertices) + self.bending_weight * self.bending_energy(vertices)

    def gradient(self, vertices):
        """Gradient with respect to ``vertices``, shape (n, 3)."""
        vertices = np.asarray(vertices, dtype=float)
        n = len(vertices)
        out = np.zeros((n, 3))
        gm = self.membrane.gradient(vertices[self.mesh.faces])
        gb = self.bending_weight * self.bending.gradient(vertices)
        for idx, g in ((self.mesh.faces, gm), (self.bending.hinges, gb)):
            for corner in range(idx.shape[1]):
                np.add.at(out, idx[:, corner], g[:, corner])
        return out

    def rest_hessian(self) -> sparse.csr_matrix:
        """Symmetric ``3n x 3n`` Hessian at the reference configuration.

        Degrees of freedom are interleaved per vertex: row ``3 * i + c`` is
        coordinate ``c`` of vertex ``i``.
        """
        n = self.mesh.n_vertices
        blocks = [
            (self.mesh.faces, self.membrane.rest_hessian(self.mesh.vertices[self.mesh.faces])),
            (self.bending.hinges, self.bending_weight * self.bending.rest_hessian(self.mesh.vertices)),
        ]
        rows, cols, vals = [], [], []
        for idx, local in blocks:
            if len(idx) == 0:
                continue
            dof = (3 * idx[:, :, None] + np.arange(3)).reshape(len(idx), -1)
            size = dof.shape[1]
            rows.append(np.repeat(dof, size, axis=1).ravel())
            cols.append(np.tile(dof, (1, size)).ravel())
            vals.append(local.ravel())
        vals = np.concatenate(vals)
        if not np.all(np.isfinite(vals)):
            raise NumericalError("non-finite entries in elastic Hessian")
        hess = sparse.coo_matrix(
            (vals, (np.concatenate(rows), np.concatenate(cols))), shape=(3 * n, 3 * n)
        ).tocsr()
        return ((hess + hess.T) * 0.5).tocsr()
