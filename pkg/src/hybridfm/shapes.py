"""Procedural meshes used by the tests, demos and the bundled asset set."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def icosahedron():
    t = (1.0 + 5.0**0.5) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(v, f):
    cache = {}
    verts = list(v)

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            cache[key] = len(verts)
            verts.append(0.5 * (verts[a] + verts[b]))
        return cache[key]

    out = []
    for a, b, c in f:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), np.array(out)


def icosphere(level=3, radius=1.0) -> Mesh:
    """Subdivided icosahedron projected on a sphere; level 3 has 642 vertices."""
    v, f = icosahedron()
    for _ in range(level):
        v, f = _subdivide(v, f)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
    return Mesh.from_arrays(radius * v, f)


def grid(nx, ny, size=1.0, z=None) -> Mesh:
    """Flat ``nx`` by ``ny`` vertex grid on ``[0, size]^2``, optionally with heights ``z(x, y)``."""
    xs, ys = np.meshgrid(np.linspace(0, size, nx), np.linspace(0, size, ny), indexing="ij")
    v = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    if z is not None:
        v[:, 2] = z(v[:, 0], v[:, 1])
    idx = np.arange(nx * ny).reshape(nx, ny)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    f = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return Mesh.from_arrays(v, f)


def path_triangles(n):
    """One triangle per edge of a straight spine of vertices ``0..n-1``.

    Spine vertices sit at ``(i, 0, 0)``; each triangle's apex lies far from
    the spine, so shortest graph paths between spine vertices follow it.
    """
    spine = np.column_stack([np.arange(n, dtype=float), np.zeros(n), np.zeros(n)])
    apex = np.column_stack([np.arange(n - 1) + 0.5, np.full(n - 1, 5.0), np.zeros(n - 1)])
    v = np.vstack([spine, apex])
    f = np.array([(i, i + 1, n + i) for i in range(n - 1)])
    return Mesh.from_arrays(v, f)
