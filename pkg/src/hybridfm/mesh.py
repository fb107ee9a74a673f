"""Triangle meshes: loading, validation, lumped mass and vertex normals."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import DegenerateMeshError, EmptyMeshError, IndexOutOfRange, ParseError

# faces with area below this fraction of the total are rejected
DEGENERATE_AREA_TOL = 1e-12


def face_areas_and_normals(vertices, faces):
    """Per-face areas and unit normals.

    Returns
    -------
    areas : ndarray, shape (m,)
    normals : ndarray, shape (m, 3)
        Zero rows for zero-area faces.
    """
    v0, v1, v2 = (vertices[faces[:, i]] for i in range(3))
    cross = np.cross(v1 - v0, v2 - v0)
    norm = np.linalg.norm(cross, axis=1)
    areas = 0.5 * norm
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = np.where(norm[:, None] > 0, cross / norm[:, None], 0.0)
    return areas, normals


@dataclass(frozen=True, eq=False)
class Mesh:
    """Validated, immutable triangle mesh.

    Use :meth:`from_arrays` (or :func:`load_mesh`) rather than the raw
    constructor; it computes the barycentric lumped mass and the
    area-weighted vertex normals and checks the mesh invariants.

    Attributes
    ----------
    vertices : ndarray, shape (n, 3)
    faces : ndarray of int64, shape (m, 3)
    vertex_mass : ndarray, shape (n,)
        One third of the summed area of incident faces.
    vertex_normals : ndarray, shape (n, 3)
        Unit length.
    total_area : float
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_mass: np.ndarray
    vertex_normals: np.ndarray
    total_area: float

    @classmethod
    def from_arrays(cls, vertices, faces) -> "Mesh":
        vertices = np.array(vertices, dtype=np.float64)
        faces = np.array(faces, dtype=np.int64)
        if vertices.size == 0 or faces.size == 0:
            raise EmptyMeshError("mesh has no vertices or no faces")
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ParseError(f"vertices must have shape (n, 3), got {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ParseError(f"faces must have shape (m, 3), got {faces.shape}")
        if not np.all(np.isfinite(vertices)):
            raise ParseError("non-finite vertex coordinates")
        n = len(vertices)
        if faces.min() < 0 or faces.max() >= n:
            raise DegenerateMeshError("face index out of range")
        if np.any(faces[:, 0] == faces[:, 1]) or np.any(faces[:, 1] == faces[:, 2]) or np.any(
            faces[:, 0] == faces[:, 2]
        ):
            raise DegenerateMeshError("face with repeated vertex index")
        referenced = np.zeros(n, dtype=bool)
        referenced[faces.ravel()] = True
        if not referenced.all():
            raise DegenerateMeshError(f"{np.count_nonzero(~referenced)} unreferenced vertices")

        areas, fnormals = face_areas_and_normals(vertices, faces)
        total = float(areas.sum())
        if not total > 0 or np.any(areas < DEGENERATE_AREA_TOL * total):
            raise DegenerateMeshError("zero-area face")

        mass = np.bincount(faces.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=n)
        weighted = np.zeros((n, 3))
        for i in range(3):
            np.add.at(weighted, faces[:, i], fnormals * areas[:, None])
        norm = np.linalg.norm(weighted, axis=1)
        if np.any(norm == 0):
            raise DegenerateMeshError(f"undefined normal at {np.count_nonzero(norm == 0)} vertices")
        normals = weighted / norm[:, None]

        for arr in (vertices, faces, mass, normals):
            arr.setflags(write=False)
        return cls(vertices, faces, mass, normals, total)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def face_areas(self) -> np.ndarray:
        return face_areas_and_normals(self.vertices, self.faces)[0]

    @cached_property
    def face_normals(self) -> np.ndarray:
        return face_areas_and_normals(self.vertices, self.faces)[1]

    @cached_property
    def mass_matrix(self) -> sparse.csr_matrix:
        return sparse.diags(self.vertex_mass).tocsr()

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, shape (e, 2)."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def bounding_box_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()

    def permuted(self, perm) -> "Mesh":
        """Copy with vertices reordered so that new vertex ``i`` is old ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return Mesh.from_arrays(self.vertices[perm], inv[self.faces])


# --------------------------------------------------------------------------- io


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _parse_off(text):
    lines = _data_lines(text)
    try:
        header = next(lines)
    except StopIteration:
        raise EmptyMeshError("empty OFF file") from None
    if not header.startswith("OFF"):
        raise ParseError("missing OFF header")
    rest = header[3:].split()
    try:
        counts = rest if rest else next(lines).split()
        nv, nf = int(counts[0]), int(counts[1])
        verts = [[float(x) for x in next(lines).split()[:3]] for _ in range(nv)]
        faces = []
        for _ in range(nf):
            tok = next(lines).split()
            k = int(tok[0])
            faces.extend(_fan([int(t) for t in tok[1 : 1 + k]]))
    except (StopIteration, ValueError, IndexError) as exc:
        raise ParseError(f"malformed OFF file: {exc}") from None
    if any(len(v) != 3 for v in verts):
        raise ParseError("OFF vertex with fewer than 3 coordinates")
    return verts, faces


def _parse_ply(text):
    lines = iter(text.splitlines())
    if next(lines, "").strip() != "ply":
        raise ParseError("missing ply magic")
    elements = []
    for raw in lines:
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise ParseError(f"unsupported PLY format {tok[1]!r}; only ascii is supported")
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before element")
            elements[-1][2].append(tok[-1] if tok[1] != "list" else ("list", tok[-1]))
        elif tok[0] == "end_header":
            break
    else:
        raise ParseError("missing end_header")
    body = [ln.split() for ln in lines if ln.strip()]
    verts, faces, pos = [], [], 0
    try:
        for name, count, props in elements:
            rows, pos = body[pos : pos + count], pos + count
            if len(rows) != count:
                raise ParseError(f"expected {count} {name} rows")
            if name == "vertex":
                idx = [props.index(c) for c in ("x", "y", "z")]
                verts = [[float(r[i]) for i in idx] for r in rows]
            elif name == "face":
                for r in rows:
                    k = int(r[0])
                    faces.extend(_fan([int(t) for t in r[1 : 1 + k]]))
    except ValueError as exc:
        raise ParseError(f"malformed PLY file: {exc}") from None
    return verts, faces


def _parse_obj(text):
    verts, faces = [], []
    try:
        for line in _data_lines(text):
            tok = line.split()
            if tok[0] == "v":
                verts.append([float(x) for x in tok[1:4]])
            elif tok[0] == "f":
                idx = []
                for t in tok[1:]:
                    i = int(t.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                faces.extend(_fan(idx))
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed OBJ file: {exc}") from None
    return verts, faces


_PARSERS = {"off": _parse_off, "ply": _parse_ply, "obj": _parse_obj}


def load_mesh(path, format="auto") -> Mesh:
    """Load and validate a triangle mesh from an OFF, ASCII PLY or OBJ file.

    Parameters
    ----------
    path : str or path-like
    format : {"auto", "off", "ply", "obj"}
        ``"auto"`` picks the parser from the file extension.

    Raises
    ------
    ParseError, DegenerateMeshError, EmptyMeshError
    """
    fmt = format.lower()
    if fmt == "auto":
        fmt = os.path.splitext(os.fspath(path))[1].lstrip(".").lower()
    if fmt == "ply-ascii":
        fmt = "ply"
    if fmt not in _PARSERS:
        raise ParseError(f"unknown mesh format {fmt!r}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    verts, faces = _PARSERS[fmt](text)
    if not verts or not faces:
        raise EmptyMeshError(f"{path}: no vertices or faces")
    return Mesh.from_arrays(verts, faces)


def save_off(mesh: Mesh, path) -> None:
    """Write ``mesh`` as OFF with round-trip exact coordinates."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} 0\n")
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.faces.tolist():
            fh.write(f"3 {a} {b} {c}\n")


def save_ply(mesh: Mesh, path, colors=None) -> None:
    """Write an ASCII PLY, optionally with per-vertex uint8 RGB colors."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        if colors is not None:
            fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write(f"element face {mesh.n_faces}\nproperty list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for i, (x, y, z) in enumerate(mesh.vertices.tolist()):
            extra = "" if colors is None else " " + " ".join(str(int(c)) for c in colors[i])
            fh.write(f"{x!r} {y!r} {z!r}{extra}\n")
        for a, b, c in mesh.faces.tolist():
            fh.write(f"3 {a} {b} {c}\n")


def load_correspondence(path, indexing="zero-based", n_source=None) -> np.ndarray:
    """Read a point-to-point map, one integer per line, as 0-based indices.

    Parameters
    ----------
    indexing : {"zero-based", "one-based"}
    n_source : int, optional
        Number of vertices on the source shape; indices must be below it.
    """
    offset = _index_offset(indexing)
    with open(path, encoding="utf-8") as fh:
        try:
            values = [int(line) for line in fh if line.strip()]
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
    corr = np.asarray(values, dtype=np.int64) - offset
    if corr.size and corr.min() < 0:
        raise IndexOutOfRange(f"{path}: negative index")
    if n_source is not None and corr.size and corr.max() >= n_source:
        raise IndexOutOfRange(f"{path}: index {corr.max()} >= {n_source}")
    return corr


def save_correspondence(corr, path, indexing="zero-based") -> None:
    np.savetxt(path, np.asarray(corr, dtype=np.int64) + _index_offset(indexing), fmt="%d")


def _index_offset(indexing):
    if indexing not in ("zero-based", "one-based"):
        raise ValueError(f"indexing must be 'zero-based' or 'one-based', got {indexing!r}")
    return 1 if indexing == "one-based" else 0
