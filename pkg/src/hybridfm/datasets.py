"""Bundled synthetic shapes and ground-truth correspondences.

The files in ``hybridfm/data`` are produced by ``scripts/make_assets.py``:
a quadruped-like base shape and five warped copies with shuffled vertex
order. Each pair maps the warped target (shape 2) onto the base (shape 1).
"""

from __future__ import annotations

import json
from importlib import resources

from .mesh import Mesh, load_correspondence, load_mesh

_DATA = resources.files("hybridfm") / "data"


def data_path(name):
    return _DATA / name


def _manifest():
    return json.loads((_DATA / "pairs.json").read_text(encoding="utf-8"))


def pair_names(kind=None):
    """Names of the bundled pairs, optionally filtered by ``kind``
    (``"self-pair"``, ``"isometric"`` or ``"non-isometric"``)."""
    pairs = _manifest()["pairs"]
    return [name for name, p in pairs.items() if kind is None or p["kind"] == kind]


def load_pair(name):
    """Return ``(source_mesh, target_mesh, gt)``; ``gt[i]`` is the source vertex of target vertex ``i``."""
    manifest = _manifest()
    entry = manifest["pairs"][name]
    with resources.as_file(_DATA / manifest["source"]) as p:
        src = load_mesh(p)
    with resources.as_file(_DATA / entry["target"]) as p:
        dst = load_mesh(p)
    with resources.as_file(_DATA / entry["gt"]) as p:
        gt = load_correspondence(p, n_source=src.n_vertices)
    return src, dst, gt


def icosphere_mesh() -> Mesh:
    """Bundled level-3 icosphere (642 vertices, 1280 faces)."""
    with resources.as_file(_DATA / "icosphere3.off") as p:
        return load_mesh(p)
