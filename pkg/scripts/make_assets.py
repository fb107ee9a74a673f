"""Regenerate the bundled meshes and ground-truth maps in ``src/hybridfm/data``.

The base shape is a stylized quadruped: the zero level set of a smooth union
of capsules (body, four legs, neck, head, tail), meshed with marching cubes.
Every target shape applies a closed-form warp to the base vertices and then
shuffles the vertex order with a fixed seed, so the ground truth is the
inverse shuffle.

    python scripts/make_assets.py [OUTPUT_DIR]

Needs scikit-image (``pip install .[assets]``). Output is deterministic.
"""

import json
import pathlib
import sys

import numpy as np
from skimage.measure import marching_cubes

from hybridfm.mesh import Mesh, save_correspondence, save_off
from hybridfm.shapes import icosphere

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "hybridfm" / "data"
SEED = 42

CAPSULES = [
    ((-0.55, 0, 0), (0.55, 0, 0), 0.32),  # body
    ((0.45, 0.18, -0.1), (0.5, 0.22, -0.95), 0.09),  # legs
    ((0.45, -0.18, -0.1), (0.5, -0.22, -0.95), 0.09),
    ((-0.45, 0.18, -0.1), (-0.5, 0.22, -0.95), 0.09),
    ((-0.45, -0.18, -0.1), (-0.5, -0.22, -0.95), 0.09),
    ((0.55, 0, 0.1), (0.85, 0, 0.55), 0.12),  # neck
    ((0.85, 0, 0.6), (1.15, 0, 0.55), 0.15),  # head
    ((-0.55, 0, 0.1), (-1.1, 0, 0.45), 0.05),  # tail
]


def capsule_sdf(p, a, b, r):
    a, b = np.asarray(a, float), np.asarray(b, float)
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0, 1)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1) - r


def smooth_min(d1, d2, k):
    h = np.clip(0.5 + 0.5 * (d2 - d1) / k, 0, 1)
    return d2 * (1 - h) + d1 * h - k * h * (1 - h)


def creature(spacing=0.05, blend=0.08):
    lo, hi = np.array([-1.3, -0.5, -1.1]), np.array([1.4, 0.5, 0.85])
    axes = [np.arange(a, b + spacing, spacing) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    sdf = None
    for a, b, r in CAPSULES:
        d = capsule_sdf(grid, a, b, r)
        sdf = d if sdf is None else smooth_min(sdf, d, blend)
    v, f, _, _ = marching_cubes(sdf, 0.0, spacing=(spacing,) * 3)
    v = v + lo
    # marching cubes can emit coincident vertices and slivers on grid nodes
    key = np.round(v / (spacing * 1e-6)).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    v, f = v[first], inv.ravel()[f]
    f = f[(f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])]
    area = 0.5 * np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
    f = f[area > 1e-10]
    used = np.unique(f)
    remap = np.full(len(v), -1)
    remap[used] = np.arange(len(used))
    return Mesh.from_arrays(v[used], remap[f][:, ::-1])


# ------------------------------------------------------------------- warps


def _rotate_xz(p, pivot, angle):
    c, s = np.cos(angle), np.sin(angle)
    d = p - pivot
    return pivot + np.column_stack([c * d[:, 0] - s * d[:, 2], d[:, 1], s * d[:, 0] + c * d[:, 2]])


def bend(v):
    """Near-isometric pose change: legs swing at the hips, tail lifts."""
    w = v.copy()
    for sx in (-1, 1):
        # the body bottom sits near z = -0.32; start the knee below it
        leg = (np.sign(v[:, 0]) == sx) & (v[:, 2] < -0.4)
        ramp = np.clip((-v[leg, 2] - 0.4) / 0.15, 0, 1)
        pivot = np.array([0.47 * sx, 0.0, -0.4])
        for i, r in zip(np.flatnonzero(leg), ramp):
            w[i] = _rotate_xz(v[i : i + 1], pivot, 0.35 * sx * r)[0]
    # the body's rear cap ends near x = -0.87
    tail = v[:, 0] < -0.9
    ramp = np.clip((-v[tail, 0] - 0.9) / 0.1, 0, 1)
    for i, r in zip(np.flatnonzero(tail), ramp):
        w[i] = _rotate_xz(v[i : i + 1], np.array([-0.9, 0.0, 0.35]), -0.4 * r)[0]
    return w


def crease(v, depth):
    w = v.copy()
    w[:, 2] += depth * np.abs(v[:, 1])
    return w


def stretch_crease(v):
    return crease(v * [1.3, 0.9, 1.0], 0.3)


def proportions(v):
    w = v.copy()
    leg = v[:, 2] < -0.3
    w[leg, 2] = -0.3 + (v[leg, 2] + 0.3) * 1.35
    head = v[:, 0] > 0.6
    w[head, 2] += 0.4 * (v[head, 0] - 0.6)
    tail = v[:, 0] < -0.55
    w[tail, 0] += 0.5 * (v[tail, 0] + 0.55)
    return w * [1.1, 1.0, 1.0]


def thick_legs(v, factor):
    w = v.copy()
    ramp = np.clip((-v[:, 2] - 0.25) / 0.3, 0, 1)
    cx, cy = np.sign(v[:, 0]) * 0.48, np.sign(v[:, 1]) * 0.2
    s = 1 + (factor - 1) * ramp
    w[:, 0] = cx + (v[:, 0] - cx) * s
    w[:, 1] = cy + (v[:, 1] - cy) * s
    return w


def hippo(v):
    return crease(thick_legs(v * [1.25, 1.1, 0.9], 1.4), 0.25)


PAIRS = {
    "self": ("self-pair", lambda v: v),
    "bend": ("isometric", bend),
    "stretch_crease": ("non-isometric", stretch_crease),
    "proportions": ("non-isometric", proportions),
    "hippo": ("non-isometric", hippo),
}


def main(out=OUT):
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    save_off(icosphere(3), out / "icosphere3.off")
    base = creature()
    save_off(base, out / "creature.off")
    rng = np.random.default_rng(SEED)
    manifest = {"source": "creature.off", "pairs": {}}
    for name, (kind, warp) in PAIRS.items():
        target = Mesh.from_arrays(warp(np.array(base.vertices)), base.faces)
        perm = rng.permutation(base.n_vertices)
        save_off(target.permuted(perm), out / f"creature_{name}.off")
        # vertex i of the target is base vertex perm[i]
        save_correspondence(perm, out / f"creature_{name}.gt.txt")
        manifest["pairs"][name] = {
            "kind": kind,
            "target": f"creature_{name}.off",
            "gt": f"creature_{name}.gt.txt",
        }
    (out / "pairs.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(PAIRS)} pairs to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
