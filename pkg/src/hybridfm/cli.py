"""Command-line pipeline: basis -> match -> refine -> convert -> eval, plus GT recovery.

Every option can also come from a ``key = value`` config file given with
``--config``; command-line flags win. ``FMB_CACHE_DIR`` sets where basis and
geodesic caches are kept when no explicit output path is given.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import pathlib
import sys

import numpy as np

from . import descriptors as desc_mod
from .algebra import projector
from .conversion import (
    HybridBasis,
    encode_gt_hybrid,
    extract_p2p_hybrid,
    make_schedule,
    space_of,
    zoomout_hybrid,
)
from .errors import DimensionMismatch, HybridFMError, ScheduleError
from .evaluation import (
    DEFAULT_THRESHOLDS,
    GeodesicCache,
    is_connected,
    pck_curve,
    pointwise_errors,
    write_pck_csv,
)
from .fmap import HybridMap, solve_hybrid
from .fmb import read_fmb, write_fmb
from .mesh import Mesh, load_correspondence, load_mesh, save_correspondence
from .operators import (
    ELASTIC,
    LB,
    SpectralBasis,
    elastic_basis,
    laplace_basis,
)

logger = logging.getLogger(__name__)

BASIS_KEYS = ("phi", "lb_evals", "psi", "elas_evals", "Mk_elas", "vertex_mass")
DESCRIPTORS = ("wks", "hks", "xyz")


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    k_lb: int = 140
    k_elas: int = 60
    lambda_lb: float = 1e-3
    lambda_elas: float = 5e-4
    bending_weight: float = 1e-2
    descriptor: str = "wks"
    seed: int = 42
    schedule: str = ""
    normalize: bool = True
    one_based: bool = False

    def __post_init__(self):
        if self.k_lb < 0 or self.k_elas < 0 or self.k_lb + self.k_elas == 0:
            raise ValueError(f"need k_lb, k_elas >= 0 with a positive sum, got {self.k_lb}+{self.k_elas}")
        if self.lambda_lb < 0 or self.lambda_elas < 0:
            raise ValueError("regularization weights must be nonnegative")
        if not self.bending_weight > 0:
            raise ValueError("bending_weight must be positive")
        if self.descriptor not in DESCRIPTORS and not self.descriptor.startswith("external:"):
            raise ValueError(f"unknown descriptor {self.descriptor!r}")

    @property
    def indexing(self):
        return "one-based" if self.one_based else "zero-based"


_FIELDS = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def _coerce(key, raw):
    kind = _FIELDS[key]
    if kind == "bool":
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: not a boolean: {raw!r}")
    return {"int": int, "float": float, "str": str}[kind](raw)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines. ``#`` starts a comment, ``[section]`` lines are skipped."""
    out = {}
    for lineno, raw in enumerate(pathlib.Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip("\"'"))
    return out


def resolve_config(args) -> tuple[PipelineConfig, set]:
    """Merge defaults, config file and flags. Also returns the explicitly set keys."""
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return PipelineConfig(**values), set(values)


def cache_dir() -> pathlib.Path:
    path = pathlib.Path(os.environ.get("FMB_CACHE_DIR", ".fmb_cache"))
    path.mkdir(parents=True, exist_ok=True)
    return path


# ------------------------------------------------------------------- bases


def compute_basis_tensors(mesh: Mesh, k_lb, k_elas, bending_weight, seed) -> dict:
    n = mesh.n_vertices
    out = {"phi": np.zeros((n, 0)), "lb_evals": np.zeros(0)}
    if k_lb:
        lb = laplace_basis(mesh, k_lb, seed=seed)
        out["phi"], out["lb_evals"] = lb.functions, lb.eigenvalues
    out.update(psi=np.zeros((n, 0)), elas_evals=np.zeros(0), Mk_elas=np.zeros((0, 0)))
    if k_elas:
        el = elastic_basis(mesh, k_elas, bending_weight=bending_weight, seed=seed)
        out.update(psi=el.functions, elas_evals=el.eigenvalues, Mk_elas=el.reduced_mass)
    out["vertex_mass"] = np.array(mesh.vertex_mass)
    return out


def basis_from_tensors(tensors) -> HybridBasis:
    """Hybrid basis of a shape from a basis cache; the mesh is represented by its vertex mass."""
    missing = [k for k in BASIS_KEYS if k not in tensors]
    if missing:
        raise KeyError(f"basis cache lacks {missing}")
    phi = tensors["phi"]
    lb = SpectralBasis(phi, tensors["lb_evals"], np.eye(phi.shape[1]), True, LB)
    el = None
    if tensors["psi"].shape[1]:
        el = SpectralBasis(tensors["psi"], tensors["elas_evals"], tensors["Mk_elas"], False, ELASTIC)
    return HybridBasis(tensors["vertex_mass"], lb, el)


def cache_path(mesh: Mesh, cfg: PipelineConfig, k_lb, k_elas) -> pathlib.Path:
    name = f"{mesh.content_hash()[:20]}_lb{k_lb}_el{k_elas}_bw{cfg.bending_weight!r}_s{cfg.seed}.fmb"
    return cache_dir() / name


def cached_basis(mesh: Mesh, cfg: PipelineConfig, k_lb=None, k_elas=None) -> dict:
    """Basis tensors for ``mesh``, read from or written to the cache directory."""
    k_lb = cfg.k_lb if k_lb is None else k_lb
    k_elas = cfg.k_elas if k_elas is None else k_elas
    path = cache_path(mesh, cfg, k_lb, k_elas)
    if path.exists():
        return read_fmb(path)
    tensors = compute_basis_tensors(mesh, k_lb, k_elas, cfg.bending_weight, cfg.seed)
    write_fmb(path, tensors)
    return tensors


def cmd_basis(args):
    cfg, _ = resolve_config(args)
    mesh = load_mesh(args.mesh)
    if args.output:
        write_fmb(args.output, compute_basis_tensors(mesh, cfg.k_lb, cfg.k_elas, cfg.bending_weight, cfg.seed))
        out = args.output
    else:
        cached_basis(mesh, cfg)
        out = cache_path(mesh, cfg, cfg.k_lb, cfg.k_elas)
    print(out)


# ------------------------------------------------------------------- match


def _descriptor_values(kind, h: HybridBasis, mesh_path, external_path):
    if kind == "wks":
        return desc_mod.wks(h.lb).values
    if kind == "hks":
        return desc_mod.hks(h.lb).values
    if kind == "xyz":
        if mesh_path is None:
            raise ValueError("xyz descriptors need --mesh1 and --mesh2")
        return np.array(load_mesh(mesh_path).vertices)
    return read_fmb(external_path)["descriptors"]


def _project(values, basis: SpectralBasis, mass):
    if values.shape[0] != basis.n_vertices:
        raise DimensionMismatch(f"descriptors have {values.shape[0]} rows, basis has {basis.n_vertices}")
    return projector(basis, mass)(values)


def _fit_sizes(h1: HybridBasis, h2: HybridBasis, cfg, explicit):
    sizes = []
    for key, a, b in (("k_lb", h1.k_lb, h2.k_lb), ("k_elas", h1.k_elastic, h2.k_elastic)):
        if key in explicit:
            want = getattr(cfg, key)
            if want > min(a, b):
                raise DimensionMismatch(f"{key}={want} exceeds the cached bases ({a}, {b})")
        else:
            if a != b:
                raise DimensionMismatch(f"caches disagree on {key}: {a} vs {b}")
            want = a
        sizes.append(want)
    return tuple(sizes)


def _config_echo(cfg: PipelineConfig) -> dict:
    return {
        "config.k_lb": np.int64(cfg.k_lb),
        "config.k_elas": np.int64(cfg.k_elas),
        "config.lambda_lb": np.float64(cfg.lambda_lb),
        "config.lambda_elas": np.float64(cfg.lambda_elas),
        "config.bending_weight": np.float64(cfg.bending_weight),
        "config.seed": np.int64(cfg.seed),
        "config.descriptor": np.frombuffer(cfg.descriptor.encode("utf-8"), np.uint8),
    }


def _map_tensors(h: HybridMap, echo) -> dict:
    out = {"C_lb": h.lb}
    if h.elastic.size:
        out["C_elas"] = h.elastic
    out.update(echo)
    return out


def match_bases(h1: HybridBasis, h2: HybridBasis, d1, d2, cfg: PipelineConfig) -> HybridMap:
    """Descriptor-driven hybrid map from full per-vertex descriptor matrices."""
    lb1, lb2 = h1.lb, h2.lb
    lb = (_project(d1, lb1, h1.mesh), _project(d2, lb2, h2.mesh), lb1.eigenvalues, lb2.eigenvalues)
    el = None
    if h1.elastic is not None and h2.elastic is not None:
        e1, e2 = h1.elastic, h2.elastic
        el = (
            _project(d1, e1, h1.mesh),
            _project(d2, e2, h2.mesh),
            e1.eigenvalues,
            e2.eigenvalues,
            space_of(e1),
            space_of(e2),
        )
    return solve_hybrid(lb, el, cfg.lambda_lb, cfg.lambda_elas)


def cmd_match(args):
    cfg, explicit = resolve_config(args)
    full1, full2 = basis_from_tensors(read_fmb(args.cache1)), basis_from_tensors(read_fmb(args.cache2))
    k_lb, k_el = _fit_sizes(full1, full2, cfg, explicit)
    ext1 = ext2 = None
    if cfg.descriptor.startswith("external:"):
        paths = cfg.descriptor.split(":", 1)[1].split(",")
        if len(paths) != 2:
            raise ValueError("external descriptors need two files: external:PATH1,PATH2")
        ext1, ext2 = paths
    d1 = _descriptor_values(cfg.descriptor.split(":")[0], full1, args.mesh1, ext1)
    d2 = _descriptor_values(cfg.descriptor.split(":")[0], full2, args.mesh2, ext2)
    h = match_bases(full1.truncate(k_lb, k_el), full2.truncate(k_lb, k_el), d1, d2, cfg)
    write_fmb(args.output, _map_tensors(h, _config_echo(dataclasses.replace(cfg, k_lb=k_lb, k_elas=k_el))))
    print(args.output)


# ------------------------------------------------------------ refine/convert


def read_map(path) -> tuple[HybridMap, dict]:
    data = read_fmb(path)
    if "C_lb" not in data:
        raise KeyError(f"{path}: no C_lb block")
    h = HybridMap(data["C_lb"], data.get("C_elas", np.zeros((0, 0))))
    echo = {k: v for k, v in data.items() if k.startswith("config.")}
    return h, echo


def parse_sizes(text):
    """``"20+10:100+100"`` -> ``[(20, 10), (100, 100)]``; an empty string gives ``[]``."""
    out = []
    for token in filter(None, (t.strip() for t in str(text).replace(",", ":").split(":"))):
        try:
            a, b = token.split("+")
            out.append((int(a), int(b)))
        except ValueError:
            raise ScheduleError(f"bad size {token!r}; expected K_LB+K_ELAS") from None
    return out


def expand_schedule(current, waypoints, step=10):
    """Refinement sizes from ``current`` through every waypoint in increments of ``step``."""
    out, cur = [], tuple(current)
    for wp in waypoints:
        if tuple(wp) == cur:
            continue
        out.extend(make_schedule(cur, wp, step))
        cur = tuple(wp)
    return out


def cmd_refine(args):
    cfg, _ = resolve_config(args)
    h, echo = read_map(args.map)
    h1, h2 = basis_from_tensors(read_fmb(args.cache1)), basis_from_tensors(read_fmb(args.cache2))
    current = (h.lb.shape[1], h.elastic.shape[1] if h.elastic.size else 0)
    schedule = expand_schedule(current, parse_sizes(cfg.schedule), args.step)
    if schedule:
        h = zoomout_hybrid(h, h1, h2, schedule)
    write_fmb(args.output, _map_tensors(h, echo))
    print(args.output)


def _match_basis_to_map(h: HybridMap, hb: HybridBasis, side) -> HybridBasis:
    k_lb = h.lb.shape[1 - side]
    k_el = h.elastic.shape[1 - side] if h.elastic.size else 0
    if k_lb > hb.k_lb or k_el > hb.k_elastic:
        raise DimensionMismatch(f"map needs {k_lb}+{k_el} functions, cache has {hb.k_lb}+{hb.k_elastic}")
    return hb.truncate(k_lb, k_el)


def cmd_convert(args):
    cfg, _ = resolve_config(args)
    h, _ = read_map(args.map)
    h1 = _match_basis_to_map(h, basis_from_tensors(read_fmb(args.cache1)), 0)
    h2 = _match_basis_to_map(h, basis_from_tensors(read_fmb(args.cache2)), 1)
    p2p = extract_p2p_hybrid(h, h1, h2)
    save_correspondence(p2p, args.output, cfg.indexing)
    print(args.output)


# --------------------------------------------------------------- GT / eval


def _geodesic_cache(mesh: Mesh):
    if "FMB_CACHE_DIR" not in os.environ:
        return GeodesicCache(mesh), None
    path = cache_dir() / f"{mesh.content_hash()[:20]}.geo.fmb"
    return GeodesicCache.load(mesh, path), path


def recover_gt(mesh1, mesh2, gt, partitions, cfg: PipelineConfig, tensors1=None, tensors2=None):
    """Encode a ground-truth map per block, decode it jointly, and score each partition.

    Returns a list of ``(k_lb, k_elas, error)`` with the error from
    :func:`~hybridfm.evaluation.mean_geodesic_error` (times 100 when normalized).
    """
    k_lb = max(p[0] for p in partitions)
    k_el = max(p[1] for p in partitions)
    if tensors1 is None:
        tensors1 = compute_basis_tensors(mesh1, k_lb, k_el, cfg.bending_weight, cfg.seed)
    if tensors2 is None:
        tensors2 = compute_basis_tensors(mesh2, k_lb, k_el, cfg.bending_weight, cfg.seed)
    full1, full2 = basis_from_tensors(tensors1), basis_from_tensors(tensors2)
    geo, geo_path = _geodesic_cache(mesh1)
    rows = []
    for a, b in partitions:
        b1, b2 = full1.truncate(a, b), full2.truncate(a, b)
        p2p = extract_p2p_hybrid(encode_gt_hybrid(gt, b1, b2), b1, b2)
        err = pointwise_errors(p2p, gt, mesh1, cfg.normalize, geo).mean()
        rows.append((a, b, 100.0 * err if cfg.normalize else float(err)))
    if geo_path is not None:
        geo.save(geo_path)
    return rows


def cmd_recover_gt(args):
    cfg, _ = resolve_config(args)
    mesh1, mesh2 = load_mesh(args.mesh1), load_mesh(args.mesh2)
    gt = load_correspondence(args.gt, cfg.indexing, n_source=mesh1.n_vertices)
    if len(gt) != mesh2.n_vertices:
        raise DimensionMismatch(f"ground truth has {len(gt)} entries, shape 2 has {mesh2.n_vertices} vertices")
    partitions = parse_sizes(args.sweep) if args.sweep else [(cfg.k_lb, cfg.k_elas)]
    if not partitions or any(a < 0 or b < 0 or a + b == 0 for a, b in partitions):
        raise ValueError("every partition needs a positive total size")
    t1 = t2 = None
    if "FMB_CACHE_DIR" in os.environ:
        k_lb, k_el = max(p[0] for p in partitions), max(p[1] for p in partitions)
        t1, t2 = cached_basis(mesh1, cfg, k_lb, k_el), cached_basis(mesh2, cfg, k_lb, k_el)
    rows = recover_gt(mesh1, mesh2, gt, partitions, cfg, t1, t2)
    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k_lb", "k_elas", "geo_err_x100"])
        for a, b, e in rows:
            w.writerow([a, b, f"{e:.17g}"])


def parse_thresholds(text):
    """``"start:stop:num"`` for an evenly spaced sweep, or a comma-separated list."""
    if text is None:
        return DEFAULT_THRESHOLDS
    if ":" in text:
        start, stop, num = text.split(":")
        return np.linspace(float(start), float(stop), int(num))
    return np.array([float(t) for t in text.split(",")])


def cmd_eval(args):
    cfg, _ = resolve_config(args)
    mesh1 = load_mesh(args.mesh1)
    pred = load_correspondence(args.pred, cfg.indexing, n_source=mesh1.n_vertices)
    gt = load_correspondence(args.gt, cfg.indexing, n_source=mesh1.n_vertices)
    geo, geo_path = _geodesic_cache(mesh1)
    err = pointwise_errors(pred, gt, mesh1, cfg.normalize, geo)
    mean = float(err.mean()) * (100.0 if cfg.normalize else 1.0)
    curve = pck_curve(pred, gt, mesh1, parse_thresholds(args.thresholds), cache=geo)
    if geo_path is not None:
        geo.save(geo_path)
    name = args.name or pathlib.Path(args.pred).stem
    prefix = pathlib.Path(args.output)
    summary = prefix.with_name(prefix.name + "_summary.csv")
    with open(summary, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair", "mean_geo_x100"])
        w.writerow([name, f"{mean:.17g}"])
        if not is_connected(mesh1):
            unreachable = int(np.isinf(err).sum())
            w.writerow(["warning", f"mesh is disconnected; {unreachable} matches have infinite error"])
    write_pck_csv(curve, prefix.with_name(prefix.name + "_pck.csv"))
    print(summary)


class _open_out:
    """Context manager writing to a path, or stdout for ``-``."""

    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path in (None, "-"):
            self.fh = None
            return sys.stdout
        self.fh = open(self.path, "w", newline="", encoding="utf-8")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()


# -------------------------------------------------------------------- main


def _add_common(p, *keys):
    p.add_argument("--config", help="key = value file; flags override it")
    flags = {
        "k_lb": dict(type=int, help="Laplace-Beltrami basis size (default 140)"),
        "k_elas": dict(type=int, help="elastic basis size (default 60)"),
        "lambda_lb": dict(type=float, help="LB regularization weight (default 1e-3)"),
        "lambda_elas": dict(type=float, help="elastic regularization weight (default 5e-4)"),
        "bending_weight": dict(type=float, help="shell bending weight (default 1e-2)"),
        "descriptor": dict(help="wks, hks, xyz or external:PATH1,PATH2 (default wks)"),
        "seed": dict(type=int, help="eigensolver start-vector seed (default 42)"),
        "schedule": dict(help='refinement waypoints "a+b:c+d"'),
        "normalize": dict(action=argparse.BooleanOptionalAction, help="divide geodesics by sqrt(area) (default on)"),
        "one_based": dict(action="store_const", const=True, help="correspondence files are 1-based"),
    }
    for key in keys:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, **flags[key])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridfm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="compute and cache LB and elastic bases of a mesh")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", help="cache file (default: under FMB_CACHE_DIR)")
    _add_common(p, "k_lb", "k_elas", "bending_weight", "seed")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("match", help="solve the hybrid functional map between two cached shapes")
    p.add_argument("cache1")
    p.add_argument("cache2")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mesh1", help="mesh of shape 1 (xyz descriptors)")
    p.add_argument("--mesh2", help="mesh of shape 2 (xyz descriptors)")
    _add_common(p, "k_lb", "k_elas", "lambda_lb", "lambda_elas", "descriptor")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("refine", help="hybrid ZoomOut refinement of a map")
    p.add_argument("map")
    p.add_argument("cache1")
    p.add_argument("cache2")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--step", type=int, default=10, help="per-block size increment (default 10)")
    _add_common(p, "schedule")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("convert", help="point map from a functional map")
    p.add_argument("map")
    p.add_argument("cache1")
    p.add_argument("cache2")
    p.add_argument("-o", "--output", required=True)
    _add_common(p, "one_based")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("recover-gt", help="ground-truth recovery error per basis partition")
    p.add_argument("mesh1")
    p.add_argument("mesh2")
    p.add_argument("gt", help="map from shape 2 vertices to shape 1 vertices")
    p.add_argument("--sweep", help='partitions, e.g. "60+0,40+20"')
    p.add_argument("-o", "--output", default="-")
    _add_common(p, "k_lb", "k_elas", "bending_weight", "seed", "normalize", "one_based")
    p.set_defaults(func=cmd_recover_gt)

    p = sub.add_parser("eval", help="mean geodesic error and PCK curve")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("mesh1")
    p.add_argument("-o", "--output", required=True, help="prefix for _summary.csv and _pck.csv")
    p.add_argument("--thresholds", help='"start:stop:num" or a comma list (default 0:0.25:101)')
    p.add_argument("--name", help="pair label in the summary")
    _add_common(p, "normalize", "one_based")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except (HybridFMError, OSError, ValueError, KeyError) as exc:
        print(f"hybridfm {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
