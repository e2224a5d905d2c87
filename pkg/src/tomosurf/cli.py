"""Command-line front end: ``tomosurf <command> --config run.yaml``.

Commands read and write the file formats of :mod:`tomosurf.io` and print
``key=value`` summary lines. Exit codes: 0 success, 2 config error,
3 I/O error, 4 unsupported feature, 5 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import config as C
from . import io
from .estimators import METHODS, profiles_to_ground, spectral_volume
from .evaluation import error_report, report_csv, summary_table
from .forward import ReflectivityVolume, make_scene, simulate_stack, sigma_for_snr, tomo_operator
from .geometry import radar_grid_covering
from .maxflow import max_flow
from .redress import redress
from .segmentation import build_graph, extract_surface, remove_shadows
from .sparse import DivergenceError, invert_cs_per_cell, invert_l1_3d
from .surface import geometric_shadow

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_UNSUPPORTED, EXIT_NUMERIC = 0, 2, 3, 4, 5

INVERT_METHODS = METHODS + ("cs", "l1-3d")
UNSUPPORTED = {"wsf": "WSF/NSF", "nsf": "WSF/NSF", "spice": "SPICE"}


class Unsupported(Exception):
    pass


def _emit(out, **kv):
    out = out or sys.stdout
    for k, v in kv.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k}={v}", file=out)


def _hashes(paths) -> dict:
    return {f"{Path(p).stem}_sha256": io.sha256_file(p) for p in paths}


def _config_hash(cfg: dict) -> str:
    body = io.canonical_json({k: v for k, v in cfg.items() if k != "_base"})
    return hashlib.sha256(body.encode()).hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg: dict, outputs):
    lines = [f"command={command}", f"seed={cfg['io']['seed']}",
             f"config_sha256={_config_hash(cfg)}"]
    for p in outputs:
        lines.append(f"{Path(p).name}={io.sha256_file(p)}")
    (out_dir / f"manifest_{command}.txt").write_text("\n".join(lines) + "\n")


def _mu_scale(stack, geom, rgrid, grid) -> float:
    """``2 |Phi^H v|_inf``: the smallest uniform mu that zeroes the solution."""
    op = tomo_operator(geom, rgrid, grid)
    return float(2 * np.abs(op.adjoint(stack.data)).max())


def cmd_simulate(cfg, out_dir: Path, args, out=None):
    geom, grid, spec = C.geometry(cfg), C.grid(cfg), C.scene(cfg)
    rgrid = radar_grid_covering(geom, grid)
    vol, truth = make_scene(spec, grid, geom)
    seed = cfg["io"]["seed"]
    sigma = spec.sigma
    if cfg["scene"]["snr_db"] is not None:
        sigma = sigma_for_snr(simulate_stack(vol, geom, rgrid, 0.0, seed), float(cfg["scene"]["snr_db"]))
    stack = simulate_stack(vol, geom, rgrid, sigma, seed)
    paths = [out_dir / "stack.bin", out_dir / "truth.csv", out_dir / "scene.bin"]
    io.write_stack(paths[0], stack, geom)
    io.write_surface_csv(paths[1], truth)
    io.write_volume(paths[2], vol)
    _write_manifest(out_dir, "simulate", cfg, paths)
    _emit(out, sigma=sigma, num_images=geom.num_images, **_hashes(paths))


def _load_stack(cfg, out_dir, geom):
    return io.read_stack(C.resolve(cfg, "stack", out_dir), geom)


def cmd_invert(cfg, out_dir: Path, args, out=None):
    method = (args.method or cfg["estimator"]["method"]).lower()
    if method in UNSUPPORTED:
        raise Unsupported(f"{UNSUPPORTED[method]} is outside the scope of this toolkit")
    if method not in INVERT_METHODS:
        raise C.ConfigError(f"'estimator.method': unknown method {method!r}")
    geom, grid = C.geometry(cfg), C.grid(cfg)
    stack = _load_stack(cfg, out_dir, geom)
    rgrid = stack.rgrid
    e = cfg["estimator"]
    outputs = []
    info = None
    if method in METHODS:
        vol = spectral_volume(stack, geom, rgrid, grid, method, int(e["window_size"]),
                              float(e["window_std"]), float(e["loading"]), int(e["order"]))
    else:
        mu = e["mu"] if e["mu"] is not None else e["mu_rel"] * _mu_scale(stack, geom, rgrid, grid)
        params = C.solver(cfg)
        if method == "l1-3d":
            vol, info = invert_l1_3d(stack, geom, rgrid, grid, float(mu), params, return_info=True)
        else:
            prof, info = invert_cs_per_cell(stack, geom, rgrid, grid.z, float(mu), params,
                                            return_info=True)
            vol = ReflectivityVolume(profiles_to_ground(prof, grid.z, geom, rgrid, grid), grid)
        cpath = out_dir / "volume_complex.bin"
        io.write_volume(cpath, vol)
        outputs.append(cpath)
        _emit(out, mu=float(mu), iterations=info["iterations"], kkt=info["kkt"])
        if args.trace:
            tpath = out_dir / "trace.csv"
            tpath.write_text("iteration,objective\n" + "".join(
                f"{i},{float(f)!r}\n" for i, f in enumerate(info["objective"])))
            outputs.append(tpath)
    vpath = C.resolve(cfg, "volume", out_dir)
    io.write_volume(vpath, vol, magnitude=True)
    outputs.insert(0, vpath)
    _write_manifest(out_dir, "invert", cfg, outputs)
    _emit(out, method=method, **_hashes(outputs))


def _segment(magnitudes, geom, grid, cfg, out_dir, dump=False):
    s = cfg["segmentation"]
    net = build_graph(magnitudes, geom, grid, float(s["beta"]))
    if dump:
        io.write_dimacs(out_dir / "graph.dimacs", net)
    cut = max_flow(net)
    emap = extract_surface(cut, grid)
    if s["fill_shadows"]:
        emap = remove_shadows(emap, geom, magnitudes, float(s["shadow_threshold"]))
    return emap, cut.flow


def cmd_segment(cfg, out_dir: Path, args, out=None):
    geom, grid = C.geometry(cfg), C.grid(cfg)
    vol = io.read_volume(C.resolve(cfg, "volume", out_dir))
    if vol.grid.shape != grid.shape:
        raise C.ConfigError("'grid.shape' does not match the volume file")
    emap, flow = _segment(vol.magnitude, geom, vol.grid, cfg, out_dir, bool(cfg["io"]["dimacs"]))
    spath = C.resolve(cfg, "surface", out_dir)
    io.write_surface_csv(spath, emap)
    _write_manifest(out_dir, "segment", cfg, [spath])
    _emit(out, beta=float(cfg["segmentation"]["beta"]), energy=float(flow), **_hashes([spath]))


def cmd_redress(cfg, out_dir: Path, args, out=None):
    geom, grid = C.geometry(cfg), C.grid(cfg)
    stack = _load_stack(cfg, out_dir, geom)
    params = C.redress_params(cfg, _mu_scale(stack, geom, stack.rgrid, grid))
    ckpt = out_dir / "redress" if cfg["redress"]["checkpoints"] else None
    vol, emap, hist = redress(stack, geom, stack.rgrid, grid, params, checkpoint_dir=ckpt,
                              return_history=True)
    vpath, spath = C.resolve(cfg, "volume", out_dir), C.resolve(cfg, "surface", out_dir)
    io.write_volume(vpath, vol, magnitude=True)
    io.write_surface_csv(spath, emap)
    _write_manifest(out_dir, "redress", cfg, [vpath, spath])
    for rec in hist:
        _emit(out, **{f"iter_{rec.k}_energy": float(rec.energy), f"iter_{rec.k}_kkt": float(rec.kkt)})
    _emit(out, **_hashes([vpath, spath]))


def cmd_eval(cfg, out_dir: Path, args, out=None):
    geom, grid = C.geometry(cfg), C.grid(cfg)
    est = io.read_surface_csv(C.resolve(cfg, "surface", out_dir), grid)
    truth = io.read_surface_csv(C.resolve(cfg, "truth", out_dir), grid)
    shadow = geometric_shadow(truth, geom)
    label = args.label or cfg["estimator"]["method"]
    rep = error_report(est, truth, exclude=shadow)
    row = {"estimator": label, "mean_error_m": rep.mean_error,
           "beta": float(cfg["segmentation"]["beta"]), "masked_fraction": rep.masked_fraction}
    cpath, tpath = out_dir / "report.csv", out_dir / "summary.txt"
    cpath.write_text(report_csv([row]))
    tpath.write_text(summary_table([row]))
    _write_manifest(out_dir, "eval", cfg, [cpath, tpath])
    _emit(out, mean_error_m=rep.mean_error, masked_fraction=rep.masked_fraction,
          masked_error_m=rep.masked_error)


def cmd_export(cfg, out_dir: Path, args, out=None):
    grid = C.grid(cfg)
    emap = io.read_surface_csv(C.resolve(cfg, "surface", out_dir), grid)
    writers = {"csv": io.write_surface_csv, "pgm": io.write_pgm, "ply": io.write_ply}
    outputs = []
    for fmt in cfg["io"]["formats"]:
        if fmt not in writers:
            raise C.ConfigError(f"'io.formats': unknown export format {fmt!r}")
        p = out_dir / f"export.{fmt}"
        writers[fmt](p, emap)
        outputs.append(p)
    _write_manifest(out_dir, "export", cfg, outputs)
    _emit(out, **{f"{Path(p).name.replace('.', '_')}_sha256": io.sha256_file(p) for p in outputs})


COMMANDS = {"simulate": cmd_simulate, "invert": cmd_invert, "segment": cmd_segment,
            "redress": cmd_redress, "eval": cmd_eval, "export": cmd_export}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tomosurf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="run configuration (YAML or JSON)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--trace", action="store_true", help="write solver traces")
        sp.add_argument("--seed", type=int, help="override io.seed")
        if name == "invert":
            sp.add_argument("--method", help=f"one of {', '.join(INVERT_METHODS)}")
        if name == "eval":
            sp.add_argument("--label", help="estimator name for the report")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = C.load_config(args.config) if args.config else C.default_config()
        if args.seed is not None:
            cfg["io"]["seed"] = args.seed
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"error: cannot create {out_dir}: {exc.strerror}", file=sys.stderr)
            return EXIT_IO
        if not hasattr(args, "method"):
            args.method = None
        if not hasattr(args, "label"):
            args.label = None
        COMMANDS[args.command](cfg, out_dir, args)
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Unsupported as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (io.FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DivergenceError, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
