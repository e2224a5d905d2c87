"""File formats: binary stacks/volumes, surface CSV, PGM, PLY, run manifests.

Binary arrays use a short text header of ``key=value`` lines closed by an
``end_header`` line, followed by little-endian float32 data in C order.
Complex arrays interleave ``(re, im)``. Stacks are image-major, then
azimuth, then range; volumes are x, then y, then z.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from .forward import ReflectivityVolume, SARStack
from .geometry import AcquisitionGeometry, GroundGrid, RadarGrid
from .surface import ElevationMap

MAGIC = "tomosurf-array 1"
_END = "end_header"


class FormatError(ValueError):
    """Malformed input file."""


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def geometry_hash(geom: AcquisitionGeometry) -> str:
    return hashlib.sha256(canonical_json(dataclasses.asdict(geom)).encode()).hexdigest()[:16]


def _fmt_value(v) -> str:
    if isinstance(v, (tuple, list, np.ndarray)):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_array(path, array: np.ndarray, meta: dict | None = None):
    """Write a real or complex array with a text header."""
    a = np.asarray(array)
    kind = "complex" if np.iscomplexobj(a) else "magnitude"
    head = {"kind": kind, "shape": a.shape}
    head.update(meta or {})
    lines = [MAGIC] + [f"{k}={_fmt_value(v)}" for k, v in head.items()] + [_END]
    if kind == "complex":
        body = np.empty(a.shape + (2,), dtype="<f4")
        body[..., 0] = a.real
        body[..., 1] = a.imag
    else:
        body = a.astype("<f4")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        f.write(np.ascontiguousarray(body).tobytes())


def read_array(path):
    """Return ``(array, header)``; complex files come back as complex64."""
    with open(path, "rb") as f:
        raw = f.read()
    end = raw.find(("\n" + _END + "\n").encode())
    if not raw.startswith(MAGIC.encode()) or end < 0:
        raise FormatError(f"{path}: not a tomosurf array file")
    head = {}
    for line in raw[:end].decode("ascii").splitlines()[1:]:
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: bad header line {line!r}")
        head[key] = val
    shape = tuple(int(s) for s in head["shape"].split(",") if s)
    kind = head.get("kind")
    body = raw[end + len(_END) + 2:]
    count = int(np.prod(shape)) * (2 if kind == "complex" else 1)
    if kind not in ("complex", "magnitude") or len(body) != 4 * count:
        raise FormatError(f"{path}: body size does not match header")
    data = np.frombuffer(body, dtype="<f4")
    if kind == "complex":
        data = data.reshape(shape + (2,))
        arr = data[..., 0] + 1j * data[..., 1]
        arr = arr.astype(np.complex64)
    else:
        arr = data.reshape(shape).astype(np.float32)
    return arr, head


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v)


def grid_meta(grid: GroundGrid) -> dict:
    return {"grid_shape": grid.shape, "grid_spacing": grid.spacing, "grid_origin": grid.origin}


def grid_from_meta(head: dict) -> GroundGrid:
    return GroundGrid(tuple(int(v) for v in head["grid_shape"].split(",")),
                      _floats(head["grid_spacing"]), _floats(head["grid_origin"]))


def write_stack(path, stack: SARStack, geom: AcquisitionGeometry):
    r = stack.rgrid
    meta = {"num_images": stack.num_images, "azimuth_spacing": r.azimuth_spacing,
            "range_spacing": r.range_spacing, "range_origin": r.range_origin,
            "azimuth_origin": r.azimuth_origin, "geometry_hash": geometry_hash(geom)}
    write_array(path, stack.data, meta)


def read_stack(path, geom: AcquisitionGeometry | None = None) -> SARStack:
    data, head = read_array(path)
    if data.ndim != 3 or head.get("kind") != "complex":
        raise FormatError(f"{path}: not a complex stack")
    if geom is not None and head.get("geometry_hash") != geometry_hash(geom):
        raise FormatError(f"{path}: stack was written for a different geometry")
    rgrid = RadarGrid(data.shape[1], data.shape[2], float(head["azimuth_spacing"]),
                      float(head["range_spacing"]), float(head["range_origin"]),
                      float(head.get("azimuth_origin", 0.0)))
    return SARStack(data.astype(complex), rgrid)


def write_volume(path, volume, grid: GroundGrid | None = None, magnitude: bool = False):
    """Write a volume (``ReflectivityVolume`` or plain array) on ``grid``."""
    if isinstance(volume, ReflectivityVolume):
        grid, values = volume.grid, volume.values
    else:
        values = np.asarray(volume)
    if magnitude:
        values = np.abs(values)
    write_array(path, values, grid_meta(grid))


def read_volume(path) -> ReflectivityVolume:
    data, head = read_array(path)
    grid = grid_from_meta(head)
    dtype = complex if np.iscomplexobj(data) else float
    return ReflectivityVolume(data.astype(dtype), grid)


def write_surface_csv(path, emap: ElevationMap):
    """One row per column: ``x,y,z,valid`` in meters."""
    grid = emap.grid
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["x", "y", "z", "valid"])
        for x, y, z, v in zip(X.ravel(), Y.ravel(), emap.heights.ravel(), emap.mask.ravel()):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(z)), int(v)])


def read_surface_csv(path, grid: GroundGrid) -> ElevationMap:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    n = grid.shape[0] * grid.shape[1]
    if len(rows) != n:
        raise FormatError(f"{path}: expected {n} rows, found {len(rows)}")
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    xs = np.array([float(r["x"]) for r in rows])
    ys = np.array([float(r["y"]) for r in rows])
    if not (np.allclose(xs, X.ravel()) and np.allclose(ys, Y.ravel())):
        raise FormatError(f"{path}: column positions do not match the grid")
    z = np.array([float(r["z"]) for r in rows]).reshape(grid.shape[:2])
    valid = np.array([int(r.get("valid", 1)) for r in rows], dtype=bool).reshape(grid.shape[:2])
    return ElevationMap(z, grid, None if valid.all() else valid)


def pgm_scaling(grid: GroundGrid) -> tuple[float, float]:
    """``(offset, scale)`` with ``z = offset + scale * value``."""
    span = grid.z_top - grid.origin[2]
    return grid.origin[2], (span / 65535.0 if span > 0 else 1.0)


def write_pgm(path, emap: ElevationMap):
    """16-bit binary PGM, one pixel per column (rows = y, columns = x).

    Heights map affinely onto ``0..65535`` between the grid bottom and top;
    the scaling is repeated in a header comment.
    """
    offset, scale = pgm_scaling(emap.grid)
    vals = np.clip(np.rint((emap.heights - offset) / scale), 0, 65535).astype(">u2")
    img = vals.T
    h, w = img.shape
    head = f"P5\n# z = {float(offset)!r} + {float(scale)!r} * value\n{w} {h}\n65535\n"
    with open(path, "wb") as f:
        f.write(head.encode("ascii"))
        f.write(np.ascontiguousarray(img).tobytes())


def read_pgm(path):
    """Return ``(image, offset, scale)``; ``image`` is indexed ``[y, x]``."""
    with open(path, "rb") as f:
        raw = f.read()
    tokens, comments, pos = [], [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            end = raw.index(b"\n", pos)
            comments.append(raw[pos + 1:end].decode().strip())
            pos = end + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode())
        pos = end
    pos += 1
    if tokens[0] != "P5" or int(tokens[3]) != 65535:
        raise FormatError(f"{path}: expected a 16-bit P5 image")
    w, h = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(raw[pos:pos + 2 * w * h], dtype=">u2").reshape(h, w)
    offset, scale = 0.0, 1.0
    for c in comments:
        if c.startswith("z ="):
            parts = c.replace("z =", "").replace("* value", "").split("+")
            offset, scale = float(parts[0]), float(parts[1])
    return img, offset, scale


def _height_colors(z: np.ndarray) -> np.ndarray:
    lo, hi = float(z.min()), float(z.max())
    t = (z - lo) / (hi - lo) if hi > lo else np.zeros_like(z)
    # blue (low) -> red (high)
    rgb = np.stack([255 * t, 64 + 0 * t, 255 * (1 - t)], axis=-1)
    return np.rint(rgb).astype(int)


def write_ply(path, emap: ElevationMap):
    """ASCII PLY point cloud with one height-coloured vertex per column."""
    grid = emap.grid
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    z = emap.heights.ravel()
    col = _height_colors(z)
    n = z.size
    lines = ["ply", "format ascii 1.0", f"element vertex {n}",
             "property float x", "property float y", "property float z",
             "property uchar red", "property uchar green", "property uchar blue",
             "end_header"]
    for x, y, zz, c in zip(X.ravel(), Y.ravel(), z, col):
        lines.append(f"{float(x)!r} {float(y)!r} {float(zz)!r} {c[0]} {c[1]} {c[2]}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_iteration(root: Path, rec):
    """Checkpoint one REDRESS round under ``root/iter_k``."""
    d = Path(root) / f"iter_{rec.k}"
    d.mkdir(parents=True, exist_ok=True)
    write_volume(d / "volume.bin", rec.volume)
    write_volume(d / "mu.bin", rec.mu, rec.volume.grid)
    write_surface_csv(d / "surface.csv", rec.surface)


def write_redress_manifest(root: Path, params, history):
    lines = [f"{k}={_fmt_value(v)}" for k, v in _flatten(dataclasses.asdict(params)).items()]
    for rec in history:
        lines.append(f"iter_{rec.k}.energy={float(rec.energy)!r}")
        lines.append(f"iter_{rec.k}.objective={float(rec.objective)!r}")
        lines.append(f"iter_{rec.k}.kkt={float(rec.kkt)!r}")
        lines.append(f"iter_{rec.k}.solver_iterations={rec.iterations}")
    Path(root).mkdir(parents=True, exist_ok=True)
    (Path(root) / "manifest.txt").write_text("\n".join(lines) + "\n")


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


def write_dimacs(path, net):
    Path(path).write_text(net.to_dimacs())
