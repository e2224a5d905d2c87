"""Run configuration: one YAML (or JSON) file per pipeline run.

Every block is optional; missing keys take the defaults below and unknown
keys are rejected. Relative paths are resolved against the config file's
directory.
"""
from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .forward import Box, SceneSpec
from .geometry import AcquisitionGeometry, GroundGrid
from .redress import RedressParams
from .sparse import SolverParams


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


DEFAULTS = {
    "geometry": {
        "n_images": None,
        "baselines": None,
        "baseline_span": 1300.0,
        "wavelength": 0.031,
        "incidence_rad": 0.6,
        "reference_range": 6.0e5,
    },
    "grid": {"shape": [64, 64, 32], "spacing": [1.0, 1.0, 1.0], "origin": [0.0, 0.0, 0.0]},
    "scene": {
        "boxes": [],
        "ground_power": 1.0,
        "facade_power": 4.0,
        "roof_power": 1.0,
        "density": float("inf"),
        "sigma": None,
        "snr_db": None,
    },
    "estimator": {
        "method": "beamforming",
        "window_size": 7,
        "window_std": 1.5,
        "loading": 1e-3,
        "order": 2,
        "mu": None,
        "mu_rel": 0.1,
        "max_iterations": 300,
        "tolerance": 1e-6,
        "accelerated": True,
        "safety": 0.95,
    },
    "segmentation": {"beta": 0.5, "shadow_threshold": 0.95, "fill_shadows": False,
                     "betas": [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]},
    "redress": {"n": 5, "mu0": None, "mu0_rel": 0.1, "b": None, "b_rel": 0.1,
                "warm_start": True, "checkpoints": True},
    "io": {"seed": 0, "stack": "stack.bin", "truth": "truth.csv", "volume": "volume.bin",
           "surface": "surface.csv", "formats": ["csv", "pgm", "ply"], "dimacs": False},
}

_PATH_KEYS = ("stack", "truth", "volume", "surface")


def _merge(defaults: dict, given: dict, where: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown key '{where}{key}'")
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}{key}' must be a mapping")
            out[key] = _merge(defaults[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    """Parse and validate a config file; returns the merged dictionary."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        given = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(given, dict):
        raise ConfigError("config root must be a mapping")
    if isinstance(given.get("scene"), str):
        # the scene may live in its own file
        scene_path = path.parent / given["scene"]
        try:
            given["scene"] = yaml.safe_load(scene_path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"'scene': cannot read scene file {scene_path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"'scene': scene file {scene_path} is not valid YAML") from exc
    cfg = _merge(DEFAULTS, given, "")
    cfg["_base"] = str(path.parent.resolve())
    validate(cfg)
    return cfg


def default_config() -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    cfg["_base"] = str(Path.cwd())
    return cfg


def resolve(cfg: dict, key: str, out_dir=None) -> Path:
    """Path of an ``io`` entry; bare names live in ``out_dir`` when given."""
    p = Path(cfg["io"][key])
    if p.is_absolute():
        return p
    if out_dir is not None and len(p.parts) == 1:
        return Path(out_dir) / p
    return Path(cfg["_base"]) / p


def validate(cfg: dict):
    try:
        geometry(cfg)
        grid(cfg)
        scene(cfg)
        solver(cfg)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    seed = cfg["io"]["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("'io.seed' must be an integer")
    if cfg["segmentation"]["beta"] < 0:
        raise ConfigError("'segmentation.beta' must be >= 0")


def geometry(cfg: dict) -> AcquisitionGeometry:
    g = cfg["geometry"]
    if g["baselines"] is not None:
        baselines = tuple(float(b) for b in g["baselines"])
    else:
        n = g["n_images"] or 12
        span = float(g["baseline_span"])
        baselines = tuple(-span / 2 + span * i / (n - 1) for i in range(n)) if n > 1 else (0.0,)
    if g["n_images"] is not None and g["n_images"] != len(baselines):
        raise ConfigError("'geometry.n_images' does not match the number of baselines")
    try:
        return AcquisitionGeometry(baselines, float(g["wavelength"]), float(g["incidence_rad"]),
                                   float(g["reference_range"]))
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def grid(cfg: dict) -> GroundGrid:
    g = cfg["grid"]
    try:
        return GroundGrid(tuple(g["shape"]), tuple(g["spacing"]), tuple(g["origin"]))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def scene(cfg: dict) -> SceneSpec:
    s = cfg["scene"]
    boxes = []
    for i, b in enumerate(s["boxes"]):
        try:
            boxes.append(Box(**{k: float(v) for k, v in b.items()}))
        except TypeError as exc:
            raise ConfigError(f"'scene.boxes[{i}]': {exc}") from exc
    try:
        return SceneSpec(tuple(boxes), float(s["ground_power"]), float(s["facade_power"]),
                         float(s["roof_power"]), float(s["density"]),
                         float(s["sigma"] or 0.0), cfg["io"]["seed"])
    except ValueError as exc:
        raise ConfigError(f"scene: {exc}") from exc


def solver(cfg: dict) -> SolverParams:
    e = cfg["estimator"]
    try:
        return SolverParams(int(e["max_iterations"]), float(e["tolerance"]),
                            bool(e["accelerated"]), float(e["safety"]))
    except ValueError as exc:
        raise ConfigError(f"estimator: {exc}") from exc


def redress_params(cfg: dict, mu_scale: float) -> RedressParams:
    """REDRESS settings; ``*_rel`` entries are fractions of ``mu_scale``."""
    r = cfg["redress"]
    mu0 = r["mu0"] if r["mu0"] is not None else r["mu0_rel"] * mu_scale
    b = r["b"] if r["b"] is not None else r["b_rel"] * mu_scale
    try:
        return RedressParams(int(r["n"]), float(mu0), float(b), float(cfg["segmentation"]["beta"]),
                             solver(cfg), bool(r["warm_start"]))
    except ValueError as exc:
        raise ConfigError(f"redress: {exc}") from exc
