"""File formats: JSON configs, XYZ/JSON point clouds, CSV spectra, OBJ meshes.

Floats are written with 17 significant digits so every double
round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .geometry import ParameterError, TileParams
from .tiling import PointCloud, TilingConfig

RUN_SCHEMA = "scd/run-config/1"
CLOUD_SCHEMA = "scd/point-cloud/1"
SPECTRUM_HEADER = ("kx", "ky", "kz", "re", "im", "intensity", "r")
RADIAL_HEADER = ("r_bin_lo", "r_bin_hi", "mass")


class SchemaError(ValueError):
    """Malformed input file; the message names the offending field or line."""


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    seed: int = 0
    args: dict = field(default_factory=dict)
    schema: str = RUN_SCHEMA

    def to_json(self) -> dict:
        return {"schema": self.schema, "command": self.command, "seed": self.seed, "args": self.args}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        if obj.get("schema") != RUN_SCHEMA:
            raise SchemaError(f"field 'schema': expected {RUN_SCHEMA!r}, got {obj.get('schema')!r}")
        for key in ("command", "seed"):
            if key not in obj:
                raise SchemaError(f"field {key!r} is missing")
        return cls(obj["command"], int(obj["seed"]), dict(obj.get("args", {})))


# --------------------------------------------------------------------------
# configs
# --------------------------------------------------------------------------

def read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_tiling_config(path) -> TilingConfig:
    obj = read_json(path)
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top-level value must be an object")
    try:
        return TilingConfig.from_json(obj)
    except (ParameterError, KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def load_tile_params(path) -> TileParams:
    obj = read_json(path)
    if isinstance(obj, dict) and obj.get("schema") == "scd/tiling-config/1":
        obj = obj.get("params", {})
    try:
        return TileParams.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# point clouds
# --------------------------------------------------------------------------

def cloud_to_xyz(cloud: PointCloud, run: RunConfig) -> str:
    meta = run.to_json()
    meta["r"] = cloud.r
    out = io.StringIO()
    out.write(f"{len(cloud)}\n")
    out.write(json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    for (x, y, z), m in zip(cloud.points, cloud.layer_index):
        out.write(f"{fmt(x)} {fmt(y)} {fmt(z)} {int(m)}\n")
    return out.getvalue()


def write_xyz(cloud: PointCloud, path, run: RunConfig) -> None:
    Path(path).write_text(cloud_to_xyz(cloud, run))


def read_xyz(path) -> tuple[PointCloud, RunConfig]:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2:
        raise SchemaError(f"{path}: line 1: expected a point count and a comment line")
    try:
        n = int(lines[0].strip())
    except ValueError as exc:
        raise SchemaError(f"{path}: line 1: point count is not an integer") from exc
    try:
        meta = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line 2: comment line is not run-config JSON") from exc
    if "r" not in meta:
        raise SchemaError(f"{path}: line 2: field 'r' is missing")
    run = RunConfig.from_json({k: v for k, v in meta.items() if k != "r"})
    body = lines[2:]
    if len(body) != n:
        raise SchemaError(f"{path}: header announces {n} points, found {len(body)}")
    pts = np.empty((n, 3))
    layer = np.empty(n, dtype=np.int64)
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != 4:
            raise SchemaError(f"{path}: line {i + 3}: expected 'x y z layer'")
        try:
            pts[i] = [float(t) for t in parts[:3]]
            layer[i] = int(parts[3])
        except ValueError as exc:
            raise SchemaError(f"{path}: line {i + 3}: {exc}") from exc
    return PointCloud.from_points(pts, float(meta["r"]), layer), run


def cloud_to_json(cloud: PointCloud, run: RunConfig) -> dict:
    return {
        "schema": CLOUD_SCHEMA,
        "run": run.to_json(),
        "r": cloud.r,
        "points": [[float(x), float(y), float(z), int(m)] for (x, y, z), m in zip(cloud.points, cloud.layer_index)],
    }


def read_cloud_json(path) -> tuple[PointCloud, RunConfig]:
    obj = read_json(path)
    if obj.get("schema") != CLOUD_SCHEMA:
        raise SchemaError(f"{path}: field 'schema': expected {CLOUD_SCHEMA!r}")
    for key in ("r", "points", "run"):
        if key not in obj:
            raise SchemaError(f"{path}: field {key!r} is missing")
    rows = np.asarray(obj["points"], dtype=float).reshape(-1, 4)
    return PointCloud.from_points(rows[:, :3], float(obj["r"]), rows[:, 3].astype(np.int64)), RunConfig.from_json(obj["run"])


def read_cloud(path) -> tuple[PointCloud, RunConfig]:
    p = Path(path)
    if p.suffix.lower() == ".json":
        return read_cloud_json(p)
    return read_xyz(p)


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------

def spectrum_csv(ks: np.ndarray, amps: np.ndarray, r: float) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SPECTRUM_HEADER)
    for k, a in zip(np.asarray(ks).reshape(-1, 3), amps):
        w.writerow([fmt(k[0]), fmt(k[1]), fmt(k[2]), fmt(a.real), fmt(a.imag), fmt(abs(a) ** 2), fmt(r)])
    return out.getvalue()


def read_spectrum_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != SPECTRUM_HEADER:
        raise SchemaError(f"{path}: line 1: expected header {','.join(SPECTRUM_HEADER)}")
    return np.array([[float(x) for x in row] for row in rows[1:]]).reshape(-1, len(SPECTRUM_HEADER))


def radial_csv(edges: Iterable[float], mass: Iterable[float]) -> str:
    edges = list(edges)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RADIAL_HEADER)
    for lo, hi, m in zip(edges[:-1], edges[1:], mass):
        w.writerow([fmt(lo), fmt(hi), fmt(m)])
    return out.getvalue()


# --------------------------------------------------------------------------
# k-grid specifications
# --------------------------------------------------------------------------

def _steps(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise SchemaError("grid step must be positive")
    if hi < lo:
        raise SchemaError("grid upper bound below lower bound")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def parse_grid(spec: str) -> np.ndarray:
    """Wave vectors from a grid spec.

    cube:LO:HI:STEP        all (kx, ky, kz) with coordinates LO, LO+STEP, ..., <= HI
    axis:T0:T1:STEP        (0, 0, t) for t from T0 to T1
    plane:K3:EXTENT:STEP   (kx, ky, K3) with |kx|, |ky| <= EXTENT on a grid through 0
    list:x,y,z;x,y,z;...   explicit vectors; "list:" alone is an empty grid
    """
    kind, _, rest = spec.partition(":")
    try:
        if kind == "cube":
            lo, hi, step = (float(t) for t in rest.split(":"))
            ax = _steps(lo, hi, step)
            return np.array(np.meshgrid(ax, ax, ax, indexing="ij")).reshape(3, -1).T.copy()
        if kind == "axis":
            t0, t1, step = (float(t) for t in rest.split(":"))
            t = _steps(t0, t1, step)
            return np.column_stack([np.zeros_like(t), np.zeros_like(t), t])
        if kind == "plane":
            k3, extent, step = (float(t) for t in rest.split(":"))
            m = int(math.floor(extent / step + 1e-9))
            ax = step * np.arange(-m, m + 1)
            kx, ky = np.meshgrid(ax, ax, indexing="ij")
            return np.column_stack([kx.ravel(), ky.ravel(), np.full(kx.size, k3)])
        if kind == "list":
            items = [s for s in rest.split(";") if s.strip()]
            vecs = [[float(t) for t in item.split(",")] for item in items]
            if any(len(v) != 3 for v in vecs):
                raise SchemaError("list entries must have three components")
            return np.array(vecs, dtype=float).reshape(-1, 3)
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"grid spec {spec!r}: {exc}") from exc
    raise SchemaError(f"grid spec {spec!r}: kind must be one of cube, axis, plane, list")


def parse_edges(spec: str) -> tuple[float, list[float]]:
    """'K3:E0,E1,...' -> (k3, edges)."""
    k3, _, rest = spec.partition(":")
    try:
        edges = [float(t) for t in rest.split(",") if t.strip()]
        return float(k3), edges
    except ValueError as exc:
        raise SchemaError(f"radial spec {spec!r}: {exc}") from exc


def parse_angle(spec: str):
    """'cos:P/Q', 'pi:NUM/DEN' or 'rad:PHI'."""
    from .geometry import Generic, RationalCos, RationalPi

    kind, _, val = spec.partition(":")
    try:
        if kind == "cos":
            p, q = val.split("/")
            return RationalCos(int(p), int(q))
        if kind == "pi":
            n, d = val.split("/")
            return RationalPi(int(n), int(d))
        if kind == "rad":
            return Generic(float(val))
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise SchemaError(f"angle {spec!r}: {exc}") from exc
    raise SchemaError(f"angle {spec!r}: expected cos:P/Q, pi:NUM/DEN or rad:PHI")


def maybe_path(p: Optional[str]) -> Optional[Path]:
    return None if p in (None, "-") else Path(p)
