"""Layer stacking, point extraction and symmetry classification.

Layer m consists of the tiles  m*c3*e3 + v_m + R^m (gamma + T),  gamma in
Gamma, and carries the points  m*c3*e3 + v_m + R^m (z + gamma).

Two adjacent layers fit together iff the top ridges of layer m (parallel
to R^m a) meet the bottom ridges of layer m+1 (parallel to R^{m+1} b =
R^m a).  Working this out from the vertex positions gives

    v_{m+1} - v_m = lam (R^m b - R^{m+1} b) + s_m R^{m+1} b   (mod lattices)

with a free real slide s_m along the common ridge direction.  Shifts are
therefore stored as slides s_m and v_m is rebuilt from them, so an
invalid stacking cannot be represented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import (
    AngleSpec,
    Generic,
    ParameterError,
    RationalCos,
    RationalPi,
    TileMesh,
    TileParams,
    build_tile,
    cos_sin,
)
from .lattice import Lattice2, gamma_lattice, intersect, rotation_power

INCLUSION_EPS = 1e-9


# --------------------------------------------------------------------------
# shift sequences
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ShiftSequence:
    """Slides s_j (in units of |b| = a_len) between layer j and j+1.

    kind is one of "zero", "periodic", "random", "explicit".  Explicit
    slides are zero outside the given range; random slides are uniform in
    [0, 1), drawn independently per index from a seeded PCG64 stream.
    With ``danzer`` set every slide must be an integer (random slides are
    then drawn from {0, 1}).
    """

    kind: str = "zero"
    offsets: tuple = ()
    seed: Optional[int] = None
    danzer: bool = False

    def __post_init__(self):
        if self.kind not in ("zero", "periodic", "random", "explicit"):
            raise ParameterError(f"unknown shift kind {self.kind!r}")
        object.__setattr__(self, "offsets", tuple(float(t) for t in self.offsets))
        if self.kind == "periodic" and not self.offsets:
            raise ParameterError("periodic shifts need at least one offset")
        if self.kind == "random" and self.seed is None:
            raise ParameterError("random shifts need a seed")
        if self.danzer and any(t != int(t) for t in self.offsets):
            raise ParameterError("Danzer-restricted slides must be integers")

    @classmethod
    def zero(cls) -> "ShiftSequence":
        return cls("zero")

    @classmethod
    def periodic(cls, offsets: Sequence[float], danzer: bool = False) -> "ShiftSequence":
        return cls("periodic", tuple(offsets), danzer=danzer)

    @classmethod
    def random(cls, seed: int, danzer: bool = False) -> "ShiftSequence":
        return cls("random", seed=int(seed), danzer=danzer)

    @classmethod
    def explicit(cls, offsets: Sequence[float], danzer: bool = False) -> "ShiftSequence":
        return cls("explicit", tuple(offsets), danzer=danzer)

    @property
    def period(self) -> Optional[int]:
        """Period of the slide sequence, None when it has none by contract."""
        if self.kind == "zero":
            return 1
        if self.kind == "periodic":
            return len(self.offsets)
        return None

    def slide(self, j: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "periodic":
            return self.offsets[j % len(self.offsets)]
        if self.kind == "explicit":
            return self.offsets[j] if 0 <= j < len(self.offsets) else 0.0
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, j & 0xFFFFFFFF, int(j < 0)])))
        if self.danzer:
            return float(rng.integers(0, 2))
        return float(rng.random())

    def to_json(self) -> dict:
        out = {"kind": self.kind, "danzer": self.danzer}
        if self.kind in ("periodic", "explicit"):
            out["offsets"] = list(self.offsets)
        if self.kind == "random":
            out["seed"] = self.seed
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ShiftSequence":
        kind = obj.get("kind", "zero")
        return cls(kind, tuple(obj.get("offsets", ())), obj.get("seed"), bool(obj.get("danzer", False)))


# --------------------------------------------------------------------------
# configurations
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TilingConfig:
    """Tile parameters, slides, reference point z and the base offset v_0.

    ``base`` defaults to -lam*b, which makes zero slides give
    v_m = -lam R^m b: the tiling is then invariant under the screw motion
    x -> Rx + c3 e3.
    """

    params: TileParams
    shifts: ShiftSequence = field(default_factory=ShiftSequence.zero)
    z: Optional[tuple] = None
    base: Optional[tuple] = None
    repetitive: bool = False  # user-declared repetitivity, used by classification

    def __post_init__(self):
        vec = self.params.vectors()
        if self.z is None:
            object.__setattr__(self, "z", tuple(0.5 * (vec["a"] + vec["b"])))
        object.__setattr__(self, "z", tuple(float(t) for t in self.z))
        if len(self.z) != 3:
            raise ParameterError("reference point z must be a 3-vector")
        if self.base is None:
            object.__setattr__(self, "base", tuple(-float(self.params.lam) * vec["b"][:2]))
        object.__setattr__(self, "base", tuple(float(t) for t in self.base))
        if not reference_point_ok(self.mesh, np.array(self.z)):
            raise ParameterError(f"reference point {self.z} is not interior to the tile")

    @property
    def mesh(self) -> TileMesh:
        m = self.__dict__.get("_mesh")
        if m is None:
            m = build_tile(self.params)
            object.__setattr__(self, "_mesh", m)
        return m

    def rotation2(self, m: int) -> np.ndarray:
        c, s = cos_sin(self.params.angle, m)
        return np.array([[c, s], [-s, c]])

    def b2d(self) -> np.ndarray:
        return np.array([self.params.b1, self.params.b2])

    def shift(self, m: int) -> np.ndarray:
        """The in-plane offset v_m."""
        lam = float(self.params.lam)
        b = self.b2d()
        v = np.array(self.base) + lam * (b - self.rotation2(m) @ b)
        if m > 0:
            for j in range(m):
                v = v + self.shifts.slide(j) * (self.rotation2(j + 1) @ b)
        else:
            for j in range(m, 0):
                v = v - self.shifts.slide(j) * (self.rotation2(j + 1) @ b)
        return v

    def to_json(self) -> dict:
        return {
            "schema": "scd/tiling-config/1",
            "params": self.params.to_json(),
            "shifts": self.shifts.to_json(),
            "z": list(self.z),
            "base": list(self.base),
            "repetitive": self.repetitive,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TilingConfig":
        if obj.get("schema") != "scd/tiling-config/1":
            raise ParameterError(f"field 'schema': expected 'scd/tiling-config/1', got {obj.get('schema')!r}")
        if "params" not in obj:
            raise ParameterError("field 'params' is missing")
        return cls(
            TileParams.from_json(obj["params"]),
            ShiftSequence.from_json(obj.get("shifts", {})),
            tuple(obj["z"]) if obj.get("z") is not None else None,
            tuple(obj["base"]) if obj.get("base") is not None else None,
            bool(obj.get("repetitive", False)),
        )


def reference_point_ok(mesh: TileMesh, z: np.ndarray, tol: float = 1e-12) -> bool:
    """z strictly inside the tile, or in the relative interior of the rhomb."""
    n, h = mesh.halfspaces()
    if np.all(n @ z - h < -tol):
        return True
    if abs(z[2]) > tol:
        return False
    B = np.array([mesh.a[:2], mesh.b[:2]])
    c = z[:2] @ np.linalg.inv(B)
    return bool(np.all(c > tol) and np.all(c < 1 - tol))


def bcc_config() -> TilingConfig:
    """Quarter turn with lam = c3 = 1/2: the points form a bcc lattice."""
    params = TileParams(Fraction(1, 2), 1, RationalPi(1, 2), Fraction(1, 2))
    return TilingConfig(params, ShiftSequence.zero(), z=(0.5, 0.5, 0.0), base=(0.0, 0.0))


def cubic_config() -> TilingConfig:
    """Quarter turn, c3 = 1, constant slides 1/2: the points form Z^3 + (1/4, 1/4, 0)."""
    params = TileParams(Fraction(1, 2), 1, RationalPi(1, 2), 1)
    return TilingConfig(params, ShiftSequence.periodic([0.5]), z=(0.25, 0.25, 0.0), base=(0.0, 0.0))


# --------------------------------------------------------------------------
# layers and points
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Layer:
    m: int
    lattice: np.ndarray  # rows: basis of R^m Gamma
    offset: np.ndarray  # m c3 e3 + v_m + R^m z
    rotation: np.ndarray  # 2x2 planar block of R^m
    shift: np.ndarray  # v_m


def build_layer(params: TileParams, m: int, v, z=None) -> Layer:
    """Layer m for a given in-plane offset v_m."""
    vec = params.vectors()
    z = np.asarray(0.5 * (vec["a"] + vec["b"]) if z is None else z, dtype=float)
    c, s = cos_sin(params.angle, m)
    rot = np.array([[c, s], [-s, c]])
    basis = np.array([vec["a"][:2], vec["b"][:2]]) @ rot.T
    v = np.asarray(v, dtype=float)
    off = np.empty(3)
    off[:2] = v + rot @ z[:2]
    off[2] = m * float(params.c3) + z[2]
    return Layer(m, basis, off, rot, v)


def config_layer(config: TilingConfig, m: int) -> Layer:
    return build_layer(config.params, m, config.shift(m), config.z)


@dataclass(eq=False)
class PointCloud:
    points: np.ndarray  # (N, 3)
    layer_index: np.ndarray  # (N,)
    r: float
    layers: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    per_layer_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def density(self) -> float:
        return len(self.points) / self.r ** 3 if self.r > 0 else 0.0

    @classmethod
    def from_points(cls, points, r: float, layer_index=None) -> "PointCloud":
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        li = np.zeros(len(pts), dtype=np.int64) if layer_index is None else np.asarray(layer_index, dtype=np.int64)
        layers, counts = np.unique(li, return_counts=True)
        return cls(pts, li, float(r), layers, counts)


def layer_range_in_cube(config: TilingConfig, r: float) -> range:
    c3 = float(config.params.c3)
    z3 = config.z[2]
    half = r / 2 + INCLUSION_EPS
    lo = math.ceil((-half - z3) / c3)
    hi = math.floor((half - z3) / c3)
    return range(lo, hi + 1)


def _layer_points(layer: Layer, half: float) -> np.ndarray:
    """Points of one layer inside the square [-half, half]^2, lexicographic in (i, j)."""
    B = layer.lattice
    inv = np.linalg.inv(B)
    corners = np.array([[sx * half, sy * half] for sx in (-1, 1) for sy in (-1, 1)]) - layer.offset[:2]
    coords = corners @ inv
    lo = np.floor(coords.min(axis=0)).astype(int) - 1
    hi = np.ceil(coords.max(axis=0)).astype(int) + 1
    i, j = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    ij = np.stack([i.ravel(), j.ravel()], axis=1)
    xy = layer.offset[:2] + ij @ B
    keep = np.all(np.abs(xy) <= half, axis=1)
    xy = xy[keep]
    out = np.empty((len(xy), 3))
    out[:, :2] = xy
    out[:, 2] = layer.offset[2]
    return out


def extract_points(config: TilingConfig, r: float) -> PointCloud:
    """All points in the closed cube [-r/2, r/2]^3, layer-major then by lattice coordinates."""
    if r <= 0:
        raise ParameterError("box size r must be positive")
    half = r / 2 + INCLUSION_EPS
    chunks, idx, layers, counts = [], [], [], []
    for m in layer_range_in_cube(config, r):
        pts = _layer_points(config_layer(config, m), half)
        chunks.append(pts)
        idx.append(np.full(len(pts), m, dtype=np.int64))
        layers.append(m)
        counts.append(len(pts))
    if chunks:
        pts = np.concatenate(chunks)
        li = np.concatenate(idx)
    else:
        pts = np.zeros((0, 3))
        li = np.zeros(0, dtype=np.int64)
    return PointCloud(pts, li, float(r), np.array(layers, dtype=np.int64), np.array(counts, dtype=np.int64))


# --------------------------------------------------------------------------
# packing validation
# --------------------------------------------------------------------------

@dataclass
class PackingReport:
    samples: int
    covered: int
    gaps: int
    overlaps: int
    out_of_coverage: int
    examples: list = field(default_factory=list)

    @property
    def violations(self) -> int:
        return self.gaps + self.overlaps

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "covered": self.covered,
            "gaps": self.gaps,
            "overlaps": self.overlaps,
            "out_of_coverage": self.out_of_coverage,
            "violations": self.violations,
            "examples": [list(map(float, p)) + [kind] for p, kind in self.examples],
        }


def validate_packing(config: TilingConfig, sample_count: int, seed: int = 0,
                     layer_range: tuple[int, int] = (-3, 3), half_width: float = 3.0,
                     box: Optional[tuple] = None, extra_layers: Iterable[Layer] = (),
                     tol: float = 1e-9) -> PackingReport:
    """Spot-check the tiling property with random sample points.

    Tiles come from layers in ``layer_range`` (inclusive) plus any
    ``extra_layers``.  Samples are uniform in ``box`` = ((x0, x1), (y0, y1),
    (z0, z1)); by default a box whose heights are safely covered by the
    generated layers.  A sample needing layers outside the generated range
    counts as out of coverage, not as a violation.
    """
    m_lo, m_hi = layer_range
    c3 = float(config.params.c3)
    if box is None:
        box = ((-half_width, half_width), (-half_width, half_width), (m_lo * c3, m_hi * c3))
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    xs = lo + (hi - lo) * rng.random((sample_count, 3))

    mesh = config.mesh
    normals, offsets = mesh.halfspaces()
    layers = [config_layer(config, m) for m in range(m_lo, m_hi + 1)] + list(extra_layers)

    inside = np.zeros(sample_count, dtype=np.int64)
    interior = np.zeros(sample_count, dtype=np.int64)
    covered_height = (xs[:, 2] >= m_lo * c3 - tol) & (xs[:, 2] <= m_hi * c3 + tol)
    base = np.array([mesh.a[:2], mesh.b[:2]])
    base_inv = np.linalg.inv(base)
    for layer in layers:
        h = layer.m * c3
        near = np.abs(xs[:, 2] - h) <= c3 + tol
        if not near.any():
            continue
        sel = np.flatnonzero(near)
        y = np.empty((len(sel), 3))
        # undo the layer motion: R^{-m} (x - m c3 e3 - v_m)
        y[:, :2] = (xs[sel, :2] - layer.shift) @ layer.rotation  # row form of R^T
        y[:, 2] = xs[sel, 2] - h
        g = np.floor(y[:, :2] @ base_inv)
        for di in (-1, 0):
            for dj in (-1, 0):
                cell = (g + np.array([di, dj])) @ base
                q = y.copy()
                q[:, :2] -= cell
                s = q @ normals.T - offsets
                worst = s.max(axis=1)
                inside[sel] += worst <= tol
                interior[sel] += worst < -tol
    gaps = covered_height & (inside == 0)
    overlaps = covered_height & (interior >= 2)
    report = PackingReport(
        samples=sample_count,
        covered=int((covered_height & (inside > 0)).sum()),
        gaps=int(gaps.sum()),
        overlaps=int(overlaps.sum()),
        out_of_coverage=int((~covered_height).sum()),
    )
    for k in np.flatnonzero(gaps)[:5]:
        report.examples.append((xs[k], "gap"))
    for k in np.flatnonzero(overlaps)[:5]:
        report.examples.append((xs[k], "overlap"))
    return report


# --------------------------------------------------------------------------
# symmetry
# --------------------------------------------------------------------------

@dataclass
class ScrewResult:
    status: str  # "true", "false" or "undecidable"
    m: int
    axis_offset: Optional[tuple] = None  # in-plane point on the screw axis
    translation: Optional[tuple] = None  # in-plane part t of x -> R^m x + t + m c3 e3
    horizon: Optional[int] = None
    proven: bool = False

    def __bool__(self) -> bool:
        return self.status == "true"

    def to_json(self) -> dict:
        return {
            "status": self.status, "m": self.m, "axis_offset": self.axis_offset,
            "translation": self.translation, "horizon": self.horizon, "proven": self.proven,
        }


def _in_lattice(vec: np.ndarray, basis: np.ndarray, tol: float) -> bool:
    c = vec @ np.linalg.inv(basis)
    return bool(np.all(np.abs(c - np.round(c)) <= tol))


def _gamma_rot(config: TilingConfig, n: int) -> np.ndarray:
    B = np.array([config.mesh.a[:2], config.mesh.b[:2]])
    return B @ config.rotation2(n).T


def detect_screw_symmetry(config: TilingConfig, m: int, horizon: int = 64,
                          tol: float = 1e-9) -> ScrewResult:
    """Is the point set invariant under x -> R^m x + t + m c3 e3 for some in-plane t?

    Layer n goes onto layer n+m iff t = v_{n+m} - R^m v_n modulo
    R^{n+m} Gamma; t is fixed by n = 0 and the remaining layers are
    checked.  When m is a multiple of the slide period the differences
    vanish identically.  For a finite rotation order the check over two
    full periods decides every n; otherwise a passing check is reported
    as undecidable with the horizon used.
    """
    if m < 1:
        raise ParameterError("screw exponent m must be >= 1")
    shifts = config.shifts
    period = shifts.period
    Rm = config.rotation2(m)
    t = config.shift(m) - Rm @ config.shift(0)
    try:
        u = np.linalg.solve(np.eye(2) - Rm, t)
        axis = tuple(float(x) for x in u)
    except np.linalg.LinAlgError:
        axis = None  # pure translation
    tt = tuple(float(x) for x in t)

    if period is None:
        return ScrewResult("undecidable", m, axis, tt, horizon, False)

    order = config.params.angle.order
    if order is not None:
        K = order * period // math.gcd(order, period)
        span = range(-2 * K, 2 * K + 1)
    else:
        span = range(-horizon, horizon + 1)
    for n in span:
        d = config.shift(n + m) - Rm @ config.shift(n)
        if not _in_lattice(d - t, _gamma_rot(config, n + m), tol):
            return ScrewResult("false", m, axis, tt, None, True)
    if m % period == 0 or order is not None:
        return ScrewResult("true", m, axis, tt, None, True)
    return ScrewResult("undecidable", m, axis, tt, horizon, False)


@dataclass
class PeriodicityResult:
    periodic: bool
    k: Optional[int] = None
    vertical_period: Optional[tuple] = None  # (w_x, w_y, k c3)
    planar_periods: Optional[np.ndarray] = None  # basis of the common in-plane lattice
    reason: str = ""

    def __bool__(self) -> bool:
        return self.periodic

    def to_json(self) -> dict:
        return {
            "periodic": self.periodic,
            "k": self.k,
            "vertical_period": None if self.vertical_period is None else list(self.vertical_period),
            "planar_periods": None if self.planar_periods is None else self.planar_periods.tolist(),
            "reason": self.reason,
        }


def detect_full_periodicity(config: TilingConfig) -> PeriodicityResult:
    """Lattice periodicity in three independent directions.

    Needs R^order = id and periodic slides.  With k = lcm(order, slide
    period) every layer n+k equals layer n translated by (w, k c3),
    w = sum_{j<k} s_j R^{j+1} b; the in-plane periods are the common
    lattice of R^j Gamma, j < order.
    """
    params = config.params
    angle = params.angle
    order = angle.order
    if order is None:
        return PeriodicityResult(False, reason="rotation has infinite order (incommensurate angle)")
    period = config.shifts.period
    if period is None:
        return PeriodicityResult(False, reason="slides have no period by contract (random or explicit)")
    k = order * period // math.gcd(order, period)
    b = config.b2d()
    w = sum((config.shifts.slide(j) * (config.rotation2(j + 1) @ b) for j in range(k)), np.zeros(2))

    planar = _common_planar_lattice(config, order)
    if planar is None:
        return PeriodicityResult(False, k=k, reason="rotated layer lattices share no rank-2 sublattice")
    # the in-plane vertical-period component must be consistent for every layer
    for n in range(-k, k + 1):
        d = config.shift(n + k) - config.shift(n)
        if not _in_lattice(d - w, _gamma_rot(config, n), 1e-9):
            return PeriodicityResult(False, k=k, reason=f"layer {n} does not repeat after k layers")
    return PeriodicityResult(
        True, k=k,
        vertical_period=(float(w[0]), float(w[1]), k * float(params.c3)),
        planar_periods=planar,
        reason="commensurate rotation and periodic slides",
    )


def _common_planar_lattice(config: TilingConfig, order: int) -> Optional[np.ndarray]:
    params = config.params
    g = gamma_lattice(params.angle, params.a_len)
    if g.exact:
        cur: Optional[Lattice2] = g
        for j in range(1, order):
            if cur is None:
                return None
            cur = intersect(cur, g.rotated(rotation_power(params.angle, j)))
        return None if cur is None else cur.matrix()
    # numeric fallback: search small common vectors
    pts = g.points_within(50.0 * float(params.a_len))
    pts = pts[np.linalg.norm(pts, axis=1) > 0]
    keep = np.ones(len(pts), dtype=bool)
    for j in range(1, order):
        h = g.rotated(rotation_power(params.angle, j)).matrix()
        c = pts @ np.linalg.inv(h)
        keep &= np.all(np.abs(c - np.round(c)) < 1e-9, axis=1)
    cand = pts[keep]
    for i in range(len(cand)):
        for j in range(i + 1, len(cand)):
            if abs(np.cross(cand[i], cand[j])) > 1e-9:
                return np.array([cand[i], cand[j]])
    return None


def repetitivity_condition(angle: AngleSpec) -> str:
    """The necessary condition for repetitivity: cos(phi) rational.

    Returns "SatisfiesNecessary", "Violates" or "Ambiguous" (a Generic angle
    whose cosine is within 1e-12 of a rational with denominator <= 1000).
    """
    if isinstance(angle, RationalCos):
        return "SatisfiesNecessary"
    if isinstance(angle, RationalPi):
        return "SatisfiesNecessary" if angle.fraction in (Fraction(1, 3), Fraction(1, 2)) else "Violates"
    c = math.cos(angle.radians)
    approx = Fraction(c).limit_denominator(1000)
    if abs(float(approx) - c) <= 1e-12:
        return "Ambiguous"
    return "Violates"
