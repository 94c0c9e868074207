"""The SCD biprism tile and the rotation that stacks its layers.

Tile vertices are {0, a, b, a+b, c, a+c, d, b+d} with

    a = (a_len, 0, 0)
    b = (a_len cos phi, a_len sin phi, 0)
    c = lam*b + (0, 0, c3)
    d = lam*a - (0, 0, c3)

so the top ridge {c, a+c} runs along a and the bottom ridge {d, b+d}
along b.  Consecutive layers are related by the rotation R through
-phi about e3, which maps b onto a.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .numbers import QuadNumber, as_fraction

Number = Union[int, float, Fraction]

DEFAULT_RTOL = 1e-12


class ParameterError(ValueError):
    """Raised when tile or angle parameters violate their invariants."""


# --------------------------------------------------------------------------
# angles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalCos:
    """phi = arccos(p/q)."""

    p: int
    q: int

    def __post_init__(self):
        if self.q < 1 or not (0 <= self.p < self.q) or math.gcd(self.p, self.q) != 1:
            raise ParameterError(
                f"RationalCos needs 0 <= p < q, gcd(p, q) = 1; got p={self.p}, q={self.q}"
            )

    @property
    def radians(self) -> float:
        return math.acos(self.p / self.q)

    def exact_cos_sin(self) -> tuple[QuadNumber, QuadNumber]:
        c = Fraction(self.p, self.q)
        return QuadNumber(c), QuadNumber.sqrt_of(1 - c * c)

    @property
    def commensurate(self) -> bool:
        # Niven: cos(phi) rational and phi in pi*Q only for cos in {0, 1/2}
        return (self.p, self.q) in ((0, 1), (1, 2))

    @property
    def order(self) -> Optional[int]:
        return {(0, 1): 4, (1, 2): 6}.get((self.p, self.q))

    def to_json(self) -> dict:
        return {"kind": "rational_cos", "p": self.p, "q": self.q}


_EXACT_PI_FRACTIONS = {
    Fraction(1, 2): (QuadNumber(0), QuadNumber(1)),
    Fraction(1, 3): (QuadNumber(Fraction(1, 2)), QuadNumber(0, Fraction(1, 2), 3)),
    Fraction(1, 4): (QuadNumber(0, Fraction(1, 2), 2), QuadNumber(0, Fraction(1, 2), 2)),
    Fraction(1, 6): (QuadNumber(0, Fraction(1, 2), 3), QuadNumber(Fraction(1, 2))),
}


@dataclass(frozen=True)
class RationalPi:
    """phi = (num/den)*pi with 0 < num/den <= 1/2."""

    num: int
    den: int

    def __post_init__(self):
        if self.den < 1 or self.num < 1 or Fraction(self.num, self.den) > Fraction(1, 2):
            raise ParameterError(
                f"RationalPi needs 0 < num/den <= 1/2; got {self.num}/{self.den}"
            )

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    @property
    def radians(self) -> float:
        return float(self.fraction) * math.pi

    def exact_cos_sin(self) -> Optional[tuple[QuadNumber, QuadNumber]]:
        return _EXACT_PI_FRACTIONS.get(self.fraction)

    commensurate = True

    @property
    def order(self) -> int:
        f = self.fraction
        # smallest k with k*f an even integer
        return 2 * f.denominator // math.gcd(f.numerator, 2)

    def to_json(self) -> dict:
        return {"kind": "rational_pi", "num": self.num, "den": self.den}


@dataclass(frozen=True)
class Generic:
    """An angle given only numerically; treated as incommensurate."""

    phi: float

    def __post_init__(self):
        if not (0.0 < self.phi <= math.pi / 2):
            raise ParameterError(f"Generic angle must satisfy 0 < phi <= pi/2, got {self.phi}")

    @property
    def radians(self) -> float:
        return float(self.phi)

    def exact_cos_sin(self) -> None:
        return None

    commensurate = False
    order = None

    def to_json(self) -> dict:
        return {"kind": "generic", "phi": self.phi}


AngleSpec = Union[RationalCos, RationalPi, Generic]


def angle_from_json(obj: dict) -> AngleSpec:
    kind = obj.get("kind")
    if kind == "rational_cos":
        return RationalCos(int(obj["p"]), int(obj["q"]))
    if kind == "rational_pi":
        return RationalPi(int(obj["num"]), int(obj["den"]))
    if kind == "generic":
        return Generic(float(obj["phi"]))
    raise ParameterError(f"unknown angle kind {kind!r}")


def cos_sin(angle: AngleSpec, m: int = 1) -> tuple[float, float]:
    """Floating cos and sin of m*phi, from exact values when available."""
    ex = angle.exact_cos_sin()
    if ex is not None:
        r = rotation_power(angle, m)
        return float(r.planar[0][0]), float(r.planar[0][1])
    t = m * angle.radians
    return math.cos(t), math.sin(t)


# --------------------------------------------------------------------------
# tile parameters and mesh
# --------------------------------------------------------------------------

def _num(x) -> Number:
    """Keep ints, Fractions and rational strings exact; floats stay floats."""
    if isinstance(x, bool):
        raise ParameterError("booleans are not lengths")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError as exc:
            raise ParameterError(f"not a number: {x!r}") from exc
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ParameterError(f"non-finite value {x}")
        return x
    raise ParameterError(f"unsupported numeric type {type(x).__name__}")


@dataclass(frozen=True)
class TileParams:
    lam: Number
    a_len: Number
    angle: AngleSpec
    c3: Number

    def __post_init__(self):
        object.__setattr__(self, "lam", _num(self.lam))
        object.__setattr__(self, "a_len", _num(self.a_len))
        object.__setattr__(self, "c3", _num(self.c3))
        if not (0 < self.lam < 1):
            raise ParameterError(f"lambda must lie in (0, 1), got {self.lam}")
        if not self.a_len > 0:
            raise ParameterError(f"a_len must be positive, got {self.a_len}")
        if not self.c3 > 0:
            raise ParameterError(f"c3 must be positive, got {self.c3}")
        if not self.b2 > 0:
            raise ParameterError("b2 = a_len*sin(phi) must be positive (degenerate rhomb)")

    @classmethod
    def from_b(cls, lam, b1: float, b2: float, c3) -> "TileParams":
        """Parameters in the (lambda, b1, b2, c) form with a_len = |b|."""
        if b2 <= 0:
            raise ParameterError(f"b2 must be positive, got {b2}")
        return cls(lam, math.hypot(b1, b2), Generic(math.atan2(b2, b1)), c3)

    @property
    def b1(self) -> float:
        return float(self.a_len) * cos_sin(self.angle)[0]

    @property
    def b2(self) -> float:
        return float(self.a_len) * cos_sin(self.angle)[1]

    @property
    def exact(self) -> bool:
        return (
            isinstance(self.a_len, Fraction)
            and isinstance(self.lam, Fraction)
            and isinstance(self.c3, Fraction)
            and self.angle.exact_cos_sin() is not None
        )

    def exact_b(self) -> Optional[tuple[QuadNumber, QuadNumber]]:
        """(b1, b2) in exact arithmetic, or None if unavailable."""
        cs = self.angle.exact_cos_sin()
        if cs is None or not isinstance(self.a_len, Fraction):
            return None
        return cs[0] * self.a_len, cs[1] * self.a_len

    @property
    def volume(self) -> float:
        return float(self.a_len) * self.b2 * float(self.c3)

    @property
    def density2(self) -> float:
        return 1.0 / (float(self.a_len) * self.b2)

    @property
    def density3(self) -> float:
        return 1.0 / self.volume

    def vectors(self) -> dict[str, np.ndarray]:
        lam, a_len, c3 = float(self.lam), float(self.a_len), float(self.c3)
        a = np.array([a_len, 0.0, 0.0])
        b = np.array([self.b1, self.b2, 0.0])
        c = lam * b + np.array([0.0, 0.0, c3])
        d = lam * a - np.array([0.0, 0.0, c3])
        return {"a": a, "b": b, "c": c, "d": d}

    def to_json(self) -> dict:
        def enc(x):
            return str(x) if isinstance(x, Fraction) else x

        return {
            "lambda": enc(self.lam),
            "a_len": enc(self.a_len),
            "c3": enc(self.c3),
            "angle": self.angle.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TileParams":
        missing = [k for k in ("lambda", "a_len", "c3", "angle") if k not in obj]
        if missing:
            raise ParameterError(f"tile params missing field(s): {', '.join(missing)}")
        return cls(obj["lambda"], obj["a_len"], angle_from_json(obj["angle"]), obj["c3"])


VERTEX_LABELS = ("0", "a", "b", "a+b", "c", "a+c", "d", "b+d")


@dataclass(frozen=True, eq=False)
class TileMesh:
    params: TileParams
    vertices: np.ndarray  # (8, 3), ordered as VERTEX_LABELS
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    facets: list = field(default_factory=list, repr=False)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """(normals, offsets) with the tile = {x : normals @ x <= offsets}."""
        n = np.array([f.normal for f in self.facets])
        h = np.array([f.offset for f in self.facets])
        return n, h


@dataclass(frozen=True, eq=False)
class Facet:
    normal: np.ndarray  # unit outward normal
    offset: float
    vertices: tuple[int, ...]  # counterclockwise seen from outside


def convex_facets(points: np.ndarray, rtol: float = DEFAULT_RTOL) -> list[Facet]:
    """Facets of conv(points) by brute force over vertex triples.

    Intended for a handful of points; O(n^4).
    """
    pts = np.asarray(points, dtype=float)
    scale = max(1.0, float(np.abs(pts).max()))
    tol = rtol * scale * 100
    centre = pts.mean(axis=0)
    found: list[Facet] = []
    for i, j, k in itertools.combinations(range(len(pts)), 3):
        n = np.cross(pts[j] - pts[i], pts[k] - pts[i])
        nn = np.linalg.norm(n)
        if nn <= tol * scale:
            continue
        n = n / nn
        h = float(n @ pts[i])
        s = pts @ n - h
        if np.all(s <= tol):
            pass
        elif np.all(s >= -tol):
            n, h, s = -n, -h, -s
        else:
            continue
        if any(np.allclose(f.normal, n, atol=1e-9) and abs(f.offset - h) <= tol for f in found):
            continue
        on = [int(t) for t in np.flatnonzero(np.abs(s) <= tol)]
        found.append(Facet(n, h, _order_ccw(pts, on, n)))
    # sanity: the centroid is strictly inside every facet
    for f in found:
        if f.normal @ centre - f.offset >= 0:
            raise ParameterError("degenerate point set: no interior")
    return found


def _order_ccw(pts: np.ndarray, idx: list[int], normal: np.ndarray) -> tuple[int, ...]:
    sub = pts[idx]
    cen = sub.mean(axis=0)
    u = sub[0] - cen
    u = u / np.linalg.norm(u)
    w = np.cross(normal, u)
    ang = np.arctan2((sub - cen) @ w, (sub - cen) @ u)
    return tuple(idx[t] for t in np.argsort(ang, kind="stable"))


def extreme_vertices(points: np.ndarray, facets: list[Facet]) -> list[bool]:
    """A point is extreme iff the facets through it have normals spanning R^3."""
    out = []
    for i in range(len(points)):
        normals = [f.normal for f in facets if i in f.vertices]
        out.append(len(normals) >= 3 and np.linalg.matrix_rank(np.array(normals), tol=1e-9) == 3)
    return out


def polytope_volume(points: np.ndarray, facets: list[Facet]) -> float:
    pts = np.asarray(points, dtype=float)
    centre = pts.mean(axis=0)
    vol = 0.0
    for f in facets:
        poly = pts[list(f.vertices)]
        area_vec = np.zeros(3)
        for p, q in zip(poly, np.roll(poly, -1, axis=0)):
            area_vec += np.cross(p, q)
        area = 0.5 * abs(area_vec @ f.normal)
        vol += area * (f.offset - f.normal @ centre) / 3.0
    return vol


def build_tile(params: TileParams) -> TileMesh:
    """Construct the biprism and check that all eight vertices are extreme."""
    v = params.vectors()
    a, b, c, d = v["a"], v["b"], v["c"], v["d"]
    verts = np.array([np.zeros(3), a, b, a + b, c, a + c, d, b + d])
    facets = convex_facets(verts)
    if not all(extreme_vertices(verts, facets)):
        raise ParameterError("tile vertices are not in convex position")
    return TileMesh(params, verts, a, b, c, d, facets)


def tile_volume(mesh: TileMesh) -> float:
    return mesh.params.volume


def mesh_to_obj(mesh: TileMesh) -> str:
    lines = ["# SCD biprism", "o scd_tile"]
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.17g} {y:.17g} {z:.17g}")
    for f in mesh.facets:
        ring = [i + 1 for i in f.vertices]
        for t in range(1, len(ring) - 1):
            lines.append(f"f {ring[0]} {ring[t]} {ring[t + 1]}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# rotations about e3
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rotation3:
    """Rotation about e3 stored by its planar block [[c, s], [-s, c]].

    Entries are QuadNumbers when exact, floats otherwise.
    """

    cos: Union[QuadNumber, float]
    sin: Union[QuadNumber, float]

    @property
    def exact(self) -> bool:
        return isinstance(self.cos, QuadNumber)

    @property
    def planar(self):
        return ((self.cos, self.sin), (-self.sin, self.cos))

    def matrix(self) -> np.ndarray:
        c, s = float(self.cos), float(self.sin)
        return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])

    def planar_matrix(self) -> np.ndarray:
        return self.matrix()[:2, :2]

    def __matmul__(self, other: "Rotation3") -> "Rotation3":
        c = self.cos * other.cos - self.sin * other.sin
        s = self.sin * other.cos + self.cos * other.sin
        return Rotation3(c, s)

    def inverse(self) -> "Rotation3":
        return Rotation3(self.cos, -self.sin)

    def apply2(self, v):
        """Rotate a planar vector; exact when both sides are exact."""
        x, y = v
        return (self.cos * x + self.sin * y, -self.sin * x + self.cos * y)

    def is_identity(self) -> bool:
        if self.exact:
            return self.cos == 1 and self.sin == 0
        return abs(self.cos - 1.0) < 1e-12 and abs(self.sin) < 1e-12


def rotation_power(angle: AngleSpec, m: int) -> Rotation3:
    """R^m where R rotates through -phi about e3."""
    cs = angle.exact_cos_sin()
    if cs is None:
        t = m * angle.radians
        return Rotation3(math.cos(t), math.sin(t))
    base = Rotation3(cs[0], cs[1])
    if m < 0:
        base, m = base.inverse(), -m
    out = Rotation3(QuadNumber(1), QuadNumber(0))
    while m:
        if m & 1:
            out = out @ base
        base = base @ base
        m >>= 1
    return out
