"""Planar lattice algebra in exact arithmetic.

Lattices are stored by a basis of row vectors.  Entries are QuadNumbers
whenever the angle allows it, so intersections of rotated copies reduce
to integer linear algebra: each vector of Q(sqrt D)^2 is embedded in Q^4
by splitting off the sqrt(D) components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .geometry import AngleSpec, Generic, ParameterError, Rotation3, rotation_power
from .numbers import QuadNumber, as_fraction

Vec2 = tuple  # pair of QuadNumber or float


# --------------------------------------------------------------------------
# lattice types
# --------------------------------------------------------------------------

def _is_exact(v) -> bool:
    return isinstance(v, QuadNumber)


@dataclass(frozen=True)
class Lattice2:
    """The lattice Z*basis[0] + Z*basis[1]."""

    basis: tuple  # ((x1, y1), (x2, y2))

    def __post_init__(self):
        (u, v) = self.basis
        if len(u) != 2 or len(v) != 2:
            raise ParameterError("a planar lattice needs two 2-vectors")
        if self.exact:
            object.__setattr__(
                self, "basis", tuple(tuple(QuadNumber.coerce(x) for x in w) for w in self.basis)
            )
            if self.det() == 0:
                raise ParameterError("singular lattice basis")
        elif abs(self.det()) < 1e-300:
            raise ParameterError("singular lattice basis")

    @classmethod
    def from_rows(cls, u, v) -> "Lattice2":
        return cls((tuple(u), tuple(v)))

    @property
    def exact(self) -> bool:
        return all(isinstance(x, (int, Fraction, QuadNumber)) for w in self.basis for x in w)

    def det(self):
        (a, b), (c, d) = self.basis
        return a * d - b * c

    @property
    def density(self) -> float:
        return 1.0 / abs(float(self.det()))

    def matrix(self) -> np.ndarray:
        return np.array([[float(x) for x in w] for w in self.basis])

    def scaled(self, s) -> "Lattice2":
        return Lattice2(tuple(tuple(x * s for x in w) for w in self.basis))

    def rotated(self, rot: Rotation3) -> "Lattice2":
        if self.exact and rot.exact:
            return Lattice2(tuple(rot.apply2(w) for w in self.basis))
        m = self.matrix() @ rot.planar_matrix().T
        return Lattice2(tuple(tuple(float(x) for x in row) for row in m))

    def points_within(self, radius: float) -> np.ndarray:
        """All lattice points of norm <= radius (float), sorted by norm."""
        B = self.matrix()
        # bound on coordinates from the smallest singular value
        smin = np.linalg.svd(B, compute_uv=False).min()
        n = int(math.ceil(radius / smin)) + 1
        i, j = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
        coeffs = np.stack([i.ravel(), j.ravel()], axis=1)
        pts = coeffs @ B
        nrm = np.linalg.norm(pts, axis=1)
        keep = nrm <= radius * (1 + 1e-12) + 1e-12
        order = np.lexsort((pts[keep][:, 1], pts[keep][:, 0], nrm[keep]))
        return pts[keep][order]


DualLattice2 = Lattice2


def _inv2(basis):
    (a, b), (c, d) = basis
    det = a * d - b * c
    return ((d / det, -b / det), (-c / det, a / det))


def dual_lattice(g: Lattice2) -> Lattice2:
    """Gamma* = {y : y.x in Z for all x in Gamma}: rows of the inverse transpose."""
    if g.exact:
        inv = _inv2(g.basis)
        return Lattice2(((inv[0][0], inv[1][0]), (inv[0][1], inv[1][1])))
    m = np.linalg.inv(g.matrix()).T
    return Lattice2(tuple(tuple(float(x) for x in row) for row in m))


def gamma_lattice(angle: AngleSpec, a_len=1) -> Lattice2:
    """Z a + Z b with a = (a_len, 0), b = a_len (cos phi, sin phi)."""
    cs = angle.exact_cos_sin()
    if cs is not None and not isinstance(a_len, float):
        a_len = as_fraction(a_len)
        return Lattice2(((QuadNumber(a_len), QuadNumber(0)), (cs[0] * a_len, cs[1] * a_len)))
    a = float(a_len)
    return Lattice2(((a, 0.0), (a * math.cos(angle.radians), a * math.sin(angle.radians))))


def change_of_basis(src: Lattice2, dst: Lattice2):
    """Matrix T with src.basis = T @ dst.basis (rows), exact when possible."""
    if src.exact and dst.exact:
        inv = _inv2(dst.basis)
        return tuple(
            tuple(sum((w[k] * inv[k][j] for k in range(2)), QuadNumber(0)) for j in range(2))
            for w in src.basis
        )
    return src.matrix() @ np.linalg.inv(dst.matrix())


def same_lattice(g: Lattice2, h: Lattice2, tol: float = 1e-9) -> bool:
    """True iff the two bases differ by a unimodular integer matrix."""
    T = change_of_basis(g, h)
    if isinstance(T, tuple):
        flat = [x for row in T for x in row]
        if not all(x.is_integer() for x in flat):
            return False
        det = T[0][0] * T[1][1] - T[0][1] * T[1][0]
        return abs(det) == 1
    if not np.allclose(T, np.round(T), atol=tol):
        return False
    return abs(abs(np.linalg.det(np.round(T))) - 1) < tol


def rotated_dual_identity_check(g: Lattice2, R: Rotation3, m: int) -> bool:
    """Check (R^m Gamma)* == R^m (Gamma*) up to a unimodular change of basis."""
    Rm = _rotation_pow(R, m)
    lhs = dual_lattice(g.rotated(Rm))
    rhs = dual_lattice(g).rotated(Rm)
    return same_lattice(lhs, rhs)


def _rotation_pow(R: Rotation3, m: int) -> Rotation3:
    if R.exact:
        base = R if m >= 0 else R.inverse()
        out = Rotation3(QuadNumber(1), QuadNumber(0))
        for _ in range(abs(m)):
            out = out @ base
        return out
    t = math.atan2(R.sin, R.cos) * m
    return Rotation3(math.cos(t), math.sin(t))


# --------------------------------------------------------------------------
# exact module intersection
# --------------------------------------------------------------------------

def _common_field(vectors) -> int:
    d = 1
    for w in vectors:
        for x in w:
            if x.d != 1:
                if d not in (1, x.d):
                    raise ValueError("vectors live in different quadratic fields")
                d = x.d
    return d


def _embed(w) -> list[Fraction]:
    return [w[0].a, w[0].b, w[1].a, w[1].b]


def integer_left_kernel(M: Sequence[Sequence[int]]) -> list[list[int]]:
    """Basis of {n in Z^rows : n M = 0} via unimodular row reduction of [M | I]."""
    rows = len(M)
    cols = len(M[0]) if rows else 0
    A = [list(M[i]) + [int(i == j) for j in range(rows)] for i in range(rows)]
    piv = 0
    for c in range(cols):
        # Euclid on column c among rows piv..end
        while True:
            nz = [i for i in range(piv, rows) if A[i][c] != 0]
            if not nz:
                break
            i0 = min(nz, key=lambda i: abs(A[i][c]))
            A[piv], A[i0] = A[i0], A[piv]
            done = True
            for i in range(piv + 1, rows):
                if A[i][c]:
                    q = A[i][c] // A[piv][c]
                    A[i] = [x - q * y for x, y in zip(A[i], A[piv])]
                    if A[i][c]:
                        done = False
            if done:
                break
        if any(A[i][c] for i in range(piv, rows)):
            piv += 1
        if piv == rows:
            break
    return [row[cols:] for row in A if all(x == 0 for x in row[:cols])]


def _clear_denominators(rows: list[list[Fraction]]) -> list[list[int]]:
    den = 1
    for r in rows:
        for x in r:
            den = den * x.denominator // math.gcd(den, x.denominator)
    return [[int(x * den) for x in r] for r in rows]


def intersect(g: Lattice2, h: Lattice2) -> Optional[Lattice2]:
    """Exact intersection of two planar modules; None when it has rank < 2.

    A rank-1 intersection is also reported as None, since only full-rank
    intersections have finite index.
    """
    if not (g.exact and h.exact):
        raise ValueError("exact intersection needs exact lattices")
    _common_field(list(g.basis) + list(h.basis))
    U = [_embed(w) for w in g.basis]
    W = [_embed(w) for w in h.basis]
    M = _clear_denominators(U + [[-x for x in w] for w in W])
    ker = integer_left_kernel(M)
    coords = [k[:2] for k in ker]
    if len(coords) < 2:
        return None
    (p, q), (r, s) = coords[0], coords[1]
    if p * s - q * r == 0:
        return None
    u, v = g.basis
    basis = tuple(
        (u[0] * c0 + v[0] * c1, u[1] * c0 + v[1] * c1) for c0, c1 in ((p, q), (r, s))
    )
    return reduce_basis(Lattice2(basis))


def norm2(w):
    return w[0] * w[0] + w[1] * w[1]


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1]


def reduce_basis(g: Lattice2) -> Lattice2:
    """Lagrange-Gauss reduction; the first vector becomes a shortest one."""
    u, v = g.basis
    exact = g.exact
    if norm2(v) < norm2(u):
        u, v = v, u
    while True:
        t = _dot(u, v) / norm2(u)
        mu = t.round() if exact else int(round(t))
        if mu:
            v = (v[0] - u[0] * mu, v[1] - u[1] * mu)
        if norm2(v) < norm2(u):
            u, v = v, u
        else:
            break
    return Lattice2((u, v))


def index_in(sub: Lattice2, g: Lattice2) -> int:
    ratio = sub.det() / g.det()
    if g.exact:
        if not ratio.is_integer():
            raise ValueError(f"not a sublattice: determinant ratio {ratio}")
        return abs(int(ratio.a))
    return int(round(abs(ratio)))


INFINITE = math.inf


def csl_index(angle: AngleSpec, m: int, a_len=1) -> Union[int, float]:
    """Index of Gamma cap R^m Gamma in Gamma, or ``math.inf`` if not full rank."""
    if m < 1:
        raise ParameterError("csl_index needs m >= 1")
    g = gamma_lattice(angle, a_len)
    if not g.exact:
        raise ValueError("csl_index needs an angle with exact cos and sin")
    h = g.rotated(rotation_power(angle, m))
    inter = intersect(g, h)
    return INFINITE if inter is None else index_in(inter, g)


# --------------------------------------------------------------------------
# aperiodicity certificates
# --------------------------------------------------------------------------

@dataclass
class Certificate:
    angle: AngleSpec
    M: int
    radius: float
    exact: bool
    index_chain: list = field(default_factory=list)
    shortest_vector: Optional[tuple] = None
    shortest_norm: Optional[float] = None
    common_vector_within_radius: bool = False
    tolerance: Optional[float] = None

    @property
    def chain_strictly_increasing(self) -> bool:
        c = self.index_chain
        return all(b > a for a, b in zip(c, c[1:]))

    def to_json(self) -> dict:
        def enc_idx(x):
            return "inf" if x == INFINITE else int(x)

        sv = None
        if self.shortest_vector is not None:
            sv = [x.to_json() if isinstance(x, QuadNumber) else float(x) for x in self.shortest_vector]
        return {
            "angle": self.angle.to_json(),
            "M": self.M,
            "radius": self.radius,
            "exact": self.exact,
            "index_chain": [enc_idx(x) for x in self.index_chain],
            "chain_strictly_increasing": self.chain_strictly_increasing,
            "shortest_vector": sv,
            "shortest_norm": self.shortest_norm,
            "common_vector_within_radius": self.common_vector_within_radius,
            "tolerance": self.tolerance,
        }


def aperiodicity_certificate(angle: AngleSpec, M: int, radius: float, a_len=1,
                             tol: float = 1e-9) -> Certificate:
    """Intersect Gamma, R Gamma, ..., R^M Gamma and look for short common vectors.

    The chain reports the index in Gamma of the intersection over 0..m for
    m = 1..M.
    """
    if M < 1:
        raise ParameterError("M must be >= 1")
    g = gamma_lattice(angle, a_len)
    if g.exact:
        cert = Certificate(angle, M, float(radius), True)
        cur: Optional[Lattice2] = g
        for m in range(1, M + 1):
            if cur is not None:
                cur = intersect(cur, g.rotated(rotation_power(angle, m)))
            cert.index_chain.append(INFINITE if cur is None else index_in(cur, g))
        if cur is not None:
            sv = cur.basis[0]
            n = math.sqrt(float(norm2(sv)))
            cert.shortest_vector = sv
            cert.shortest_norm = n
            cert.common_vector_within_radius = n <= radius
        return cert
    return _empirical_certificate(angle, g, M, float(radius), tol)


def _empirical_certificate(angle, g: Lattice2, M: int, radius: float, tol: float) -> Certificate:
    cert = Certificate(angle, M, radius, False, tolerance=tol)
    pts = g.points_within(radius)
    pts = pts[np.linalg.norm(pts, axis=1) > 0]
    alive = np.ones(len(pts), dtype=bool)
    for m in range(1, M + 1):
        h = g.rotated(rotation_power(angle, m)).matrix()
        coords = pts @ np.linalg.inv(h)
        alive &= np.all(np.abs(coords - np.round(coords)) * np.linalg.norm(h, axis=1).max() <= tol, axis=1)
        cert.index_chain.append(int(alive.sum()))
    if alive.any():
        v = pts[np.flatnonzero(alive)[0]]
        cert.shortest_vector = (float(v[0]), float(v[1]))
        cert.shortest_norm = float(np.linalg.norm(v))
        cert.common_vector_within_radius = True
    return cert


# --------------------------------------------------------------------------
# the coincidence equation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceSolution:
    """Integers with kappa*(1,0) + lam*b = mu*b + nu*(b1^2 - b2^2, 2 b1 b2)."""

    kappa: int
    lambda_i: int
    mu: int
    nu: int
    b1: Fraction

    def residual(self) -> tuple[Fraction, Fraction]:
        """Both components, the second divided by b2 (> 0); zero iff a solution."""
        b1 = self.b1
        b2sq = 1 - b1 * b1
        first = self.kappa + self.lambda_i * b1 - self.mu * b1 - self.nu * (b1 * b1 - b2sq)
        second = self.lambda_i - self.mu - 2 * self.nu * b1
        return first, second

    def to_json(self) -> dict:
        return {"kappa": self.kappa, "lambda": self.lambda_i, "mu": self.mu, "nu": self.nu,
                "b1": str(self.b1)}


@dataclass(frozen=True)
class NoSolutionCertificate:
    steps: tuple[str, ...]

    def to_json(self) -> dict:
        return {"solution": None, "steps": list(self.steps)}


def coincidence_solve(b1=None, irrational: bool = False):
    """Solve the coincidence equation for b = (b1, sqrt(1 - b1^2)).

    With b2 > 0 the second component reads lam - mu = 2 nu b1 and, after
    substitution, the first forces kappa = -nu.  Hence for b1 = p/q the
    admissible nu are the multiples of q / gcd(q, 2).  Ties are broken by
    nu > 0 and mu = 0.
    """
    if irrational:
        return NoSolutionCertificate((
            "second component: lam - mu = 2 nu b1",
            "b1 irrational and lam - mu, nu integers, so nu = 0",
            "first component then reads kappa + (lam - mu) b1 = 0 with lam = mu, so kappa = 0",
            "kappa != 0 != nu is impossible",
        ))
    if b1 is None:
        raise ParameterError("b1 is required unless flagged irrational")
    if isinstance(b1, float):
        raise ParameterError("b1 must be given exactly (int, Fraction or 'p/q')")
    b1 = as_fraction(b1)
    if not (0 <= b1 < 1):
        raise ParameterError(f"b1 must lie in [0, 1), got {b1}")
    q = b1.denominator
    nu = q // math.gcd(q, 2)
    lam = 2 * nu * b1
    sol = CoincidenceSolution(kappa=-nu, lambda_i=int(lam), mu=0, nu=nu, b1=b1)
    assert sol.residual() == (0, 0)
    return sol
