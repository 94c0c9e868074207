"""Finite-volume diffraction estimates and analytic predictions.

The numerical estimator is the Fourier-Bohr coefficient

    A_r(k) = r^-3 sum_{y in Lambda cap C_r} exp(-2 pi i k.y)

whose square modulus converges to the Bragg atom at k.  Predictions for
the support (cylinders of radius |g|, g in Gamma*), the atoms on the e3
axis and the spectrum of fully periodic stackings are computed
independently of any point cloud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .geometry import RationalCos, TileParams, cos_sin
from .lattice import dual_lattice, gamma_lattice
from .tiling import (
    PointCloud,
    TilingConfig,
    config_layer,
    detect_full_periodicity,
    detect_screw_symmetry,
    repetitivity_condition,
)

_kernels.set_threads_from_env()


# --------------------------------------------------------------------------
# numerical estimator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumSample:
    k: tuple
    amplitude: complex
    r: float

    @property
    def intensity(self) -> float:
        return abs(self.amplitude) ** 2


def fourier_bohr_many(cloud: PointCloud, ks, parallel: bool = True) -> np.ndarray:
    """A_r(k) for every row of ks."""
    ks = np.asarray(ks, dtype=float).reshape(-1, 3)
    if len(cloud) == 0:
        return np.zeros(len(ks), dtype=complex)
    return _kernels.exp_sums(cloud.points, ks, parallel) / cloud.r ** 3


def fourier_bohr(cloud: PointCloud, k) -> complex:
    if len(cloud) == 0:
        raise ValueError("fourier_bohr needs a nonempty cloud")
    return complex(fourier_bohr_many(cloud, np.asarray(k, dtype=float).reshape(1, 3))[0])


def intensity_map(cloud: PointCloud, k_grid, parallel: bool = True) -> list[SpectrumSample]:
    ks = np.asarray(k_grid, dtype=float).reshape(-1, 3)
    if len(ks) == 0:
        raise ValueError("k grid is empty")
    amps = fourier_bohr_many(cloud, ks, parallel)
    return [SpectrumSample(tuple(map(float, k)), complex(a), cloud.r) for k, a in zip(ks, amps)]


def intensities(cloud: PointCloud, ks, parallel: bool = True) -> np.ndarray:
    return np.abs(fourier_bohr_many(cloud, ks, parallel)) ** 2


# --------------------------------------------------------------------------
# autocorrelation
# --------------------------------------------------------------------------

@dataclass
class AutocorrHistogram:
    vectors: np.ndarray  # (M, 3) distinct difference vectors
    weights: np.ndarray  # multiplicity / r^3
    window: float
    r: float

    def weight_at(self, x, tol: float = 1e-6) -> float:
        d = np.linalg.norm(self.vectors - np.asarray(x, dtype=float), axis=1)
        hit = d <= tol
        return float(self.weights[hit].sum())


def autocorr_histogram(cloud: PointCloud, window: float, resolution: float = 1e-9) -> AutocorrHistogram:
    """Distinct difference vectors x - y with |x - y| <= window, weighted by count / r^3."""
    from scipy.spatial import cKDTree

    if window > cloud.r / 2:
        raise ValueError(f"window {window} exceeds r/2 = {cloud.r / 2}")
    pts = cloud.points
    n = len(pts)
    if n == 0:
        return AutocorrHistogram(np.zeros((0, 3)), np.zeros(0), window, cloud.r)
    pairs = cKDTree(pts).query_pairs(window, output_type="ndarray")
    diffs = pts[pairs[:, 1]] - pts[pairs[:, 0]]
    diffs = np.concatenate([diffs, -diffs, np.zeros((1, 3))])
    keys = np.round(diffs / resolution).astype(np.int64)
    uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    counts = counts.astype(float)
    zero = np.all(uniq == 0, axis=1)
    counts[zero] = n  # the diagonal x = y
    vec = np.zeros((len(uniq), 3))
    np.add.at(vec, inv.ravel(), diffs)
    vec /= np.bincount(inv.ravel(), minlength=len(uniq))[:, None]
    vec[zero] = 0.0
    return AutocorrHistogram(vec, counts / cloud.r ** 3, window, cloud.r)


# --------------------------------------------------------------------------
# predictions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisPeak:
    position: float
    layer_weight: float
    estimator_weight: float


@dataclass
class Prediction:
    cylinder_radii: np.ndarray
    axis_peaks: list = field(default_factory=list)
    line_directions: Optional[np.ndarray] = None  # union of R^j Gamma* for commensurate angles
    periodic_support: Optional[np.ndarray] = None  # rows kx, ky, kz, re, im

    def to_json(self) -> dict:
        out = {
            "cylinder_radii": [float(x) for x in self.cylinder_radii],
            "axis_peaks": [
                {"position": p.position, "layer_weight": p.layer_weight, "estimator_weight": p.estimator_weight}
                for p in self.axis_peaks
            ],
        }
        if self.line_directions is not None:
            out["planar_support_points"] = self.line_directions.tolist()
        if self.periodic_support is not None:
            out["periodic_support"] = [
                {"k": row[:3].tolist(), "amplitude": [row[3], row[4]], "intensity": row[3] ** 2 + row[4] ** 2}
                for row in self.periodic_support
            ]
        return out


def _unique_sorted(values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=float))
    if len(values) == 0:
        return values
    keep = np.concatenate([[True], np.diff(values) > tol * np.maximum(1.0, values[1:])])
    return values[keep]


def predicted_support(params: TileParams, cutoff: float) -> Prediction:
    """Radii of the cylinders |k_par| = |g|, g in Gamma*, up to cutoff.

    For commensurate angles the planar points of the finite union of
    R^j Gamma* (lines parallel to e3 rather than whole cylinders) are
    returned as well.
    """
    g = gamma_lattice(params.angle, params.a_len)
    dual = dual_lattice(g)
    pts = dual.points_within(cutoff)
    radii = _unique_sorted(np.linalg.norm(pts, axis=1))
    lines = None
    order = params.angle.order
    if order is not None:
        allpts = []
        for j in range(order):
            c, s = _cos_sin(params, j)
            rot = np.array([[c, s], [-s, c]])
            allpts.append(pts @ rot.T)
        lines = _unique_rows(np.concatenate(allpts))
    return Prediction(radii, line_directions=lines)


def _unique_rows(a: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    keys = np.round(a / tol).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return a[np.sort(idx)]


def _cos_sin(params: TileParams, m: int):
    return cos_sin(params.angle, m)


def predicted_axis_spectrum(params: TileParams, n_max: int = 5) -> list[AxisPeak]:
    """Atoms at (0, 0, n/c3), n = 0..n_max, with both weight conventions.

    layer_weight = dens2(Gamma) * dens3; estimator_weight = dens3^2, the
    limit of |A_r|^2.  They agree when c3 = 1.
    """
    d2, d3 = params.density2, params.density3
    c3 = float(params.c3)
    return [AxisPeak(n / c3, d2 * d3, d3 * d3) for n in range(n_max + 1)]


def periodic_amplitude(config: TilingConfig, g2, k3: float, k: int, w) -> complex:
    """Limit of A_r at (g, k3) for a fully periodic stacking.

    Sums the layer structure factors over one vertical period of k layers:
    dens2 / (k c3) * sum_j [g in R^j Gamma*] exp(-2 pi i (g.o_j + k3 h_j)),
    nonzero only if g.w + k3 k c3 is an integer.
    """
    params = config.params
    c3 = float(params.c3)
    g2 = np.asarray(g2, dtype=float)
    t = g2 @ np.asarray(w) + k3 * k * c3
    if abs(t - round(t)) > 1e-9:
        return 0j
    total = 0j
    for j in range(k):
        layer = config_layer(config, j)
        c = g2 @ layer.lattice.T  # g . basis; integers iff g in (R^j Gamma)*
        if np.all(np.abs(c - np.round(c)) <= 1e-9):
            total += np.exp(-2j * math.pi * (g2 @ layer.offset[:2] + k3 * layer.offset[2]))
    return params.density2 / (k * c3) * total


def predicted_periodic_spectrum(config: TilingConfig, cutoff: float, kz_cutoff: float) -> Prediction:
    """Support and amplitudes of a fully periodic stacking up to the cutoffs.

    Rows are kx, ky, kz, Re A, Im A for every candidate point
    g in union_j R^j Gamma*, k3 in (Z - g.w) / (k c3); points whose
    amplitude vanishes through phase cancellation are kept with A = 0.
    """
    per = detect_full_periodicity(config)
    if not per:
        raise ValueError(f"configuration is not fully periodic: {per.reason}")
    k = per.k
    w = np.array(per.vertical_period[:2])
    kc = per.vertical_period[2]
    base = predicted_support(config.params, cutoff)
    rows = []
    for g2 in base.line_directions:
        t0 = g2 @ w
        n_lo = math.ceil(-kz_cutoff * kc + t0 - 1e-9)
        n_hi = math.floor(kz_cutoff * kc + t0 + 1e-9)
        for n in range(n_lo, n_hi + 1):
            k3 = (n - t0) / kc
            amp = periodic_amplitude(config, g2, k3, k, w)
            rows.append([g2[0], g2[1], k3, amp.real, amp.imag])
    base.periodic_support = np.array(rows).reshape(-1, 5)
    base.axis_peaks = predicted_axis_spectrum(config.params, int(kz_cutoff * float(config.params.c3)))
    return base


def cell_points(config: TilingConfig) -> tuple[np.ndarray, float]:
    """Points of one primitive cell of a periodic stacking, and the cell volume.

    Takes k consecutive layers and one representative per coset of each
    layer lattice modulo the common planar period lattice.
    """
    per = detect_full_periodicity(config)
    if not per:
        raise ValueError(f"configuration is not fully periodic: {per.reason}")
    P = per.planar_periods
    P_inv = np.linalg.inv(P)
    out = []
    for j in range(per.k):
        layer = config_layer(config, j)
        n = int(round(abs(np.linalg.det(P) / np.linalg.det(layer.lattice))))
        span = n + 1
        i1, i2 = np.meshgrid(np.arange(-span, span + 1), np.arange(-span, span + 1), indexing="ij")
        frac = np.stack([i1.ravel(), i2.ravel()], axis=1) @ layer.lattice @ P_inv
        frac = frac - np.floor(frac + 1e-9)
        reps = _unique_rows(frac, 1e-7)
        if len(reps) != n:
            raise RuntimeError(f"found {len(reps)} coset representatives, expected {n}")
        xy = reps @ P + layer.offset[:2]
        out.append(np.column_stack([xy, np.full(n, layer.offset[2])]))
    vol = abs(np.linalg.det(P)) * per.vertical_period[2]
    return np.concatenate(out), float(vol)


def structure_factor_cell(config: TilingConfig, kvecs) -> np.ndarray:
    """Brute-force structure factor over one primitive cell, divided by its volume.

    Independent of ``periodic_amplitude``, which works layer by layer in
    reciprocal space.
    """
    pts, vol = cell_points(config)
    ks = np.asarray(kvecs, dtype=float).reshape(-1, 3)
    return np.exp(-2j * math.pi * (ks @ pts.T)).sum(axis=1) / vol


# --------------------------------------------------------------------------
# shell masses and decay probes
# --------------------------------------------------------------------------

@dataclass
class ShellProfile:
    edges: np.ndarray
    mass: np.ndarray
    total: float
    grid_step: float
    k3: float
    r: float


def planar_intensity_grid(cloud: PointCloud, k3: float, extent: float, step: float,
                          eps: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """|A_r|^2 on the square grid {(i h, j h, k3) : |i h|, |j h| <= extent}.

    Uses a type-1 non-uniform FFT; returns (axis values, intensity[i, j]).
    """
    import finufft

    m = int(math.floor(extent / step + 1e-9))
    axis = np.arange(-m, m + 1) * step
    if len(cloud) == 0:
        return axis, np.zeros((len(axis), len(axis)))
    pts = cloud.points
    x = (2 * math.pi * step * pts[:, 0]).astype(np.float64)
    y = (2 * math.pi * step * pts[:, 1]).astype(np.float64)
    t = k3 * pts[:, 2]
    t = t - np.floor(t + 0.5)
    c = np.exp(-2j * math.pi * t).astype(np.complex128)
    f = finufft.nufft2d1(x, y, c, (2 * m + 1, 2 * m + 1), isign=-1, eps=eps, modeord=0)
    amp = f / cloud.r ** 3
    return axis, np.abs(amp) ** 2


def shell_mass_profile(cloud: PointCloud, k3: float, edges: Sequence[float],
                       step: Optional[float] = None) -> ShellProfile:
    """Integrated intensity over the annuli edges[i] <= |k_par| < edges[i+1] at height k3.

    Grid step defaults to 1/(4r); every annulus must be at least one grid
    step wide.  ``total`` is the mass of the disc |k_par| <= edges[-1].
    """
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) < 0):
        raise ValueError("annulus edges must be non-decreasing")
    if step is None:
        step = 1.0 / (4.0 * cloud.r) if cloud.r > 0 else 0.01
    widths = np.diff(edges)
    if np.any((widths > 0) & (widths < step)):
        raise ValueError(f"annulus narrower than the grid step {step}")
    if len(cloud) == 0:
        return ShellProfile(edges, np.zeros(len(edges) - 1), 0.0, step, k3, cloud.r)
    axis, inten = planar_intensity_grid(cloud, k3, edges.max(), step)
    kx, ky = np.meshgrid(axis, axis, indexing="ij")
    rad = np.hypot(kx, ky)
    area = step * step
    mass = np.array([
        inten[(rad >= lo) & (rad < hi)].sum() * area for lo, hi in zip(edges[:-1], edges[1:])
    ])
    total = inten[rad <= edges.max()].sum() * area
    return ShellProfile(edges, mass, float(total), step, k3, cloud.r)


def annulus_mass(cloud: PointCloud, k3: float, lo: float, hi: float, outer: float,
                 step: Optional[float] = None) -> tuple[float, float]:
    """(mass in lo <= |k_par| < hi, mass in |k_par| <= outer)."""
    prof = shell_mass_profile(cloud, k3, [0.0, lo, hi, outer], step)
    return float(prof.mass[1]), prof.total


def on_cylinder_fraction(cloud: PointCloud, k3: float, radii: Sequence[float], half_width: float,
                         outer: float, step: Optional[float] = None) -> tuple[float, float, float]:
    """Fraction of the slice mass within half_width of any predicted radius."""
    if step is None:
        step = 1.0 / (4.0 * cloud.r)
    axis, inten = planar_intensity_grid(cloud, k3, outer, step)
    kx, ky = np.meshgrid(axis, axis, indexing="ij")
    rad = np.hypot(kx, ky)
    disc = rad <= outer
    near = np.zeros_like(disc)
    for r0 in radii:
        near |= np.abs(rad - r0) <= half_width
    area = step * step
    on = float(inten[disc & near].sum() * area)
    tot = float(inten[disc].sum() * area)
    return (on / tot if tot > 0 else 0.0), on, tot


@dataclass
class DecayReport:
    radii: list
    max_intensity: list
    ratio: float

    @property
    def decaying(self) -> bool:
        return self.max_intensity[-1] < self.max_intensity[0]

    def to_json(self) -> dict:
        return {"r": self.radii, "max_intensity": self.max_intensity, "ratio": self.ratio,
                "decaying": self.decaying}


def no_bragg_probe(clouds: Sequence[PointCloud], ks) -> DecayReport:
    """Max intensity over the samples for each cloud; ratio = last / first."""
    maxes = [float(intensities(c, ks).max()) for c in clouds]
    ratio = maxes[-1] / maxes[0] if maxes[0] > 0 else math.inf
    return DecayReport([c.r for c in clouds], maxes, ratio)


def cylinder_samples(params: TileParams, count: int, k3: float, max_norm: float = 1.3) -> np.ndarray:
    """Points R^m g + k3 e3 on cylinders over the shortest dual vectors, m = 0, 1, ..."""
    g = dual_lattice(gamma_lattice(params.angle, params.a_len))
    base = g.points_within(max_norm)
    base = base[np.linalg.norm(base, axis=1) > 1e-12]
    shortest = np.linalg.norm(base, axis=1).min()
    base = base[np.linalg.norm(base, axis=1) <= shortest * (1 + 1e-9)]
    base = base[: max(1, min(len(base), 2))]
    out = []
    m = 0
    while len(out) < count:
        c, s = _cos_sin(params, m)
        rot = np.array([[c, s], [-s, c]])
        for g2 in base:
            if len(out) < count:
                v = rot @ g2
                out.append([v[0], v[1], k3])
        m += 1
    return np.array(out)


def rotation_equivariance_check(cloud: PointCloud, R: np.ndarray, ks) -> float:
    """max |A(R cloud, k) - A(cloud, R^-1 k)| over the sample wave vectors."""
    R = np.asarray(R, dtype=float)
    ks = np.asarray(ks, dtype=float).reshape(-1, 3)
    rotated = PointCloud.from_points(cloud.points @ R.T, cloud.r, cloud.layer_index)
    lhs = fourier_bohr_many(rotated, ks)
    rhs = fourier_bohr_many(cloud, ks @ R)  # rows R^T k = R^-1 k
    return float(np.abs(lhs - rhs).max()) if len(ks) else 0.0


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

@dataclass
class SpectralClass:
    axis: str
    cylinders: str
    off_support: str
    reason: str = ""

    def to_json(self) -> dict:
        return {"axis": self.axis, "cylinders_minus_axis": self.cylinders,
                "off_support": self.off_support, "reason": self.reason}


def spectral_classification(config: TilingConfig, screw_search: int = 12) -> SpectralClass:
    angle = config.params.angle
    per = detect_full_periodicity(config)
    if per:
        return SpectralClass("PurePointDiscrete", "PurePointDiscrete", "Null",
                             f"fully periodic with k = {per.k}")
    if angle.commensurate:
        return SpectralClass("PurePoint", "Singular(undetermined)", "Null",
                             "commensurate but not fully periodic")
    for m in range(1, screw_search + 1):
        if detect_screw_symmetry(config, m).status == "true":
            return SpectralClass("PurePoint", "SingularContinuous", "Null",
                                 f"incommensurate and screw-invariant with m = {m}")
    if config.repetitive and isinstance(angle, RationalCos) and angle.q % 2 == 1 \
            and repetitivity_condition(angle) == "SatisfiesNecessary":
        return SpectralClass("PurePoint", "SingularContinuous", "Null",
                             "incommensurate, declared repetitive, cos(phi) = p/q with q odd")
    return SpectralClass("PurePoint", "Singular(undetermined)", "Null",
                         "only the general support and axis results apply")
