"""One test per acceptance criterion; each prints a single PASS/FAIL line.

Tolerances are the contractual ones. Criteria 2 and 3 are known to fail
at these tolerances; see README.md for the analysis.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles as O
from scd.diffraction import (
    annulus_mass,
    cylinder_samples,
    intensities,
    no_bragg_probe,
    on_cylinder_fraction,
    predicted_periodic_spectrum,
    predicted_support,
    rotation_equivariance_check,
    structure_factor_cell,
)
from scd.geometry import Generic, RationalCos, RationalPi, TileParams, build_tile, rotation_power, tile_volume
from scd.lattice import CoincidenceSolution, NoSolutionCertificate, aperiodicity_certificate, coincidence_solve
from scd.tiling import ShiftSequence, TilingConfig, bcc_config, extract_points


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n} [{'PASS' if ok else 'FAIL'}]: {detail}")
    assert ok, detail


def integer_grid(n):
    ax = np.arange(-n, n + 1)
    return np.array(np.meshgrid(ax, ax, ax, indexing="ij")).reshape(3, -1).T.astype(float)


def axis_config():
    return TilingConfig(TileParams(Fraction(1, 2), 1, RationalCos(3, 5), 1), ShiftSequence.zero())


@pytest.fixture(scope="module")
def axis_clouds():
    cfg = axis_config()
    return cfg, extract_points(cfg, 20), extract_points(cfg, 40)


@pytest.fixture(scope="module")
def bcc_clouds():
    cfg = bcc_config()
    return {r: extract_points(cfg, r) for r in (20, 40, 80)}


def test_criterion_1_bcc_reproduction(capsys):
    t0 = time.perf_counter()
    cloud = extract_points(bcc_config(), 20)
    ks = integer_grid(3)
    inten = intensities(cloud, ks)
    elapsed = time.perf_counter() - t0
    even = ks.sum(axis=1) % 2 == 0
    # every point is a bcc site, checked by the membership oracle
    members = all(O.in_bcc_translate(p) for p in cloud.points[::97])
    ok = inten[even].min() >= 0.95 * 4 and inten[~even].max() <= 0.04 and elapsed < 30 and members
    report(capsys, 1, ok, f"N={len(cloud)} min even {inten[even].min():.4f} (>= 3.8), "
                          f"max odd {inten[~even].max():.2e} (<= 0.04), {elapsed:.1f} s")


def test_criterion_2_axis_pure_point(capsys):
    t0 = time.perf_counter()
    cfg = axis_config()
    cloud = extract_points(cfg, 40)
    w = 25 / 16
    assert cfg.params.density3 ** 2 == pytest.approx(w)
    on = intensities(cloud, [[0, 0, n] for n in range(1, 6)])
    off = intensities(cloud, [[0, 0, n + 0.5] for n in range(1, 6)])
    elapsed = time.perf_counter() - t0
    rel = np.abs(on / w - 1)
    ok = rel.max() <= 0.05 and off.max() < 0.02 * w and elapsed < 60
    report(capsys, 2, ok, f"on-axis I/(25/16) = {np.round(on / w, 4).tolist()} (need within 5%), "
                          f"half-integer max {off.max() / w:.2e} x 25/16, {elapsed:.1f} s; "
                          f"{len(cloud.layers)} layers meet the closed cube")


def test_criterion_3_aperiodicity_certificate(capsys):
    details, ok = [], True
    for p, q in ((1, 3), (3, 5)):
        t0 = time.perf_counter()
        cert = aperiodicity_certificate(RationalCos(p, q), 4, 100)
        elapsed = time.perf_counter() - t0
        c, s = O.exact_cos_sin("cos", p, q)
        common = O.common_points(c, s, 4, 100)
        oracle_short = min((math.hypot(i + j * float(c), j * float(s)) for i, j in common), default=None)
        agree = (oracle_short is None) == (cert.shortest_norm is None) and (
            oracle_short is None or abs(oracle_short - cert.shortest_norm) < 1e-9)
        ok &= cert.exact and cert.chain_strictly_increasing and not common and agree and elapsed < 5
        details.append(f"cos={p}/{q} chain {cert.index_chain}, strictly increasing "
                       f"{cert.chain_strictly_increasing}, {len(common)} common vectors with norm <= 100 "
                       f"(shortest {oracle_short}), exact intersection agrees {agree}, {elapsed:.2f} s")
    report(capsys, 3, ok, "; ".join(details))


def test_criterion_4_coincidence(capsys):
    details, ok = [], True
    for b1 in (Fraction(0), Fraction(1, 3), Fraction(2, 5), Fraction(3, 5)):
        sols = O.coincidence_brute_force(b1, 50)
        nu_min = min(abs(s[3]) for s in sols)
        minimal = {s for s in sols if abs(s[3]) == nu_min}
        got = coincidence_solve(b1)
        tup = (got.kappa, got.lambda_i, got.mu, got.nu)
        this = isinstance(got, CoincidenceSolution) and tup in minimal and tup == O.minimal_solution(sols) \
            and got.kappa != 0 and got.nu != 0
        ok &= this
        details.append(f"b1={b1}: {tup} oracle {O.minimal_solution(sols)}")
    irr = coincidence_solve(irrational=True)
    ok &= isinstance(irr, NoSolutionCertificate)
    details.append(f"irrational -> {type(irr).__name__}")
    report(capsys, 4, ok, "; ".join(details))


def test_criterion_5_support_singularity(capsys, axis_clouds):
    cfg, c20, c40 = axis_clouds
    radii = predicted_support(cfg.params, 2.65).cylinder_radii
    assert np.allclose(radii[:3], [0, math.sqrt(5) / 2, 1.25])
    frac, _, _ = on_cylinder_fraction(c40, 0.0, radii, 2 / 40, 2.6)
    lo, hi = 0.509, 0.609  # mid-gap between radii 0 and sqrt(5)/2, width 4/40
    m20, _ = annulus_mass(c20, 0.0, lo, hi, 2.6)
    m40, _ = annulus_mass(c40, 0.0, lo, hi, 2.6)
    ok = frac >= 0.8 and m40 <= 0.35 * m20
    report(capsys, 5, ok, f"on-cylinder fraction {frac:.3f} (>= 0.8), off-annulus [{lo}, {hi}] "
                          f"mass ratio r40/r20 {m40 / m20:.3f} (<= 0.35)")


def test_criterion_6_no_off_axis_bragg(capsys, axis_clouds, bcc_clouds):
    cfg, c20, c40 = axis_clouds
    ks = cylinder_samples(cfg.params, 50, 0.3)
    radii = np.hypot(ks[:, 0], ks[:, 1])
    assert len(ks) == 50 and np.all(radii > 0.5)
    rep = no_bragg_probe([c20, c40], ks)
    bound = 0.05 * cfg.params.density3 ** 2
    kb = integer_grid(3)
    kb = kb[kb.sum(axis=1) % 2 == 0]
    calib = no_bragg_probe([bcc_clouds[20], bcc_clouds[40]], kb)
    ok = rep.max_intensity[1] < rep.max_intensity[0] and rep.max_intensity[1] < bound and calib.ratio >= 0.9
    report(capsys, 6, ok, f"max I r20 {rep.max_intensity[0]:.2e}, r40 {rep.max_intensity[1]:.2e} "
                          f"(< {bound:.3f}); bcc calibration ratio {calib.ratio:.3f} (>= 0.9)")


def test_criterion_7_rotation_equivariance(capsys, bcc_clouds):
    rng = np.random.default_rng(2024)
    ks = rng.normal(scale=2.0, size=(100, 3))
    rnd = extract_points(TilingConfig(TileParams(Fraction(2, 5), 1, RationalCos(3, 5), Fraction(7, 10)),
                                      ShiftSequence.random(11)), 12)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    mats = [rotation_power(RationalCos(3, 5), 1).matrix(), q]
    dev = max(rotation_equivariance_check(c, R, ks) for c in (bcc_clouds[20], rnd) for R in mats)
    report(capsys, 7, dev < 1e-9, f"max deviation {dev:.2e} over 100 k, bcc and random clouds (< 1e-9)")


def test_criterion_8_periodic_case(capsys):
    cfg = TilingConfig(TileParams(Fraction(1, 2), 1, RationalPi(1, 2), 1), ShiftSequence.periodic([0.3, 0.1]))
    cloud = extract_points(cfg, 20)
    w = cfg.params.density3 ** 2
    h = 1 / 8
    ax, az = np.arange(-16, 17) * h, np.arange(-8, 9) * h
    ks = np.array(np.meshgrid(ax, ax, az, indexing="ij")).reshape(3, -1).T
    inten = intensities(cloud, ks)
    pred = predicted_periodic_spectrum(cfg, 2 * math.sqrt(2) + 0.01, 1.01).periodic_support
    peaks = ks[inten > 0.1 * w]
    dist = np.array([np.abs(pred[:, :3] - p).max(axis=1).min() for p in peaks])
    in_slab = np.all(np.abs(pred[:, :3]) <= [2, 2, 1], axis=1)
    # brute-force structure factor over a primitive cell decides which support points carry weight
    bf = np.abs(structure_factor_cell(cfg, pred[in_slab, :3])) ** 2
    confirmed = pred[in_slab][bf > 0.1 * w]
    missed = int((intensities(cloud, confirmed[:, :3]) <= 0.1 * w).sum())
    ok = len(peaks) > 0 and dist.max() <= 1e-6 and missed == 0
    report(capsys, 8, ok, f"{len(peaks)} grid peaks, max distance to support {dist.max():.1e} (<= 1e-6); "
                          f"{len(confirmed)} confirmed support points, {missed} missed")


def test_criterion_9_density_and_volume(capsys):
    cfgs = [
        TilingConfig(TileParams(Fraction(2, 5), 1, RationalPi(1, 3), Fraction(7, 10))),
        TilingConfig(TileParams(Fraction(1, 2), 1, RationalCos(1, 3), Fraction(9, 10))),
        TilingConfig(TileParams(Fraction(3, 10), Fraction(13, 10), Generic(1.0), Fraction(3, 4)),
                     ShiftSequence.random(7)),
    ]
    details, ok = [], True
    for cfg in cfgs:
        p = cfg.params
        n = len(extract_points(cfg, 40))
        expect = 40 ** 3 / (float(p.a_len) * p.b2 * float(p.c3))
        _, hull = O.hull_report(build_tile(p).vertices)
        vol_err = abs(tile_volume(build_tile(p)) - hull) / hull
        this = abs(n / expect - 1) <= 0.02 and vol_err <= 1e-12
        ok &= this
        details.append(f"count/expected {n / expect:.4f}, volume rel err {vol_err:.1e}")
    report(capsys, 9, ok, "; ".join(details))


def test_criterion_10_normalization(capsys, bcc_clouds):
    i40 = float(intensities(bcc_clouds[40], [[0, 0, 2]])[0])
    i80 = float(intensities(bcc_clouds[80], [[0, 0, 2]])[0])
    est = 2 * i80 - i40  # the O(1/r) boundary term cancels
    near = [w for w in (2.0, 4.0) if abs(est / w - 1) <= 0.05]
    ok = len(near) == 1
    report(capsys, 10, ok, f"I(r=40) {i40:.4f}, I(r=80) {i80:.4f}, extrapolated {est:.4f}; "
                           f"matches {near[0] if ok else near} (dens3 squared = 4, dens2 x dens3 = 2)")
