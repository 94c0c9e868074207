import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import direct_sum, dual_norms
from scd import _kernels
from scd.diffraction import (
    annulus_mass,
    autocorr_histogram,
    cell_points,
    cylinder_samples,
    fourier_bohr,
    fourier_bohr_many,
    intensities,
    intensity_map,
    on_cylinder_fraction,
    planar_intensity_grid,
    predicted_axis_spectrum,
    predicted_periodic_spectrum,
    predicted_support,
    rotation_equivariance_check,
    shell_mass_profile,
    spectral_classification,
    structure_factor_cell,
)
from scd.geometry import Generic, RationalCos, RationalPi, TileParams, rotation_power
from scd.tiling import PointCloud, ShiftSequence, TilingConfig, bcc_config, cubic_config, extract_points

P35 = TileParams(Fraction(2, 5), 1, RationalCos(3, 5), Fraction(7, 10))


@pytest.fixture(scope="module")
def random_cloud():
    return extract_points(TilingConfig(P35, ShiftSequence.random(4)), 14)


def test_zero_wave_vector_counts_points(random_cloud):
    a = fourier_bohr(random_cloud, (0, 0, 0))
    assert a == pytest.approx(len(random_cloud) / 14 ** 3, rel=1e-14)


def test_hermitian_symmetry(random_cloud):
    rng = np.random.default_rng(0)
    ks = rng.normal(size=(20, 3))
    a = fourier_bohr_many(random_cloud, ks)
    b = fourier_bohr_many(random_cloud, -ks)
    assert np.allclose(a, np.conj(b), atol=1e-13)


def test_translation_changes_phase_only(random_cloud):
    rng = np.random.default_rng(1)
    ks = rng.normal(size=(10, 3))
    t = np.array([0.37, -1.2, 0.55])
    moved = PointCloud.from_points(random_cloud.points + t, random_cloud.r)
    a = fourier_bohr_many(random_cloud, ks)
    b = fourier_bohr_many(moved, ks)
    assert np.allclose(b, a * np.exp(-2j * np.pi * ks @ t), atol=1e-12)
    assert np.allclose(np.abs(a), np.abs(b), atol=1e-12)


def test_matches_plain_numpy_sum(random_cloud):
    rng = np.random.default_rng(2)
    for k in rng.normal(scale=2, size=(8, 3)):
        assert fourier_bohr(random_cloud, k) == pytest.approx(direct_sum(random_cloud.points, k, 14), abs=1e-12)


def test_serial_and_parallel_bitwise_equal(random_cloud):
    ks = np.random.default_rng(3).normal(size=(64, 3))
    a = _kernels.exp_sums(random_cloud.points, ks, True)
    b = _kernels.exp_sums(random_cloud.points, ks, False)
    assert np.array_equal(a.view(np.float64), b.view(np.float64))


def test_intensity_map_and_errors(random_cloud):
    samples = intensity_map(random_cloud, [[0, 0, 0], [0.1, 0.2, 0.3]])
    assert samples[0].intensity == pytest.approx((len(random_cloud) / 14 ** 3) ** 2)
    with pytest.raises(ValueError):
        intensity_map(random_cloud, np.zeros((0, 3)))
    empty = extract_points(bcc_config(), 0.1)
    with pytest.raises(ValueError):
        fourier_bohr(empty, (0, 0, 0))


def test_autocorrelation_lattices():
    z3 = extract_points(cubic_config(), 16)
    h = autocorr_histogram(z3, 1.1)
    assert h.weight_at((0, 0, 0)) == pytest.approx(len(z3) / 16 ** 3)
    assert h.weight_at((1, 0, 0)) == pytest.approx(1.0, rel=0.1)
    assert h.weight_at((0.5, 0, 0)) == 0
    bcc = extract_points(bcc_config(), 16)
    hb = autocorr_histogram(bcc, 1.1)
    assert hb.weight_at((0, 0, 1)) == pytest.approx(2.0, rel=0.1)
    assert hb.weight_at((0.5, 0.5, 0.5)) == pytest.approx(2.0, rel=0.1)
    # central symmetry
    for v, w in zip(hb.vectors, hb.weights):
        assert hb.weight_at(-v) == pytest.approx(w)
    with pytest.raises(ValueError):
        autocorr_histogram(bcc, 9)


def test_predicted_support_examples():
    bcc = predicted_support(bcc_config().params, 2.0)
    assert np.allclose(bcc.cylinder_radii, [0, 1, math.sqrt(2), 2])
    p = TileParams(0.5, 1, RationalCos(3, 5), 1)
    got = predicted_support(p, 1.3).cylinder_radii
    ref = dual_norms([[1, 0], ["3/5", "4/5"]], 1.3)
    assert np.allclose(got, ref)
    assert np.allclose(got, [0, math.sqrt(5) / 2, 1.25])
    assert np.allclose(predicted_support(p, 1e-6).cylinder_radii, [0])
    assert predicted_support(TileParams(0.5, 1, Generic(1.0), 1), 2).line_directions is None


def test_axis_weights():
    p = TileParams(0.5, 1, RationalCos(3, 5), 1)
    peaks = predicted_axis_spectrum(p, 3)
    assert [pk.position for pk in peaks] == [0, 1, 2, 3]
    assert all(pk.layer_weight == pytest.approx(25 / 16) and pk.estimator_weight == pytest.approx(25 / 16)
               for pk in peaks)
    q = bcc_config().params
    pk = predicted_axis_spectrum(q, 2)
    assert pk[1].position == 2.0
    assert pk[1].layer_weight == pytest.approx(2.0) and pk[1].estimator_weight == pytest.approx(4.0)


def _support_points(pred):
    return pred.periodic_support[np.hypot(pred.periodic_support[:, 3], pred.periodic_support[:, 4]) > 1e-9]


def test_periodic_bcc_support_is_fcc_dual():
    pred = predicted_periodic_spectrum(bcc_config(), 2.1, 2.1)
    pts = _support_points(pred)[:, :3]
    assert len(pts) > 10
    assert np.allclose(pts, np.round(pts), atol=1e-9)
    assert np.all(np.round(pts).sum(axis=1) % 2 == 0)
    rows = pred.periodic_support
    amps = rows[:, 3] + 1j * rows[:, 4]
    ref = structure_factor_cell(bcc_config(), rows[:, :3])
    assert np.allclose(amps, ref, atol=1e-12)
    g = np.array([1.0, 1.0, 0.0])
    assert abs(ref[np.argmin(np.linalg.norm(rows[:, :3] - g, axis=1))]) == pytest.approx(2.0)


def test_periodic_cubic_support_is_z3():
    pred = predicted_periodic_spectrum(cubic_config(), 2.1, 2.1)
    pts = _support_points(pred)[:, :3]
    assert np.allclose(pts, np.round(pts), atol=1e-9)
    amp = np.hypot(_support_points(pred)[:, 3], _support_points(pred)[:, 4])
    assert np.allclose(amp, 1.0)
    g = np.arange(-2, 3)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    all_int = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    all_int = all_int[np.hypot(all_int[:, 0], all_int[:, 1]) <= 2.1]
    assert len(pts) == len(all_int)


def test_periodic_quarter_turn_unit_c3():
    cfg = TilingConfig(TileParams(0.5, 1, RationalPi(1, 2), 1), ShiftSequence.zero())
    pred = predicted_periodic_spectrum(cfg, 1.5, 1.5)
    pts = _support_points(pred)[:, :3]
    assert np.allclose(pts[:, :2], np.round(pts[:, :2]))
    assert np.allclose(4 * pts[:, 2], np.round(4 * pts[:, 2]))
    rows = pred.periodic_support
    assert np.allclose(rows[:, 3] + 1j * rows[:, 4], structure_factor_cell(cfg, rows[:, :3]), atol=1e-12)
    pts_cell, vol = cell_points(cfg)
    assert len(pts_cell) / vol == pytest.approx(cfg.params.density3)


def test_predict_periodic_rejects_aperiodic():
    with pytest.raises(ValueError):
        predicted_periodic_spectrum(TilingConfig(P35), 1, 1)


def test_classifications():
    assert spectral_classification(bcc_config()).cylinders == "PurePointDiscrete"
    cls = spectral_classification(TilingConfig(TileParams(0.5, 1, RationalPi(1, 2), 1), ShiftSequence.random(1)))
    assert (cls.axis, cls.cylinders) == ("PurePoint", "Singular(undetermined)")
    cls = spectral_classification(TilingConfig(P35))
    assert cls.cylinders == "SingularContinuous" and "screw" in cls.reason
    rnd = TilingConfig(P35, ShiftSequence.random(2))
    assert spectral_classification(rnd).cylinders == "Singular(undetermined)"
    rep = TilingConfig(P35, ShiftSequence.random(2), repetitive=True)
    assert spectral_classification(rep).cylinders == "SingularContinuous"
    even = TilingConfig(TileParams(0.4, 1, RationalCos(1, 4), 0.7), ShiftSequence.random(2), repetitive=True)
    assert spectral_classification(even).cylinders == "Singular(undetermined)"
    assert spectral_classification(rnd).off_support == "Null"


def test_off_support_intensity_small():
    cloud = extract_points(TilingConfig(P35, ShiftSequence.random(6)), 40)
    radii = predicted_support(P35, 3).cylinder_radii
    rng = np.random.default_rng(5)
    ks = []
    while len(ks) < 30:
        k = rng.uniform(-2, 2, size=3)
        kp = math.hypot(k[0], k[1])
        if np.min(np.abs(radii - kp)) > 0.1 and abs(k[2] * 0.7 - round(k[2] * 0.7)) > 0.05:
            ks.append(k)
    assert intensities(cloud, ks).max() < 1e-3


def test_shell_mass_concentrates_on_bcc_radii():
    cloud = extract_points(bcc_config(), 12)
    frac, on, tot = on_cylinder_fraction(cloud, 0.0, [0, 1, math.sqrt(2), 2], 2 / 12, 2.2)
    assert frac > 0.95
    prof = shell_mass_profile(cloud, 0.0, [0, 0.5, 0.9, 1.1, 2.2])
    assert prof.mass[1] < 0.01 * prof.total


def test_shell_mass_edge_cases():
    empty = extract_points(bcc_config(), 0.1)
    prof = shell_mass_profile(empty, 0.0, [0, 1], step=0.05)
    assert prof.total == 0 and prof.mass.tolist() == [0.0]
    cloud = extract_points(bcc_config(), 8)
    with pytest.raises(ValueError):
        shell_mass_profile(cloud, 0.0, [0, 0.001, 1])
    with pytest.raises(ValueError):
        shell_mass_profile(cloud, 0.0, [0, 1, 0.5])
    a, t = annulus_mass(cloud, 0.0, 0.4, 0.6, 1.0)
    assert 0 <= a <= t


def test_nufft_matches_direct_sum():
    cloud = extract_points(TilingConfig(P35, ShiftSequence.random(8)), 8)
    axis, grid = planar_intensity_grid(cloud, 0.37, 1.0, 0.25)
    kx, ky = np.meshgrid(axis, axis, indexing="ij")
    ks = np.stack([kx.ravel(), ky.ravel(), np.full(kx.size, 0.37)], axis=1)
    assert np.allclose(grid.ravel(), intensities(cloud, ks), atol=1e-12)


def test_rotation_equivariance():
    cloud = extract_points(TilingConfig(P35, ShiftSequence.random(10)), 10)
    ks = np.random.default_rng(6).normal(size=(25, 3))
    R = rotation_power(P35.angle, 1).matrix()
    assert rotation_equivariance_check(cloud, R, ks) < 1e-12


def test_cylinder_samples_lie_on_shortest_cylinder():
    ks = cylinder_samples(P35, 12, 0.3)
    assert ks.shape == (12, 3)
    assert np.allclose(np.hypot(ks[:, 0], ks[:, 1]), math.sqrt(5) / 2 / 1.0)
    assert np.allclose(ks[:, 2], 0.3)


def test_poisson_oracle_z3():
    # Z^3 + (1/4, 1/4, 0.1): exactly 40 layers in the cube, Bragg weight 1 at integer k
    params = TileParams(Fraction(1, 2), 1, RationalPi(1, 2), 1)
    cfg = TilingConfig(params, ShiftSequence.periodic([0.5]), z=(0.25, 0.25, 0.1), base=(0.0, 0.0))
    cloud = extract_points(cfg, 40)
    assert len(cloud) == 40 ** 3
    ints = intensities(cloud, [[1, 0, 0], [0, 1, 1], [1, 1, 2], [0, 0, 3]])
    assert np.allclose(ints, 1.0, atol=1e-12)
    half = intensities(cloud, [[0.5, 0, 0], [0, 0.5, 1], [0.5, 0.5, 0.5]])
    assert half.max() < 1e-3


def test_aligned_layers_overshoot_density():
    # diagnostic: with c3 dividing r the closed cube holds r/c3 + 1 layers
    cfg = TilingConfig(TileParams(0.5, 1, RationalCos(3, 5), 1))
    cloud = extract_points(cfg, 20)
    ratio = len(cloud) / (20 ** 3 * cfg.params.density3)
    assert ratio == pytest.approx(21 / 20, rel=0.01)


def test_axis_peak_with_whole_layer_count():
    # diagnostic: lifting z3 off the cube faces removes the 41/40 layer excess on the axis
    p = TileParams(Fraction(1, 2), 1, RationalCos(3, 5), 1)
    cfg = TilingConfig(p, ShiftSequence.random(0), z=(0.8, 0.4, 0.1))
    cloud = extract_points(cfg, 40)
    ints = intensities(cloud, [[0, 0, n] for n in (1, 2, 3)])
    assert np.allclose(ints / (25 / 16), 1.0, atol=0.01)
