import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import hull_report
from scd.geometry import (
    Generic,
    ParameterError,
    RationalCos,
    RationalPi,
    TileParams,
    angle_from_json,
    build_tile,
    extreme_vertices,
    mesh_to_obj,
    polytope_volume,
    rotation_power,
    tile_volume,
)
from scd.numbers import QuadNumber

BCC = TileParams(Fraction(1, 2), 1, RationalPi(1, 2), Fraction(1, 2))


def test_bcc_vertices():
    mesh = build_tile(BCC)
    expect = {(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0.5, 0.5), (1, 0.5, 0.5),
              (0.5, 0, -0.5), (0.5, 1, -0.5)}
    got = {tuple(float(round(x, 12)) + 0.0 for x in v) for v in mesh.vertices}
    assert got == expect


def test_all_vertices_extreme_against_hull_oracle():
    p = TileParams(0.4, 1, RationalPi(1, 3), 0.7)
    mesh = build_tile(p)
    ext, vol = hull_report(mesh.vertices)
    assert ext == set(range(8))
    assert all(extreme_vertices(mesh.vertices, mesh.facets))
    assert tile_volume(mesh) == pytest.approx(vol, rel=1e-12)
    assert tile_volume(mesh) == pytest.approx(0.7 * math.sin(math.pi / 3), rel=1e-12)
    assert tile_volume(mesh) == pytest.approx(0.60622, abs=1e-5)


def test_bcc_volume_half():
    mesh = build_tile(BCC)
    assert tile_volume(mesh) == 0.5
    assert hull_report(mesh.vertices)[1] == pytest.approx(0.5, rel=1e-12)
    assert polytope_volume(mesh.vertices, mesh.facets) == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("s", [0.5, 2.0, 3.7])
def test_volume_scaling(s):
    p = TileParams(0.3, 1.2, RationalCos(3, 5), 0.8)
    q = TileParams(0.3, 1.2 * s, RationalCos(3, 5), 0.8 * s)
    assert tile_volume(build_tile(q)) == pytest.approx(s ** 3 * tile_volume(build_tile(p)), rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(lam=0), dict(lam=1), dict(lam=-0.2), dict(a_len=0), dict(c3=-1),
])
def test_invalid_parameters_rejected(kwargs):
    base = dict(lam=0.5, a_len=1, angle=RationalPi(1, 2), c3=1)
    base.update(kwargs)
    with pytest.raises(ParameterError):
        TileParams(**base)


def test_degenerate_rhomb_rejected():
    with pytest.raises(ParameterError):
        TileParams.from_b(0.5, 1.0, 0.0, 1.0)
    with pytest.raises(ParameterError):
        Generic(0.0)


@pytest.mark.parametrize("bad", [(3, 3), (4, 2), (-1, 3), (2, 4)])
def test_rational_cos_invariants(bad):
    with pytest.raises(ParameterError):
        RationalCos(*bad)


def test_rational_pi_invariants():
    RationalPi(1, 2)
    with pytest.raises(ParameterError):
        RationalPi(2, 3)


@given(
    lam=st.floats(0.01, 0.99),
    a_len=st.floats(0.2, 5),
    phi=st.floats(0.05, math.pi / 2),
    c3=st.floats(0.1, 5),
)
@settings(max_examples=60, deadline=None)
def test_random_tiles_convex_with_volume_identity(lam, a_len, phi, c3):
    p = TileParams(lam, a_len, Generic(phi), c3)
    mesh = build_tile(p)
    ext, vol = hull_report(mesh.vertices)
    assert ext == set(range(8))
    assert p.b1 ** 2 + p.b2 ** 2 == pytest.approx(a_len ** 2, rel=1e-12)
    assert tile_volume(mesh) == pytest.approx(vol, rel=1e-9)


def test_rhomb_is_interior():
    mesh = build_tile(TileParams(0.4, 1, RationalCos(1, 3), 0.7))
    n, h = mesh.halfspaces()
    centre = 0.5 * (mesh.a + mesh.b)
    assert np.all(n @ centre - h < -1e-6)
    # no facet lies in the plane z = 0
    assert not any(abs(abs(f.normal[2]) - 1) < 1e-12 and abs(f.offset) < 1e-12 for f in mesh.facets)


def test_rotation_examples():
    assert rotation_power(RationalCos(3, 5), 0).is_identity()
    r = rotation_power(RationalCos(3, 5), 1)
    assert r.planar == ((Fraction(3, 5), Fraction(4, 5)), (Fraction(-4, 5), Fraction(3, 5)))
    assert rotation_power(RationalPi(1, 2), 4).is_identity()


@pytest.mark.parametrize("angle", [RationalCos(3, 5), RationalCos(1, 3), RationalPi(1, 3),
                                   RationalPi(1, 4), RationalPi(1, 6)])
def test_exact_rotation_laws(angle):
    for m in range(-4, 6):
        r = rotation_power(angle, m)
        assert r.exact
        assert r.cos * r.cos + r.sin * r.sin == 1
        for n in range(-3, 4):
            lhs = rotation_power(angle, m) @ rotation_power(angle, n)
            rhs = rotation_power(angle, m + n)
            assert (lhs.cos, lhs.sin) == (rhs.cos, rhs.sin)


def test_rational_cos_entries_in_expected_field():
    r = rotation_power(RationalCos(1, 3), 3)
    assert isinstance(r.cos, QuadNumber) and r.sin.d == 2


def test_float_rotation_laws():
    ang = Generic(1.0)
    for m in range(-5, 6):
        M = rotation_power(ang, m).matrix()
        assert np.allclose(M @ M.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(M @ [0, 0, 1], [0, 0, 1])
        assert np.allclose(M @ rotation_power(ang, 2).matrix(), rotation_power(ang, m + 2).matrix(), atol=1e-12)


def test_rotation_maps_b_to_a():
    p = TileParams(0.5, 1, RationalCos(3, 5), 1)
    v = p.vectors()
    assert np.allclose(rotation_power(p.angle, 1).matrix() @ v["b"], v["a"])


def test_obj_is_closed_and_outward():
    mesh = build_tile(TileParams(0.4, 1, RationalPi(1, 3), 0.7))
    text = mesh_to_obj(mesh)
    verts = np.array([[float(t) for t in l.split()[1:]] for l in text.splitlines() if l.startswith("v ")])
    faces = [[int(t) - 1 for t in l.split()[1:]] for l in text.splitlines() if l.startswith("f ")]
    assert len(verts) == 8
    edges = Counter()
    for f in faces:
        for i in range(3):
            edges[(f[i], f[(i + 1) % 3])] += 1
    # every directed edge appears once and its reverse once: closed and consistently oriented
    assert all(c == 1 for c in edges.values())
    assert all((b, a) in edges for a, b in edges)
    signed = sum(np.dot(verts[a], np.cross(verts[b], verts[c])) for a, b, c in faces) / 6
    assert signed == pytest.approx(mesh.params.volume, rel=1e-12)


def test_params_json_round_trip():
    p = TileParams("2/5", "13/10", RationalCos(1, 3), 0.75)
    q = TileParams.from_json(p.to_json())
    assert q == p
    assert angle_from_json(Generic(1.0).to_json()) == Generic(1.0)
