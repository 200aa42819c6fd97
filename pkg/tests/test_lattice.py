"""Lattice construction, verification, and bump family tests."""

import json

import numpy as np
import pytest

from conewave.cone import (
    invariant_distance,
    make_cone,
    transport_solve,
    triangular_from_params,
)
from conewave.lattice import (
    BumpFamily,
    LatticeSpec,
    Region,
    _chart_points,
    _smooth_step,
    build_bumps,
    build_lattice,
    check_bump_sum,
    lattice_from_dict,
    shell_indices,
    verify_lattice,
)
from conewave.nilgroup import make_abelian, make_heisenberg


@pytest.fixture(scope="module")
def p2_lattice():
    cone = make_cone("product", 2)
    region = Region(cone.e_dual, 0.9, 2.0)
    spec = build_lattice(cone, 0.3, region)
    return cone, region, spec


def region_points(cone, region, count, seed=0):
    """Rejection sample points of the region through the chart map."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        offs = rng.uniform(-region.r_max, region.r_max, size=(4 * count, cone.ambient_dim))
        pts = _chart_points(cone, region.center, offs)
        pts = pts[region.contains(cone, pts)]
        out.extend(pts)
    return np.stack(out[:count])


def test_product1_frozen_points():
    cone = make_cone("product", 1)
    spec = build_lattice(cone, 0.5, Region(cone.e_dual, 0.0, 4.001))
    logs = np.sort(np.log(spec.points[:, 0]))
    assert spec.R == 2.5
    assert len(spec) == 9
    np.testing.assert_allclose(logs, np.arange(-4, 5, dtype=float), atol=1e-12)


def test_region_and_input_validation():
    cone = make_cone("product", 1)
    with pytest.raises(ValueError):
        Region(cone.e_dual, 1.0, 0.5)
    with pytest.raises(ValueError):
        build_lattice(cone, -0.1, Region(cone.e_dual, 0.0, 1.0))
    with pytest.raises(ValueError):
        build_lattice(cone, 0.5, Region(np.array([-1.0]), 0.0, 1.0))
    with pytest.raises(ValueError):
        build_lattice(cone, 0.5, Region(cone.e_dual, 0.0, 1.0), transport_kind="unitary")


def test_verify_good_annulus(p2_lattice):
    cone, region, spec = p2_lattice
    report = verify_lattice(cone, spec)
    assert report["separation_ok"]
    assert report["covering_ok"]
    assert report["min_separation"] >= 2 * spec.delta * (1 - 1e-9)
    assert report["max_covering_distance"] <= spec.R * spec.delta
    assert 1 <= report["n_overlap"] <= 40
    assert report["count"] == len(spec)


def test_verify_flags_separation_violation(p2_lattice):
    cone, region, spec = p2_lattice
    doubled = np.vstack([spec.points, spec.points[0] * 1.0001])
    transports = spec.transports + (transport_solve(cone, doubled[-1]),)
    bad = LatticeSpec(cone, spec.delta, spec.R, doubled, transports, region)
    report = verify_lattice(cone, bad)
    assert not report["separation_ok"]
    assert any(v[0] == "separation" for v in report["violations"])


def test_verify_flags_covering_violation():
    cone = make_cone("product", 2)
    region = Region(cone.e_dual, 0.0, 3.0)
    single = LatticeSpec(cone, 0.3, 2.5, cone.e_dual[None, :],
                         (transport_solve(cone, cone.e_dual),), region)
    report = verify_lattice(cone, single)
    assert not report["covering_ok"]
    assert report["max_covering_distance"] > 2.0


def test_lattice_transport_invariance():
    cone = make_cone("product", 2)
    delta = 0.35
    spec = build_lattice(cone, delta, Region(cone.e_dual, 0.0, 1.4))
    t = triangular_from_params(cone, np.array([np.exp(0.8), np.exp(-0.3)]))
    moved_region = Region(t.act_dual(cone.e_dual), 0.0, 1.4)
    moved = LatticeSpec(cone, delta, spec.R, t.act_dual(spec.points),
                        tuple(transport_solve(cone, p) for p in t.act_dual(spec.points)),
                        moved_region)
    r0 = verify_lattice(cone, spec)
    r1 = verify_lattice(cone, moved)
    assert r1["separation_ok"] and r1["covering_ok"]
    assert r1["count"] == r0["count"]
    assert abs(r1["min_separation"] - r0["min_separation"]) < 1e-9


def test_point_count_scaling():
    cone = make_cone("product", 2)
    region = Region(cone.e_dual, 0.0, 1.6)
    coarse = build_lattice(cone, 0.4, region)
    fine = build_lattice(cone, 0.2, region)
    ratio = len(fine) / len(coarse)
    assert 2.5 <= ratio <= 6.0


def test_lorentz_chart_matches_group_action():
    cone = make_cone("lorentz", 4)
    rng = np.random.default_rng(3)
    center = np.array([2.0, 0.3, -0.2, 0.4])
    t_c = transport_solve(cone, center)
    offs = rng.uniform(-0.8, 0.8, size=(20, 4))
    pts = _chart_points(cone, center, offs)
    for v, p in zip(offs, pts):
        t = triangular_from_params(cone, (float(np.exp(v[0])), float(v[1]), v[2:].copy()))
        expected = t_c.act_dual(t.act_dual(cone.e_dual))
        np.testing.assert_allclose(p, expected, atol=1e-12)
        # chart offsets measure distance to the center exactly at the base
        d = invariant_distance(cone, center, p)
        assert abs(d - invariant_distance(cone, cone.e_dual, t.act_dual(cone.e_dual))) < 1e-10


def test_lorentz_lattice_verifies():
    cone = make_cone("lorentz", 3)
    spec = build_lattice(cone, 0.5, Region(cone.e_dual, 0.0, 1.2))
    report = verify_lattice(cone, spec)
    assert report["separation_ok"]
    assert report["covering_ok"]
    assert len(spec) >= 4


def test_quadratic_transport_flag():
    cone = make_cone("lorentz", 3)
    spec = build_lattice(cone, 0.5, Region(cone.e_dual, 0.0, 1.2),
                         transport_kind="quadratic")
    for lam, t in zip(spec.points, spec.transports):
        np.testing.assert_allclose(t.act_dual(cone.e_dual), lam, atol=1e-10)
        tri = transport_solve(cone, lam)
        np.testing.assert_allclose(t.delta, tri.delta, atol=1e-12)
        # genuinely a different representative: symmetric, not triangular
        np.testing.assert_allclose(t.matrix, t.matrix.T, atol=1e-12)


def test_profile_shape_and_smoothness(p2_lattice):
    cone, region, spec = p2_lattice
    bumps = build_bumps(cone, spec, "cover")
    assert spec.delta <= bumps.plateau_radius < bumps.outer_radius
    assert bumps.outer_radius == spec.R * spec.delta
    assert bumps.profile(0.0) == 1.0
    assert bumps.profile(bumps.plateau_radius) == 1.0
    assert bumps.profile(bumps.outer_radius) == 0.0
    # C^2 ramp: value and first two differences vanish at both ends
    h = 1e-4
    for edge in (0.0, 1.0):
        inner = _smooth_step(abs(edge - h))
        outer = _smooth_step(edge)
        assert abs(inner - outer) < 12 * h**3 + 1e-12


def test_bump_sums_by_mode(p2_lattice):
    cone, region, spec = p2_lattice
    pts = region_points(cone, region, 300, seed=7)
    cover = check_bump_sum(build_bumps(cone, spec, "cover"), pts)
    assert cover["ok"] and cover["min_sum"] >= 1.0 - 1e-8
    part = check_bump_sum(build_bumps(cone, spec, "partition"), pts)
    assert part["ok"] and part["max_deviation"] < 1e-8
    psq = check_bump_sum(build_bumps(cone, spec, "partition_sq"), pts)
    assert psq["ok"] and psq["max_deviation"] < 1e-8


def test_single_point_lattice_constant_bump():
    cone = make_cone("product", 2)
    region = Region(cone.e_dual, 0.0, 0.2)
    spec = build_lattice(cone, 0.5, region)
    assert len(spec) == 1
    bumps = build_bumps(cone, spec, "partition")
    pts = region_points(cone, region, 100, seed=1)
    np.testing.assert_allclose(bumps.evaluate(0, pts), 1.0, atol=1e-14)


def test_build_bumps_rejects_bad_input(p2_lattice):
    cone, region, spec = p2_lattice
    with pytest.raises(ValueError):
        build_bumps(cone, spec, "tiling")
    sparse = LatticeSpec(cone, spec.delta, spec.R, spec.points[:1],
                         spec.transports[:1], region)
    with pytest.raises(ValueError):
        build_bumps(cone, sparse, "cover")


def test_shell_indices_abelian_line():
    data = make_abelian(make_cone("product", 1))
    cone = data.cone
    spec = build_lattice(cone, 0.5, Region(cone.e_dual, 0.0, 4.001))
    bumps = build_bumps(cone, spec, "cover")
    idx = shell_indices(data, spec, bumps, 4.0)
    logs = np.sort(np.log(spec.points[idx, 0]))
    np.testing.assert_allclose(logs, [-1.0, 0.0, 1.0], atol=1e-12)
    with pytest.raises(ValueError):
        shell_indices(data, spec, bumps, 0.9)


def test_shell_indices_heisenberg():
    # N(lambda) = 5 lambda^2 on the half line; support radius R delta = 1.25
    # around log lambda_k, so the shell [1/30, 30] in N reads
    # log lambda_k in [-3.75, 2.14] and only the top point drops out.
    data = make_heisenberg()
    cone = data.cone
    spec = build_lattice(cone, 0.5, Region(cone.e_dual, 0.0, 3.001))
    bumps = build_bumps(cone, spec, "cover")
    idx = shell_indices(data, spec, bumps, 30.0)
    logs = np.sort(np.log(spec.points[idx, 0]))
    np.testing.assert_allclose(logs, [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0], atol=1e-12)


def test_overlap_consistent_across_regions():
    cone = make_cone("product", 2)
    delta = 0.3
    far = transport_solve(cone, np.array([np.e**4, np.e**4]))
    r1 = Region(cone.e_dual, 0.9, 2.0)
    r2 = Region(far.act_dual(cone.e_dual), 0.9, 2.0)
    n1 = verify_lattice(cone, build_lattice(cone, delta, r1))["n_overlap"]
    n2 = verify_lattice(cone, build_lattice(cone, delta, r2))["n_overlap"]
    assert abs(n1 - n2) <= 1


def test_lattice_serialization_roundtrip(p2_lattice):
    cone, region, spec = p2_lattice
    blob = json.dumps(spec.to_dict())
    back = lattice_from_dict(cone, json.loads(blob))
    np.testing.assert_allclose(back.points, spec.points, atol=1e-12)
    assert back.delta == spec.delta and back.R == spec.R
    assert verify_lattice(cone, back)["n_overlap"] == verify_lattice(cone, spec)["n_overlap"]
