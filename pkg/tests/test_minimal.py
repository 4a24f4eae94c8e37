from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hooklab.hookgen import (
    ValidationError,
    build_dumbbell_profile,
    build_revolution_mesh,
    cylinder_profile,
    round_sphere_profile,
)
from hooklab.minimal import (
    area_decay_tracker,
    brute_force_second_variation,
    find_minimal_slices,
    geodesic_audit,
    slice_stability,
    width_surrogate,
)
from hooklab.ricci import FlowConfig, run_to_singularity


def test_sphere_equator_unstable():
    m = round_sphere_profile(1.5, 129)
    sl = find_minimal_slices(m)
    assert [z.verdict for z in sl] == ["unstable"]
    verdict, eig = slice_stability(m, sl[0].location)
    assert verdict == "unstable"
    assert eig == pytest.approx(-2 / 1.5**2, rel=1e-3)


def test_dumbbell_slices():
    sl = find_minimal_slices(build_dumbbell_profile((1.0, 1.0), 0.2, 2.0, 201))
    assert [z.verdict for z in sl] == ["unstable", "stable", "unstable"]
    assert sl[1].eigenvalue > 0


def test_monotone_profile_has_no_slice():
    x = np.linspace(0, 1, 101)
    from hooklab.hookgen import ProfileMetric
    m = ProfileMetric(x, np.ones_like(x), 1.0 + 0.3 * x, 2, "FixedEnds")
    assert find_minimal_slices(m) == []


def test_non_critical_slice_rejected():
    m = round_sphere_profile(1.0, 65)
    with pytest.raises(ValidationError):
        slice_stability(m, 0.5)


@settings(max_examples=10, deadline=None)
@given(b1=st.floats(0.6, 1.4), b2=st.floats(0.6, 1.4), frac=st.floats(0.1, 0.6), ln=st.floats(0.5, 3.0))
def test_classifier_agrees_with_brute_force(b1, b2, frac, ln):
    m = build_dumbbell_profile((b1, b2), frac * min(b1, b2), ln, 401)
    for z in find_minimal_slices(m):
        bf = brute_force_second_variation(m, z.location)
        assert (bf > 0) == (z.verdict == "stable")


def test_width_surrogate_flags():
    x = np.linspace(0, 1, 101)
    from hooklab.hookgen import ProfileMetric
    mono = ProfileMetric(x, np.ones_like(x), 1.0 - 0.3 * x, 2, "FixedEnds")
    w = width_surrogate(mono, (0.2, 0.8), boundary="lo")
    assert w.value == pytest.approx(w.boundary_area)
    assert not w.flag
    bump = ProfileMetric(x, np.ones_like(x), 1.0 - 0.3 * x + 0.2 * np.exp(-((x - 0.5) / 0.05) ** 2), 2, "FixedEnds")
    assert width_surrogate(bump, (0.2, 0.8), boundary="lo").flag


def test_area_decay_on_cylinder_and_sphere():
    traj = run_to_singularity(cylinder_profile(1.0, 2 * np.pi, 33), FlowConfig(rm_max_stop=1e4))
    ad = area_decay_tracker(traj)
    assert ad.slope == pytest.approx(8 * np.pi, rel=1e-2)
    assert ad.ratio_min == pytest.approx(8 * np.pi, rel=1e-2)
    assert ad.ratio_max == pytest.approx(8 * np.pi, rel=1e-2)
    s3 = run_to_singularity(round_sphere_profile(1.0, 33), FlowConfig(rm_max_stop=1e3))
    with pytest.raises(ValidationError):
        area_decay_tracker(s3)


def test_fiber_circle_at_radius_minimum_is_stable_geodesic():
    mesh = build_revolution_mesh(lambda z: 1.0 + 0.3 * z**2, np.linspace(-1, 1, 41), n=1)
    res = geodesic_audit(mesh, seeds=2, points=32, u_range=(19.5, 20.5))
    assert all(r.outcome == "geodesic" for r in res)
    assert all(r.stable for r in res)
    # inscribed 32-gon of the unit circle
    assert res[0].length == pytest.approx(64 * np.sin(np.pi / 32), rel=1e-6)


def test_concave_region_has_no_geodesic():
    mesh = build_revolution_mesh(lambda z: 1.0 - 0.1 * z**2, np.linspace(0.2, 1.2, 41), n=1)
    res = geodesic_audit(mesh, seeds=2, points=32, u_range=(10.0, 30.0))
    assert not any(r.outcome == "geodesic" and r.stable for r in res)
