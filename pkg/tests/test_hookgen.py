from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hooklab.hookgen import (
    HookSpec,
    ValidationError,
    build_dumbbell_profile,
    build_hook_mesh,
    build_radius_profile,
    build_spine,
    build_twisted_neck,
    bump_f,
    radius_eval,
    round_sphere_profile,
    spine_eval,
    twist_beta,
)
from hooklab.minimal import find_minimal_slices


def test_bump_values():
    assert bump_f(0.0) == pytest.approx(1.0, abs=1e-15)
    assert bump_f(0.5) == pytest.approx(0.0, abs=1e-15)
    assert bump_f(-0.5) == pytest.approx(0.0, abs=1e-15)
    assert bump_f(0.25) == pytest.approx(np.exp(-1.0 / 3.0), rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(L=1.0, eps1=0.05, eps2=0.05, d0=0.1),
    dict(L=20, eps1=0.25, eps2=0.05, d0=0.1),
    dict(L=20, eps1=0.05, eps2=0.25, d0=0.1),
    dict(L=20, eps1=0.05, eps2=0.05, d0=0.0),
    dict(L=20, eps1=0.05, eps2=0.05, d0=0.1, n=3),
    dict(L=20, eps1=0.05, eps2=0.05, d0=0.1, L_st=-1.0),
])
def test_hookspec_rejects_out_of_range(kwargs):
    with pytest.raises(ValidationError, match="HookSpec"):
        HookSpec(**kwargs)


@pytest.mark.parametrize("L", [5.0, 20.0])
def test_spine_anchor_points(L):
    pts = spine_eval(L, np.array([0.0, 2.5, 4.0]))["point"]
    np.testing.assert_allclose(pts[0], [1.0, -L - 1.0], atol=1e-12)
    np.testing.assert_allclose(pts[1], [0.0, 7.0 / 6.0], atol=1e-9)
    np.testing.assert_allclose(pts[2], [-1.0, -L], atol=1e-12)


def test_spine_frame_is_orthonormal():
    sp = build_spine(20.0, 801)
    np.testing.assert_allclose(np.linalg.norm(sp.tangent, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(sp.normal, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.sum(sp.tangent * sp.normal, axis=1), 0.0, atol=1e-12)


def test_radius_anchor_values():
    spec = HookSpec(L=20, eps1=0.05, eps2=0.05, d0=0.1)
    phi = radius_eval(spec, np.array([1.5, 1.0 / 20, 2.0 - 0.05]))[0]
    assert phi[0] == pytest.approx(1.05, abs=1e-12)
    assert phi[1] == pytest.approx(1.0, abs=1e-12)
    assert phi[2] == pytest.approx(1.0 + 0.05 * bump_f(0.5 - 0.05), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(L=st.floats(5.0, 40.0), eps1=st.floats(0.01, 0.2), eps2=st.floats(0.02, 0.2))
def test_radius_profile_shape(L, eps1, eps2):
    spec = HookSpec(L=L, eps1=eps1, eps2=eps2, d0=0.1)
    prof = build_radius_profile(spec, int(np.ceil(16 / eps2)) + 9)
    g, v = prof.grid, prof.values
    assert np.all(v[1:-1] > 0)
    assert abs(v[0]) < 1e-6 and abs(v[-1]) < 1e-6
    assert np.all(np.diff(v[g <= 1.5]) >= -1e-14)
    assert np.all(np.diff(v[g >= 1.5]) <= 1e-14)
    assert np.max(prof.d2[(g > 0) & (g <= 1.0)]) <= 1e-12


def test_eps2_zero_limit_is_allowed():
    spec = HookSpec(L=20, eps1=0.05, eps2=0.0, d0=0.2)
    # the bend factor f(eps2 - 1/2) vanishes in the limit
    phi = radius_eval(spec, np.array([1.5, 2.0, 2.5]))[0]
    np.testing.assert_allclose(phi, [1.05, 1.0, 1.0], atol=1e-12)


def test_mesh_reconstruction_and_round_slice():
    spec = HookSpec(L=20, eps1=0.05, eps2=0.0, d0=0.2)
    mesh = build_hook_mesh(spec, 5, s_grid=2.0 + 0.01 * np.arange(-2, 3), fiber_resolution=(8, 16))
    assert mesh.reconstruction_residual() <= 1e-14
    row = mesh.positions[2].reshape(-1, mesh.positions.shape[-1])
    dist = np.linalg.norm(row - mesh.center[2], axis=-1)
    np.testing.assert_allclose(dist, 0.2, rtol=1e-12)


def test_mesh_resolution_check():
    spec = HookSpec(L=20, eps1=0.05, eps2=0.05, d0=0.1)
    with pytest.raises(ValidationError):
        build_hook_mesh(spec, 64)


def test_twist_beta_plateau():
    assert twist_beta(2.5)[0] == pytest.approx(1.0)
    assert twist_beta(2.0)[0] == pytest.approx(0.0)


def test_dumbbell_shapes():
    m = build_dumbbell_profile((1.0, 1.0), 0.2, 2.0, 401)
    s = m.arclength()
    i = int(np.argmin(np.where((s > 1) & (s < s[-1] - 1), m.psi, np.inf)))
    assert m.psi[i] == pytest.approx(0.2, abs=1e-6)
    assert s[i] == pytest.approx(0.5 * s[-1], abs=2 * s[1])
    kinds = [z.verdict for z in find_minimal_slices(build_dumbbell_profile((1.0, 0.5), 0.1, 1.0, 401))]
    assert kinds == ["unstable", "stable", "unstable"]
    s0 = round_sphere_profile(1.0, 65)
    np.testing.assert_allclose(build_dumbbell_profile((1.0, 1.0), 1.0, 0.0, 65).psi, s0.psi)


def test_twisted_area_normalization():
    for amp in (0.0, 0.7):
        m = build_twisted_neck(0.5, amp, "cos", 2 * np.pi, 129)
        assert m.slice_area() == pytest.approx(4 * np.pi * 0.25, rel=1e-3)
    with pytest.raises(ValidationError):
        build_twisted_neck(1.0, 1.0, np.sin, 2 * np.pi, 33)
