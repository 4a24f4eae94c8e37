from __future__ import annotations

import numpy as np
import pytest

from hooklab.curvature import (
    embedded_oracle,
    positivity_report,
    profile_curvature,
    slice_flux,
    twisted_curvature,
)
from hooklab.hookgen import (
    HookSpec,
    build_hook_mesh,
    build_sphere_mesh,
    build_twisted_neck,
    cylinder_profile,
    round_sphere_profile,
)
from hooklab.ricci import dirichlet_energy


def test_round_cylinder():
    f = profile_curvature(cylinder_profile(0.5, 3.0, 33))
    np.testing.assert_allclose(f.R, 2 / 0.25, rtol=1e-12)
    np.testing.assert_allclose(f.K_mixed, 0.0, atol=1e-12)
    rep = positivity_report(f)
    assert rep.min_sectional == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_round_s3(r):
    f = profile_curvature(round_sphere_profile(r, 129))
    np.testing.assert_allclose(f.R, 6 / r**2, rtol=2e-3)
    assert f.trace_residual() < 1e-12


def test_sphere_mesh_gauss_curvature():
    errs = []
    for res in (33, 65):
        f = embedded_oracle(build_sphere_mesh(2.0, res, n=1, fiber_resolution=2 * (res - 1)))
        errs.append(np.max(np.abs(f.R / 2 - 0.25)))
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.0


def test_twisted_product_and_constant_gauge():
    f0 = twisted_curvature(build_twisted_neck(1.0, 0.0, "cos", 2 * np.pi, 65))
    np.testing.assert_allclose(f0.ric_radial, 0.0, atol=1e-10)
    np.testing.assert_allclose(f0.R, 2.0, rtol=1e-3)
    fc = twisted_curvature(build_twisted_neck(1.0, 0.8, "const", 2 * np.pi, 65))
    np.testing.assert_allclose(fc.R, f0.R, atol=1e-12)


def test_twisted_ricci_identity():
    m = build_twisted_neck(1.0, 1.0, "cos", 2 * np.pi, 129)
    f = twisted_curvature(m)
    w = 2 * np.pi * m.h * m.a
    ric = np.trapezoid(f.ric_radial * w, m.x)
    energy = dirichlet_energy(m, f)
    assert energy > 0
    assert ric == pytest.approx(-energy, rel=1e-2)


def test_slice_flux_product_and_bend():
    spec = HookSpec(L=20, eps1=0.05, eps2=0.0, d0=0.2)
    vals = []
    for a in (2.0, 2.5):
        win = build_hook_mesh(spec, 5, s_grid=a + 0.01 * np.arange(-2, 3), fiber_resolution=(24, 48))
        vals.append(slice_flux(embedded_oracle(win), win, a).value)
    assert vals[0] == pytest.approx(8 * np.pi, rel=5e-3)
    assert vals[1] < vals[0]


def test_twisted_slice_flux_is_8pi_for_product():
    m = build_twisted_neck(1.0, 0.0, "cos", 2 * np.pi, 129)
    fl = slice_flux(twisted_curvature(m), m)
    assert fl.value == pytest.approx(8 * np.pi, rel=1e-3)
