from __future__ import annotations

import numpy as np
import pytest

from hooklab.hookgen import (
    ValidationError,
    build_dumbbell_profile,
    build_twisted_neck,
    cylinder_profile,
    round_sphere_profile,
)
from hooklab.ricci import (
    FlowConfig,
    PinchEvent,
    extinction_estimate,
    pinching_monitor,
    run_to_singularity,
    step_profile_flow,
    step_twisted_flow,
)


@pytest.mark.parametrize("kwargs", [dict(cfl=1.5), dict(cfl=0.0), dict(regrid_policy="x"),
                                    dict(epsilon_neck=0.5), dict(regrid_threshold=1.0)])
def test_flow_config_validation(kwargs):
    with pytest.raises(ValidationError):
        FlowConfig(**kwargs)


def test_cylinder_step_matches_exact():
    m = cylinder_profile(0.8, 4.0, 33)
    t, dt = 0.0, 1e-3
    for _ in range(100):
        m = step_profile_flow(m, dt)
        t += dt
    np.testing.assert_allclose(m.psi**2, 0.64 - 2 * t, rtol=1e-6)


def test_sphere_singular_time():
    traj = run_to_singularity(round_sphere_profile(1.0, 33), FlowConfig(rm_max_stop=1e3))
    assert traj.T_hat == pytest.approx(0.25, rel=1e-2)
    assert np.nanmin(traj.channels["pinch1"]) >= 0


def test_fixed_ends_long_cylinder():
    traj = run_to_singularity(cylinder_profile(1.0, 12.0, 97, topology="FixedEnds"), FlowConfig(rm_max_stop=1e4))
    assert traj.T_hat == pytest.approx(0.5, rel=1e-2)


def test_pinching_monitor_cases():
    assert pinching_monitor(round_sphere_profile(1.0, 65), 0.0)["pinch1"] >= 0
    r = pinching_monitor(cylinder_profile(1.0, 2.0, 17), 0.0)
    assert np.isnan(r["pinch2"])
    m = build_dumbbell_profile((1.0, 1.0), 0.2, 2.0, 201)
    assert pinching_monitor(m, 0.0, normalization=25.0)["pinch1"] >= 0


def test_twisted_constant_twist_matches_product():
    a = build_twisted_neck(1.0, 0.0, "cos", 2 * np.pi, 33)
    b = build_twisted_neck(1.0, 0.6, "const", 2 * np.pi, 33)
    for _ in range(20):
        a = step_twisted_flow(a, 1e-3)
        b = step_twisted_flow(b, 1e-3)
    np.testing.assert_allclose(b.h, a.h, atol=1e-12)
    np.testing.assert_allclose(b.u, 0.6, atol=1e-12)


def test_product_extinction():
    traj = run_to_singularity(build_twisted_neck(1.0, 0.0, "cos", 2 * np.pi, 33))
    T, res = extinction_estimate(traj)
    assert T == pytest.approx(0.5, rel=5e-3)
    assert res < 1e-6


def test_pinch_floor_stops_neck_run():
    m = build_dumbbell_profile((1.0, 1.0), 0.2, 2.0, 101)
    traj = run_to_singularity(m, FlowConfig(rm_max_stop=1e12, pinch_floor=5e-2))
    assert traj.reason == "pinch_floor"
    assert traj.channels["neck_psi"][-1] <= 5e-2 * 1.05
    assert np.all(traj.channels["bulb_rm"] < 10.0)


def test_step_returns_pinch_event_at_zero_radius():
    m = cylinder_profile(0.05, 1.0, 17)
    out = step_profile_flow(m, 2e-3, cfl=0.99, diffusion_cfl=1e9)
    assert isinstance(out, PinchEvent)
