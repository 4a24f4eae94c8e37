from __future__ import annotations

import numpy as np
import pytest

from hooklab.hookgen import ValidationError, build_dumbbell_profile, cylinder_profile, round_sphere_profile
from hooklab.ricci import FlowConfig, run_to_singularity
from hooklab.singular import bulb_centers, classify, detect_necks, q_series, thin_tube_predicate


@pytest.fixture(scope="module")
def sphere_traj():
    return run_to_singularity(round_sphere_profile(1.0, 33), FlowConfig(rm_max_stop=1e3))


def test_sphere_is_trivial_type_one(sphere_traj):
    rep = classify(sphere_traj)
    assert rep.trivial
    assert rep.verdict == "TypeI"
    assert "verdict = TypeI" in rep.as_text()


def test_q_series_of_exact_shrinker():
    T = 0.25
    t = np.linspace(0, 0.2499, 400)
    q = q_series(t, 1.0 / (4 * (T - t)), T)[1]
    np.testing.assert_allclose(q, 0.25, rtol=1e-12)


def test_classify_invariant_under_parabolic_rescaling(sphere_traj):
    from dataclasses import replace

    lam = 3.0
    ch = dict(sphere_traj.channels)
    ch["max_rm"] = ch["max_rm"] / lam
    ch["min_rm"] = ch["min_rm"] / lam
    scaled = replace(sphere_traj, times=sphere_traj.times * lam, channels=ch, T_hat=sphere_traj.T_hat * lam)
    a, b = classify(sphere_traj), classify(scaled)
    assert (a.verdict, a.trivial) == (b.verdict, b.trivial)
    assert b.q_sup == pytest.approx(a.q_sup, rel=1e-9)


def test_necks():
    cyl = cylinder_profile(1.0, 30.0, 65)
    nk = detect_necks(cyl)
    assert len(nk) == 1 and nk[0].length == pytest.approx(30.0)
    assert detect_necks(round_sphere_profile(1.0, 65), 0.1) == []
    with pytest.raises(ValidationError):
        detect_necks(cyl, 0.5)


def test_thin_tube_cases():
    s3 = round_sphere_profile(1.0, 65)
    assert thin_tube_predicate(s3, 1.5, 0.5, 2.5, 10.0) is False
    m = build_dumbbell_profile((1.0, 1.0), 0.2, 6.0, 401, neck_curvature=0.05)
    b = bulb_centers(m)
    mid = 0.5 * (b[0] + b[-1])
    assert detect_necks(m, 0.2)
    assert thin_tube_predicate(m, mid, b[0], b[-1], 100.0, 0.2) is False
    with pytest.raises(ValidationError):
        thin_tube_predicate(m, mid, b[0], b[0] + 0.1, 10.0, 0.2)
