"""Acceptance suite: one test per criterion, each recording a pass/fail line."""

from __future__ import annotations

from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from hooklab.cli import _build_metric, _flow_config, compare_resolutions, load_config
from hooklab.curvature import embedded_oracle, positivity_report, profile_curvature_from_derivatives, slice_flux
from hooklab.hookgen import (
    HookSpec,
    build_dumbbell_profile,
    build_hook_mesh,
    build_twisted_neck,
    cylinder_profile,
    radius_eval,
    round_sphere_profile,
)
from hooklab.minimal import (
    appearance_profile,
    appearance_run,
    area_decay_tracker,
    brute_force_second_variation,
    find_minimal_slices,
    geodesic_audit,
)
from hooklab.ricci import FlowConfig, extinction_estimate, run_to_singularity
from hooklab.singular import bulb_centers, classify, thin_tube_predicate

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
EIGHT_PI = 8 * np.pi


def _config(kind: str, stem: str):
    return load_config(kind, (CONFIGS / f"{stem}.cfg").read_text())


@pytest.fixture(scope="module")
def neckpinch():
    p = _config("classify", "neckpinch")
    return p, run_to_singularity(_build_metric(p), _flow_config(p))


@pytest.fixture(scope="module")
def sphere():
    p = _config("flow-run", "s3")
    return run_to_singularity(_build_metric(p), _flow_config(p))


def test_c01_exact_shrinkers(criterion, sphere):
    cfg = FlowConfig(rm_max_stop=1e4)
    s3 = [run_to_singularity(round_sphere_profile(1.0, n), cfg).T_hat for n in (33, 65, 129)]
    s3_table = compare_resolutions("sphere T_hat", (33, 65, 129), s3, exact=0.25)
    cyl_runs = [run_to_singularity(cylinder_profile(1.0, 2 * np.pi, n), cfg) for n in (17, 33, 65)]
    cyl_table = compare_resolutions("cylinder T_hat", (17, 33, 65), [r.T_hat for r in cyl_runs], exact=0.5)
    base = cyl_runs[2]
    t = base.times
    w = t <= 0.4
    psi_err = float(np.max(np.abs(base.channels["neck_psi"][w] ** 2 - (1 - 2 * t[w])) / (1 - 2 * t[w])))
    rel = abs(sphere.T_hat - 0.25) / 0.25
    orders = s3_table.orders + cyl_table.orders
    ok = rel <= 1e-2 and psi_err <= 1e-3 and all(1.7 <= o <= 2.3 for o in orders)
    criterion(1, ok, f"S3 T_hat rel err {rel:.2e}; cylinder psi^2 rel err {psi_err:.2e}; "
                     f"orders S3 {s3_table.orders[0]:.2f},{s3_table.orders[1]:.2f} "
                     f"cylinder {cyl_table.orders[0]:.2f},{cyl_table.orders[1]:.2f}")
    assert ok


def test_c02_product_extinction_law(criterion):
    traj = run_to_singularity(build_twisted_neck(1.0, 0.0, "cos", 2 * np.pi, 65), FlowConfig())
    T, _ = extinction_estimate(traj)
    early = traj.times < 0.4
    slope = np.polyfit(traj.times[early], traj.channels["area"][early], 1)[0]
    ok = abs(slope / -EIGHT_PI - 1) <= 5e-3 and abs(T / 0.5 - 1) <= 5e-3
    criterion(2, ok, f"dA/dt / (-8pi) = {slope / -EIGHT_PI:.5f}; T_ext = {T:.5f}")
    assert ok


def test_c03_extinction_comparison(criterion):
    p = _config("extinction-compare", "extinction")
    tw = p.section("twisted")
    cfg = _flow_config(p)
    amp = max(tw["amplitudes"])
    runs = {}
    for res in (33, tw["resolution"]):
        for a in (0.0, amp):
            runs[res, a] = run_to_singularity(build_twisted_neck(tw["d0"], a, tw["shape"], tw["circle_length"], res), cfg)
    base = tw["resolution"]
    T1, r1 = extinction_estimate(runs[base, amp])
    T0, r0 = extinction_estimate(runs[base, 0.0])
    gap = T1 - T0
    ident = {res: np.nanmax(runs[res, amp].channels["identity_residual"]) / EIGHT_PI for res in (33, base)}
    ok = gap > 10 * max(r0, r1) and ident[base] <= 1e-2 and ident[base] < ident[33]
    criterion(3, ok, f"T_ext gap {gap:.4f} vs 10x fit residual {10 * max(r0, r1):.1e}; identity/8pi "
                     f"{ident[33]:.2e} (N=33) -> {ident[base]:.2e} (N={base})")
    assert ok


def test_c04_slice_flux(criterion):
    spec = HookSpec(L=20, eps1=0.05, eps2=0.0, d0=0.2, n=2)
    flux2, gaps = [], []
    for ds, fib in ((0.02, (12, 24)), (0.01, (24, 48)), (0.005, (48, 96))):
        vals = []
        for a in (2.0, 2.5):
            win = build_hook_mesh(spec, 5, s_grid=a + ds * np.arange(-2, 3), fiber_resolution=fib)
            vals.append(slice_flux(embedded_oracle(win), win, a).value)
        flux2.append(vals[0])
        gaps.append(vals[0] - vals[1])
    spread = max(abs(g / gaps[-1] - 1) for g in gaps)
    ok = abs(flux2[-1] / EIGHT_PI - 1) <= 2e-2 and min(gaps) > 0 and spread <= 0.2
    criterion(4, ok, f"flux(2)/8pi = {flux2[-1] / EIGHT_PI:.4f}; gap/8pi = "
                     f"{', '.join(f'{g / EIGHT_PI:.5f}' for g in gaps)} (spread {spread:.1e})")
    assert ok


def test_c05_hook_positivity(criterion):
    mins = {}
    region_min = None
    for d0 in (0.1, 0.05):
        spec = HookSpec(L=20, eps1=0.05, eps2=0.05, d0=d0)
        mesh = build_hook_mesh(spec, 512, fiber_resolution=(12, 24))
        f = embedded_oracle(mesh)
        mins[d0] = positivity_report(f).min_R
        if d0 == 0.1:
            P = mesh.positions
            region_min = positivity_report(f, (P[..., 0] > 0) & (P[..., 1] < -1)).min_sectional
    ratio = mins[0.05] / mins[0.1]
    ok = mins[0.1] > 0 and ratio >= 3 and region_min > 0
    criterion(5, ok, f"min R {mins[0.1]:.2f} (d0=0.1), ratio at d0/2 {ratio:.2f}; "
                     f"min sectional in x1>0, x2<-1: {region_min:.2e}")
    assert ok


def test_c06_neckpinch(criterion, neckpinch):
    p, traj = neckpinch
    c = p.section("classify")
    rep = classify(traj, q_bound=c["q_bound"], trend_tol=c["trend_tol"],
                   trivial_fraction=c["trivial_fraction"], epsilon=c["epsilon"])
    ad = area_decay_tracker(traj)
    bulb_frac = float(traj.channels["bulb_rm"][-1] / traj.channels["max_rm"][-1])
    ok = (not rep.trivial and bulb_frac < 0.01 and rep.verdict == "TypeI"
          and -0.1 <= rep.q_log_slope <= 0.1 and ad.within_bounds)
    criterion(6, ok, f"T_hat {traj.T_hat:.5f}; bulb/max |Rm| {bulb_frac:.1e}; {rep.verdict} "
                     f"(log-slope {rep.q_log_slope:+.3f}); area ratio/8pi "
                     f"[{ad.ratio_min / EIGHT_PI:.3f}, {ad.ratio_max / EIGHT_PI:.3f}]")
    assert ok


def test_c07_stability_classifier(criterion):
    rng = np.random.default_rng(7)
    checked = disagree = 0
    for _ in range(20):
        b1, b2 = rng.uniform(0.6, 1.4, 2)
        rn = rng.uniform(0.1, 0.6) * min(b1, b2)
        m = build_dumbbell_profile((b1, b2), rn, rng.uniform(0.5, 3.0), 401, neck_curvature=rng.uniform(0.5, 3.0))
        for z in find_minimal_slices(m):
            brute = "stable" if brute_force_second_variation(m, z.location) > 0 else "unstable"
            checked += 1
            disagree += brute != z.verdict
    ok = disagree == 0 and checked >= 40
    criterion(7, ok, f"{checked - disagree}/{checked} critical slices agree on 20 random dumbbells")
    assert ok


def test_c08_appearance(criterion):
    p = _config("appearance-demo", "appearance")
    a = p.section("appearance")
    cfg = _flow_config(p)
    t_appear, notes, ok = [], [], True
    for slope in a["slopes"]:
        m = appearance_profile(slope, end_radius=a["end_radius"], length=a["length"], resolution=a["resolution"],
                               n=a["n"])
        r = appearance_run(m, (a["region_lo"], a["region_hi"]), boundary=a["boundary"], margin=a["margin"],
                           t_max=a["t_max"], config=cfg)
        none_at_start = not any(z.verdict == "stable" for z in r.initial_slices)
        transition = (not r.flag[0]) and np.isfinite(r.t_flag)
        ok &= none_at_start and np.isfinite(r.t_appear) and transition and r.stable_at_flag
        t_appear.append(r.t_appear)
        notes.append(f"{slope:g}: t_appear {r.t_appear:.2e}, flag {r.t_flag:.2e}")
    d = np.diff(t_appear)
    ok &= bool(np.all(d > 0) or np.all(d < 0))
    criterion(8, ok, "; ".join(notes))
    assert ok


def test_c09_monitors(criterion, neckpinch, sphere):
    p, traj = neckpinch
    c = p.section("classify")
    twisted = run_to_singularity(build_twisted_neck(1.0, 1.0, "cos", 2 * np.pi, 33), FlowConfig())
    cyl = run_to_singularity(cylinder_profile(1.0, 2 * np.pi, 65), FlowConfig(rm_max_stop=1e4))
    worst = min(float(np.nanmin(np.r_[t.channels["pinch1"], t.channels["pinch2"], np.inf]))
                for t in (traj, sphere, twisted, cyl))

    def fire_times(tr):
        out = []
        for t, m in zip(tr.snapshot_times, tr.snapshots):
            stable = [z for z in find_minimal_slices(m) if z.verdict == "stable"]
            bulbs = bulb_centers(m)
            x = stable[0].location if stable else 0.5 * m.arclength()[-1]
            x1, x2 = (bulbs[0], bulbs[-1]) if len(bulbs) >= 2 else (0.25 * m.arclength()[-1], 0.75 * m.arclength()[-1])
            try:
                if thin_tube_predicate(m, x, x1, x2, c["thin_tube_C"], c["thin_tube_epsilon"]):
                    out.append(float(t))
            except ValueError:
                pass
        return out

    neck_fires = fire_times(traj)
    sphere_fires = fire_times(sphere)
    tol = 1e-6
    ok = worst >= -tol and bool(neck_fires) and neck_fires[0] < traj.T_hat and not sphere_fires
    lead = f"{traj.T_hat - neck_fires[0]:.2e} before T_hat" if neck_fires else "never"
    criterion(9, ok, f"min pinching residual {worst:.3g}; thin tube first fires {lead} "
                     f"({len(neck_fires)} snapshots); S3 fires {len(sphere_fires)} times")
    assert ok


def test_c10_oracle_equivalence(criterion):
    spec = HookSpec(L=20, eps1=0.05, eps2=0.05, d0=0.1)
    lo, hi = 1.1, 1.9
    rungs = ((65, (12, 24)), (129, (24, 48)), (257, (48, 96)))
    errs = []
    for rows, fib in rungs:
        mesh = build_hook_mesh(spec, rows, s_grid=np.linspace(lo, hi, rows), fiber_resolution=fib)
        f = embedded_oracle(mesh)
        d = radius_eval(spec, mesh.s, wrt="sigma")
        r, r1, r2 = spec.d0 * d[0], spec.d0 * d[1], spec.d0 * d[2]
        g = 1 + r1**2
        closed = profile_curvature_from_derivatives(r, r1 / np.sqrt(g), r2 / g**2, 2)["R"]
        errs.append(float(np.max(np.abs(f.R - closed[:, None, None]))))
    table = compare_resolutions("R", [r for r, _ in rungs], errs,
                                spacings=[(hi - lo) / (r - 1) for r, _ in rungs], errors=errs)
    ok = all(1.7 <= o <= 2.3 for o in table.orders) and table.ok
    criterion(10, ok, f"max |R_oracle - R_closed| {errs[0]:.2e} -> {errs[-1]:.2e}; "
                      f"orders {table.orders[0]:.3f}, {table.orders[1]:.3f}")
    assert ok


def test_c11_geodesic_audit(criterion):
    p = _config("geodesic-audit", "geodesic_audit")
    h = p.section("hook")
    a = p.section("audit")
    spec = HookSpec(L=h["L"], eps1=h["eps1"], eps2=h["eps2"], d0=h["d0"], n=1)
    mesh = build_hook_mesh(spec, a["mesh_resolution"], fiber_resolution=p.get("mesh", "fiber_alpha"))
    kw = dict(seeds=a["seeds"], seed=p.get("run", "seed"), points=a["points"], perturbation=a["perturbation"],
              max_iter=a["max_iter"], residual_tol=a["residual_tol"], collapse_frac=a["collapse_frac"],
              modes=a["modes"])
    results = geodesic_audit(mesh, **kw)
    stable = [r for r in results if r.stable]
    counts = Counter(r.outcome for r in results)
    again = geodesic_audit(mesh, **kw)
    same = all(x.outcome == y.outcome and x.length == y.length and np.array_equal(x.curve, y.curve)
               for x, y in zip(results, again))
    ok = len(results) == 200 and not stable and same
    criterion(11, ok, f"{len(results)} seeds: {dict(sorted(counts.items()))}; stable geodesics {len(stable)}; "
                      f"deterministic rerun {same}")
    assert ok
