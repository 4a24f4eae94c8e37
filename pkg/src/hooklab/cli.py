"""Deterministic experiment runner.

Every experiment reads a flat ``key = value`` config with one section per
module, validates all parameters before any compute, and writes three
artifacts into the output directory: ``manifest.txt`` (config echo, grids,
versions, wall time), one or more CSV channel files, and ``report.txt``.
CSV and report files are byte-identical across reruns of the same config.

Exit codes: 0 success (including solver events), 2 validation failure,
3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .curvature import embedded_oracle, positivity_report, profile_curvature_from_derivatives, slice_flux
from .hookgen import (
    HookSpec,
    ValidationError,
    build_dumbbell_profile,
    build_hook_mesh,
    build_radius_profile,
    build_spine,
    build_twisted_neck,
    cylinder_profile,
    profile_plan_summary,
    radius_eval,
    round_sphere_profile,
)
from .minimal import appearance_profile, appearance_run, area_decay_tracker, find_minimal_slices, geodesic_audit
from .ricci import FlowConfig, MonitorViolation, extinction_estimate, run_to_singularity
from .singular import bulb_centers, classify, thin_tube_predicate

EXPERIMENTS = ("build-hook", "curvature-report", "flow-run", "classify", "appearance-demo",
               "extinction-compare", "geodesic-audit")


class InvariantBreach(RuntimeError):
    """An internal consistency check failed (exit code 3)."""


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------


def _float_list(text: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_HOOK = {"L": (float, 20.0), "eps1": (float, 0.05), "eps2": (float, 0.05), "d0": (float, 0.1),
         "L_st": (float, 0.0), "n": (int, 2), "resolution": (int, 512)}
_MESH = {"fiber_theta": (int, 12), "fiber_phi": (int, 24), "fiber_alpha": (int, 64)}
_FLOW = {"cfl": (float, 0.1), "diffusion_cfl": (float, 0.2), "regrid_threshold": (float, 3.0),
         "regrid_policy": (str, "curvature"), "rm_max_stop": (float, 1.0e4), "pinch_floor": (float, 1.0e-3),
         "area_stop": (float, 1.0e-3), "snapshot_log_step": (float, 0.05), "monitor_pinching": (_bool, True),
         "monitor_identity": (_bool, True), "monitor_tol": (float, 1.0e-6), "r0_config": (float, 1.0),
         "epsilon_neck": (float, 0.1), "max_steps": (int, 2_000_000), "t_max": (float, math.inf)}
_METRIC = {
    "sphere": {"radius": (float, 1.0), "resolution": (int, 65), "n": (int, 2)},
    "cylinder": {"d0": (float, 1.0), "length": (float, 8.0), "resolution": (int, 65), "n": (int, 2),
                 "topology": (str, "FixedEnds")},
    "dumbbell": {"bulb_left": (float, 1.0), "bulb_right": (float, 1.0), "neck_radius": (float, 0.2),
                 "neck_length": (float, 2.0), "resolution": (int, 201), "n": (int, 2)},
    "twisted": {"d0": (float, 1.0), "amplitude": (float, 0.0), "shape": (str, "cos"),
                "circle_length": (float, 2 * math.pi), "resolution": (int, 65)},
}
_CLASSIFY = {"q_bound": (float, 10.0), "trend_tol": (float, 0.1), "trivial_fraction": (float, 0.01),
             "epsilon": (float, 0.1), "thin_tube_C": (float, 10.0), "thin_tube_epsilon": (float, 0.2)}
_CURVATURE = {"flux_slices": (_float_list, (2.0, 2.5)), "flux_spacing": (float, 0.005),
              "region_x1_min": (float, 0.0), "region_x2_max": (float, -1.0),
              "window_lo": (float, 1.1), "window_hi": (float, 1.9)}
_APPEARANCE = {"slopes": (_float_list, (0.05, 0.1, 0.2)), "end_radius": (float, 0.5), "length": (float, 1.0),
               "resolution": (int, 201), "n": (int, 2), "region_lo": (float, 0.8), "region_hi": (float, 1.0),
               "boundary": (str, "lo"), "margin": (float, 0.0), "t_max": (float, 0.05)}
_TWISTED = {"d0": (float, 1.0), "amplitudes": (_float_list, (0.0, 0.5, 1.0)), "shape": (str, "cos"),
            "circle_length": (float, 2 * math.pi), "resolution": (int, 65)}
_AUDIT = {"seeds": (int, 200), "points": (int, 64), "perturbation": (float, 0.02), "max_iter": (int, 20000),
          "residual_tol": (float, 1e-9), "collapse_frac": (float, 0.02), "modes": (int, 8),
          "mesh_resolution": (int, 2000)}
_RUN = {"seed": (int, 0)}

SCHEMAS = {
    "build-hook": {"run": _RUN, "hook": _HOOK, "mesh": _MESH},
    "curvature-report": {"run": _RUN, "hook": _HOOK, "mesh": _MESH, "curvature": _CURVATURE},
    "flow-run": {"run": _RUN, "metric": None, "flow": _FLOW},
    "classify": {"run": _RUN, "metric": None, "flow": _FLOW, "classify": _CLASSIFY},
    "appearance-demo": {"run": _RUN, "appearance": _APPEARANCE, "flow": _FLOW},
    "extinction-compare": {"run": _RUN, "twisted": _TWISTED, "flow": _FLOW},
    "geodesic-audit": {"run": _RUN, "hook": _HOOK, "mesh": _MESH, "audit": _AUDIT},
}


@dataclass
class Params:
    """Resolved, typed parameters with a record of which keys the pipeline consumed."""

    values: dict
    consumed: set = field(default_factory=set)

    def get(self, section: str, key: str):
        self.consumed.add((section, key))
        try:
            return self.values[section][key]
        except KeyError:
            raise InvariantBreach(f"pipeline read unrecorded parameter [{section}] {key}") from None

    def section(self, name: str, keys=None) -> dict:
        keys = list(self.values[name]) if keys is None else keys
        return {k: self.get(name, k) for k in keys}

    @property
    def recorded(self) -> set:
        return {(s, k) for s, d in self.values.items() for k in d}


def load_config(kind: str, text: str, seed: int | None = None) -> Params:
    """Parse and type-check a config against the schema of ``kind``.

    Unknown sections or keys, unparsable values and out-of-range module
    parameters raise ``ValidationError`` naming the offending entry.
    """
    if kind not in SCHEMAS:
        raise ValidationError(f"unknown experiment kind {kind!r}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config syntax: {exc}") from None
    schema = dict(SCHEMAS[kind])
    if "metric" in schema:
        mk = cp.get("metric", "kind", fallback="sphere").strip()
        if mk not in _METRIC:
            raise ValidationError(f"[metric] kind must be one of {', '.join(_METRIC)} (got {mk!r})")
        schema["metric"] = {"kind": (str, mk), **_METRIC[mk]}
    for sec in cp.sections():
        if sec not in schema:
            raise ValidationError(f"section [{sec}] is not used by {kind}")
        unknown = [k for k in cp[sec] if k not in schema[sec]]
        if unknown:
            raise ValidationError(f"unknown key(s) in [{sec}]: {', '.join(unknown)}")
    values = {}
    for sec, keys in schema.items():
        values[sec] = {}
        for key, (typ, default) in keys.items():
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                try:
                    values[sec][key] = typ(raw.strip()) if typ is not str else raw.strip()
                except ValueError as exc:
                    raise ValidationError(f"[{sec}] {key} = {raw!r}: {exc}") from None
            else:
                values[sec][key] = default
    if seed is not None:
        values["run"]["seed"] = int(seed)
    params = Params(values)
    _prevalidate(kind, params)
    params.consumed.clear()
    return params


def _hook_spec(p: Params, n: int | None = None) -> HookSpec:
    keys = ("L", "eps1", "eps2", "d0", "L_st", "n")
    vals = {k: p.get("hook", k) for k in keys}
    if n is not None:
        vals["n"] = n
    return HookSpec(**vals)


def _fiber(p: Params, n: int):
    if n == 1:
        return p.get("mesh", "fiber_alpha")
    return (p.get("mesh", "fiber_theta"), p.get("mesh", "fiber_phi"))


def _flow_config(p: Params) -> FlowConfig:
    return FlowConfig(**p.section("flow"))


def _build_metric(p: Params, resolution: int | None = None):
    kind = p.get("metric", "kind")
    res = p.get("metric", "resolution") if resolution is None else resolution
    if kind == "sphere":
        return round_sphere_profile(p.get("metric", "radius"), res, p.get("metric", "n"))
    if kind == "cylinder":
        return cylinder_profile(p.get("metric", "d0"), p.get("metric", "length"), res, p.get("metric", "n"),
                                p.get("metric", "topology"))
    if kind == "dumbbell":
        return build_dumbbell_profile((p.get("metric", "bulb_left"), p.get("metric", "bulb_right")),
                                      p.get("metric", "neck_radius"), p.get("metric", "neck_length"), res,
                                      n=p.get("metric", "n"))
    return build_twisted_neck(p.get("metric", "d0"), p.get("metric", "amplitude"), p.get("metric", "shape"),
                              p.get("metric", "circle_length"), res)


def _prevalidate(kind: str, p: Params) -> None:
    """Construct every parameter object once so range errors surface before compute."""
    if "hook" in p.values:
        spec = _hook_spec(p, 1 if kind == "geodesic-audit" else None)
        if kind == "geodesic-audit" and p.get("hook", "n") != 1:
            raise ValidationError("geodesic-audit needs [hook] n = 1")
        if p.get("hook", "resolution") < 9:
            raise ValidationError("[hook] resolution must be at least 9")
        fib = _fiber(p, spec.n)
        if spec.n == 1 and fib < 8:
            raise ValidationError("[mesh] fiber_alpha must be at least 8")
        if spec.n == 2 and (fib[0] < 2 or fib[1] < 4 or fib[1] % 2):
            raise ValidationError("[mesh] needs fiber_theta >= 2 and even fiber_phi >= 4")
    if "flow" in p.values:
        _flow_config(p)
    if "metric" in p.values:
        kind_m = p.get("metric", "kind")
        if kind_m == "cylinder" and p.get("metric", "topology") not in ("Periodic", "FixedEnds"):
            raise ValidationError("[metric] cylinder topology must be Periodic or FixedEnds")
        _build_metric(p, resolution=min(p.get("metric", "resolution"), 2001))
    if "appearance" in p.values:
        a = p.section("appearance")
        if a["boundary"] not in ("lo", "hi"):
            raise ValidationError("[appearance] boundary must be lo or hi")
        if not 0 <= a["region_lo"] < a["region_hi"] <= 1:
            raise ValidationError("[appearance] region must satisfy 0 <= region_lo < region_hi <= 1")
        if not a["t_max"] > 0 or not math.isfinite(a["t_max"]):
            raise ValidationError("[appearance] t_max must be finite and positive")
        for sl in a["slopes"]:
            appearance_profile(sl, end_radius=a["end_radius"], length=a["length"], resolution=a["resolution"],
                               n=a["n"])
    if "twisted" in p.values:
        t = p.section("twisted")
        if any(v < 0 for v in t["amplitudes"]):
            raise ValidationError("[twisted] amplitudes must be >= 0")
        for amp in t["amplitudes"]:
            build_twisted_neck(t["d0"], amp, t["shape"], t["circle_length"], t["resolution"])
    if "classify" in p.values:
        c = p.section("classify")
        if not 0 < c["epsilon"] <= 0.2 or not 0 < c["thin_tube_epsilon"] <= 0.2:
            raise ValidationError("[classify] epsilon values must lie in (0, 0.2]")
        if c["thin_tube_C"] <= 0 or c["q_bound"] <= 0 or c["trend_tol"] <= 0:
            raise ValidationError("[classify] thin_tube_C, q_bound and trend_tol must be positive")
    if "audit" in p.values:
        a = p.section("audit")
        if a["seeds"] < 1 or a["points"] < 8 or a["modes"] < 1 or a["max_iter"] < 1:
            raise ValidationError("[audit] needs seeds >= 1, points >= 8, modes >= 1, max_iter >= 1")
        if not 0 < a["collapse_frac"] < 1 or a["residual_tol"] <= 0 or a["perturbation"] < 0:
            raise ValidationError("[audit] collapse_frac in (0, 1), residual_tol > 0, perturbation >= 0")
    if "curvature" in p.values:
        c = p.section("curvature")
        if not 0 < c["window_lo"] < c["window_hi"] < 4 or c["flux_spacing"] <= 0:
            raise ValidationError("[curvature] needs 0 < window_lo < window_hi < 4 and flux_spacing > 0")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def fmt(v) -> str:
    """Fixed text form of a value: 17 significant digits for reals."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (tuple, list)):
        return ", ".join(fmt(x) for x in v)
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


class Report:
    """Sectioned ``key = value`` text."""

    def __init__(self) -> None:
        self.lines: list[str] = []

    def section(self, name: str) -> None:
        if self.lines:
            self.lines.append("")
        self.lines.append(f"[{name}]")

    def put(self, key: str, value) -> None:
        self.lines.append(f"{key} = {fmt(value)}")

    def text(self, block: str) -> None:
        self.lines.extend(block.splitlines())

    def write(self, path: Path) -> None:
        path.write_text("\n".join(self.lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# convergence tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceTable:
    quantity: str
    resolutions: tuple
    values: tuple
    errors: tuple
    orders: tuple
    flags: tuple

    @property
    def ok(self) -> bool:
        return not self.flags


def compare_resolutions(quantity: str, resolutions, values, *, spacings=None, exact: float | None = None,
                        errors=None, min_order: float = 1.5) -> ConvergenceTable:
    """Observed convergence orders over a ladder of at least three resolutions.

    Errors are ``|value - exact|`` when ``exact`` is given, the supplied
    ``errors`` otherwise, or successive differences (Richardson) when
    neither is available.  Orders are ``log(e_k / e_{k+1}) / log(h_k / h_{k+1})``
    with ``h`` the given spacings (default ``1 / resolution``).  Orders
    below ``min_order`` and non-monotone error sequences are flagged.
    """
    res = tuple(int(r) for r in resolutions)
    vals = tuple(float(v) for v in values)
    if len(res) < 3 or len(vals) != len(res):
        raise ValidationError("a convergence ladder needs at least three resolutions")
    h = np.asarray(spacings if spacings is not None else [1.0 / r for r in res], dtype=float)
    if np.any(np.diff(h) >= 0):
        raise ValidationError("ladder resolutions must refine monotonically")
    if errors is not None:
        err = np.abs(np.asarray(errors, dtype=float))
        hh = h
    elif exact is not None:
        err = np.abs(np.asarray(vals) - exact)
        hh = h
    else:
        err = np.abs(np.diff(vals))
        hh = h[1:]
    flags = []
    orders = []
    for k in range(err.size - 1):
        if err[k + 1] == 0 or err[k] == 0:
            orders.append(math.nan)
            flags.append(f"zero error between rungs {k} and {k + 1}")
            continue
        orders.append(float(np.log(err[k] / err[k + 1]) / np.log(hh[k] / hh[k + 1])))
    if np.any(np.diff(err) >= 0):
        flags.append("non-monotone error sequence")
    for k, o in enumerate(orders):
        if math.isfinite(o) and o < min_order:
            flags.append(f"order {o:.3g} below {min_order} between rungs {k} and {k + 1}")
    return ConvergenceTable(quantity, res, vals, tuple(float(e) for e in err), tuple(orders), tuple(flags))


def _write_convergence(out: Path, rep: Report, tables: list[ConvergenceTable]) -> None:
    rows = []
    for t in tables:
        for k, r in enumerate(t.resolutions):
            e = t.errors[k] if k < len(t.errors) else math.nan
            o = t.orders[k - 1] if 0 < k <= len(t.orders) else math.nan
            rows.append([t.quantity, r, t.values[k], e, o])
        rep.section(f"convergence {t.quantity}")
        rep.put("orders", t.orders)
        rep.put("flagged", bool(t.flags))
        for f in t.flags:
            rep.put("flag", f)
    write_csv(out / "convergence.csv", ["quantity", "resolution", "value", "error", "order"], rows)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_build_hook(p: Params, out: Path, ladder) -> dict:
    if ladder:
        raise ValidationError("build-hook does not take a ladder")
    spec = _hook_spec(p)
    res = p.get("hook", "resolution")
    prof = build_radius_profile(spec, res)
    mesh = build_hook_mesh(spec, res, fiber_resolution=_fiber(p, spec.n))
    spine = build_spine(spec.L, res)
    write_csv(out / "profile.csv", ["s", "phi", "dphi_ds", "d2phi_ds2"],
              zip(prof.grid, prof.values, prof.d1, prof.d2))
    write_csv(out / "spine.csv", ["s", "x", "y", "tx", "ty", "nx", "ny", "kappa"],
              ([s, *pt, *tg, *nm, k] for s, pt, tg, nm, k in
               zip(spine.s, spine.point, spine.tangent, spine.normal, spine.kappa)))
    P = mesh.positions
    idx = np.indices(P.shape[:-1]).reshape(P.ndim - 1, -1).T
    flat = P.reshape(-1, P.shape[-1])
    s_col = mesh.s[idx[:, 0]]
    head = ["i", "j"] + (["k"] if spec.n == 2 else []) + ["s"] + [f"x{c + 1}" for c in range(P.shape[-1])]
    write_csv(out / "mesh.csv", head, ([*ij, s, *x] for ij, s, x in zip(idx, s_col, flat)))

    L = spec.L
    anchors = radius_eval(spec, np.array([1.0 / L, 4.0 - 1.0 / L, 1.5]))[0]
    g, v, d2 = prof.grid, prof.values, prof.d2
    left, right, conc = g <= 1.5, g >= 1.5, (g > 0) & (g <= 1.0)
    rep = Report()
    rep.section("hook")
    for k, val in vars(spec).items():
        rep.put(k, val)
    rep.section("profile")
    for k, val in profile_plan_summary(spec).items():
        rep.put(k, val)
    rep.put("phi_at_1_over_L", anchors[0])
    rep.put("phi_at_4_minus_1_over_L", anchors[1])
    rep.put("phi_at_1.5", anchors[2])
    rep.put("nondecreasing_on_0_1.5", bool(np.all(np.diff(v[left]) >= -1e-15)))
    rep.put("nonincreasing_on_1.5_4", bool(np.all(np.diff(v[right]) <= 1e-15)))
    rep.put("max_second_derivative_on_0_1", float(np.max(d2[conc])))
    rep.section("mesh")
    rep.put("spine_nodes", mesh.s.size)
    rep.put("fiber_shape", tuple(P.shape[1:-1]))
    rep.put("reconstruction_residual", mesh.reconstruction_residual())
    rep.write(out / "report.txt")
    return {"grid": f"profile {res} uniform; mesh {mesh.s.size} cosine x {tuple(P.shape[1:-1])}"}


def _straight_window_error(spec: HookSpec, rows: int, fiber, lo: float, hi: float) -> float:
    """Max |R_oracle - R_closed| on a straight-tube window mesh."""
    mesh = build_hook_mesh(spec, rows, s_grid=np.linspace(lo, hi, rows), fiber_resolution=fiber)
    f = embedded_oracle(mesh)
    d = radius_eval(spec, mesh.s, wrt="sigma")
    r, r1, r2 = spec.d0 * d[0], spec.d0 * d[1], spec.d0 * d[2]
    g = 1 + r1**2
    closed = profile_curvature_from_derivatives(r, r1 / np.sqrt(g), r2 / g**2, spec.n)["R"]
    shape = (-1,) + (1,) * (f.R.ndim - 1)
    return float(np.max(np.abs(f.R - closed.reshape(shape))))


def run_curvature_report(p: Params, out: Path, ladder) -> dict:
    spec = _hook_spec(p)
    res = p.get("hook", "resolution")
    fiber = _fiber(p, spec.n)
    c = p.section("curvature")
    rep = Report()
    rep.section("hook")
    for k, val in vars(spec).items():
        rep.put(k, val)
    if ladder:
        if not (c["window_lo"] > 1.0 + spec.eps2 and c["window_hi"] < 2.0 - spec.eps2) and spec.eps2 > 0:
            rep.put("note", "window overlaps an eps2 transition")
        base = ladder[0] - 1
        errs = []
        for r in ladder:
            scale = (r - 1) / base
            fib = int(round(fiber * scale)) if spec.n == 1 else (int(round(fiber[0] * scale)),
                                                                 2 * int(round(fiber[0] * scale)))
            errs.append(_straight_window_error(spec, r, fib, c["window_lo"], c["window_hi"]))
        h = [(c["window_hi"] - c["window_lo"]) / (r - 1) for r in ladder]
        table = compare_resolutions("oracle_vs_closed_R", ladder, errs, spacings=h, errors=errs)
        _write_convergence(out, rep, [table])
        rep.write(out / "report.txt")
        return {"grid": f"straight window [{fmt(c['window_lo'])}, {fmt(c['window_hi'])}] ladder {fmt(tuple(ladder))}"}

    mesh = build_hook_mesh(spec, res, fiber_resolution=fiber)
    f = embedded_oracle(mesh)
    axes = tuple(range(1, f.R.ndim))
    write_csv(out / "curvature.csv", ["s", "min_R", "max_R", "min_sectional", "max_sectional"],
              zip(mesh.s, f.R.min(axis=axes), f.R.max(axis=axes), f.sec_min.min(axis=axes),
                  f.sec_max.max(axis=axes)))
    full = positivity_report(f)
    x1m, x2m = c["region_x1_min"], c["region_x2_max"]
    region = positivity_report(f, lambda pts, s: (pts[..., 0] > x1m) & (pts[..., 1] < x2m))
    rep.section("positivity")
    rep.put("min_R", full.min_R)
    rep.put("argmin_R", full.argmin_R)
    rep.put("min_sectional_full", full.min_sectional)
    rep.put("region", f"x1 > {fmt(x1m)}, x2 < {fmt(x2m)}")
    rep.put("region_nodes", region.count)
    rep.put("min_sectional_region", region.min_sectional)
    rep.put("argmin_sectional_region", region.argmin_sectional)
    rep.put("trace_residual", f.trace_residual())
    rows = []
    ds = c["flux_spacing"]
    for a in c["flux_slices"]:
        win = build_hook_mesh(spec, 5, s_grid=a + ds * np.arange(-2, 3), fiber_resolution=fiber)
        fl = slice_flux(embedded_oracle(win), win, a)
        rows.append([a, fl.value, fl.error, fl.area])
        rep.section(f"flux a={fmt(a)}")
        rep.put("value", fl.value)
        rep.put("value_over_8pi", fl.value / (8 * np.pi))
        rep.put("quadrature_error", fl.error)
        rep.put("area", fl.area)
    write_csv(out / "flux.csv", ["a", "flux", "error", "area"], rows)
    rep.write(out / "report.txt")
    return {"grid": f"mesh {mesh.s.size} cosine x {fmt(fiber)}"}


def _channels_csv(path: Path, traj) -> None:
    keys = sorted(traj.channels)
    write_csv(path, ["t"] + keys, ([t] + [traj.channels[k][i] for k in keys] for i, t in enumerate(traj.times)))


def _exact_time(p: Params) -> float | None:
    kind = p.values["metric"]["kind"]
    if kind == "sphere" and p.values["metric"]["n"] == 2:
        return p.values["metric"]["radius"] ** 2 / 4
    if kind == "cylinder" and p.values["metric"]["n"] == 2:
        return p.values["metric"]["d0"] ** 2 / 2
    if kind == "twisted" and p.values["metric"]["amplitude"] == 0:
        return p.values["metric"]["d0"] ** 2 / 2
    return None


def _traj_summary(rep: Report, traj) -> None:
    rep.section("trajectory")
    rep.put("reason", traj.reason)
    rep.put("steps", len(traj.times) - 1)
    rep.put("t_final", float(traj.times[-1]))
    rep.put("T_hat", traj.T_hat)
    rep.put("T_hat_residual", traj.T_hat_residual)
    ch = traj.channels
    if "max_rm" in ch:
        rep.put("max_rm_final", float(ch["max_rm"][-1]))
    for key in ("pinch1", "pinch2"):
        if key in ch:
            vals = ch[key][np.isfinite(ch[key])]
            rep.put(f"min_{key}_residual", float(vals.min()) if vals.size else math.nan)
    if "identity_residual" in ch:
        vals = ch["identity_residual"][np.isfinite(ch["identity_residual"])]
        rep.put("max_identity_residual_over_8pi", float(vals.max() / (8 * np.pi)) if vals.size else math.nan)
    regrids = [e for e in traj.events if e["event"] == "regrid"]
    rep.put("regrids", len(regrids))
    for e in traj.events:
        if e["event"] == "pinch":
            rep.put("pinch_event_t", e["t"])


def run_flow(p: Params, out: Path, ladder) -> dict:
    cfg = _flow_config(p)
    rep = Report()
    if ladder:
        t_hats = []
        for r in ladder:
            traj = run_to_singularity(_build_metric(p, r), cfg)
            t_hats.append(traj.T_hat)
        exact = _exact_time(p)
        table = compare_resolutions("T_hat", ladder, t_hats, exact=exact)
        rep.section("ladder")
        rep.put("exact", exact if exact is not None else "none")
        _write_convergence(out, rep, [table])
        rep.write(out / "report.txt")
        return {"grid": f"ladder {fmt(tuple(ladder))}"}
    m = _build_metric(p)
    traj = run_to_singularity(m, cfg)
    _channels_csv(out / "channels.csv", traj)
    _traj_summary(rep, traj)
    exact = _exact_time(p)
    if exact is not None and math.isfinite(traj.T_hat):
        rep.put("T_exact", exact)
        rep.put("T_hat_relative_error", abs(traj.T_hat - exact) / exact)
    if traj.kind == "twisted":
        try:
            T, res = extinction_estimate(traj)
            rep.put("T_ext", T)
            rep.put("T_ext_residual", res)
        except ValidationError as exc:
            rep.put("T_ext", f"undefined ({exc})")
    rep.write(out / "report.txt")
    return {"grid": f"{m.x.size} nodes"}


def _thin_tube_fire_time(traj, C: float, eps: float) -> float:
    """First snapshot time at which the neck-versus-bulbs predicate holds."""
    for t, m in zip(traj.snapshot_times, traj.snapshots):
        stable = [z for z in find_minimal_slices(m) if z.verdict == "stable"]
        bulbs = bulb_centers(m)
        if not stable or len(bulbs) < 2:
            continue
        try:
            if thin_tube_predicate(m, stable[0].location, bulbs[0], bulbs[-1], C, eps):
                return float(t)
        except ValidationError:
            continue
    return math.nan


def run_classify(p: Params, out: Path, ladder) -> dict:
    if ladder:
        raise ValidationError("classify does not take a ladder")
    cfg = _flow_config(p)
    c = p.section("classify")
    m = _build_metric(p)
    traj = run_to_singularity(m, cfg)
    rep = Report()
    _traj_summary(rep, traj)
    report = classify(traj, q_bound=c["q_bound"], trend_tol=c["trend_tol"],
                      trivial_fraction=c["trivial_fraction"], epsilon=c["epsilon"])
    rep.section("classification")
    rep.text(report.as_text())
    write_csv(out / "q.csv", ["t", "q"], zip(report.q_times, report.q))
    _channels_csv(out / "channels.csv", traj)
    if traj.kind == "profile":
        fire = _thin_tube_fire_time(traj, c["thin_tube_C"], c["thin_tube_epsilon"])
        rep.section("thin_tube")
        rep.put("C_hat", c["thin_tube_C"])
        rep.put("epsilon", c["thin_tube_epsilon"])
        rep.put("first_fire_t", fire)
        rep.put("fires_before_T_hat", bool(math.isfinite(fire) and fire < traj.T_hat))
        rep.section("area_decay")
        try:
            ad = area_decay_tracker(traj)
            rep.put("slope", ad.slope)
            rep.put("slope_over_8pi", ad.slope / (8 * np.pi))
            rep.put("ratio_min", ad.ratio_min)
            rep.put("ratio_max", ad.ratio_max)
            rep.put("within_bounds", ad.within_bounds)
            write_csv(out / "area_decay.csv", ["t", "tau", "area", "in_window"],
                      zip(ad.times, ad.tau, ad.areas, ad.window))
        except ValidationError as exc:
            rep.put("status", f"not tracked ({exc})")
    rep.write(out / "report.txt")
    return {"grid": f"{m.x.size} nodes"}


def run_appearance(p: Params, out: Path, ladder) -> dict:
    if ladder:
        raise ValidationError("appearance-demo does not take a ladder")
    a = p.section("appearance")
    cfg = _flow_config(p)
    rep = Report()
    rows = []
    for k, sl in enumerate(a["slopes"]):
        m = appearance_profile(sl, end_radius=a["end_radius"], length=a["length"], resolution=a["resolution"],
                               n=a["n"])
        r = appearance_run(m, (a["region_lo"], a["region_hi"]), boundary=a["boundary"], margin=a["margin"],
                           t_max=a["t_max"], config=cfg)
        initial_stable = sum(z.verdict == "stable" for z in r.initial_slices)
        rows.append([sl, initial_stable, r.t_appear, r.t_flag, bool(r.flag[0]), r.stable_at_flag])
        write_csv(out / f"appearance_{k}.csv", ["t", "stable_count", "flag", "width", "boundary_area"],
                  zip(r.times, r.stable_count, r.flag, r.width, r.boundary_area))
        rep.section(f"slope {fmt(sl)}")
        rep.put("initial_stable_slices", initial_stable)
        rep.put("flag_at_t0", bool(r.flag[0]))
        rep.put("t_appear", r.t_appear)
        rep.put("t_flag", r.t_flag)
        rep.put("stable_at_flag", r.stable_at_flag)
        rep.put("steps", len(r.times) - 1)
    write_csv(out / "search.csv", ["slope", "initial_stable", "t_appear", "t_flag", "flag_at_t0", "stable_at_flag"],
              rows)
    t_app = np.array([r[2] for r in rows])
    d = np.diff(t_app)
    rep.section("sweep")
    rep.put("slopes", a["slopes"])
    rep.put("t_appear", tuple(t_app))
    rep.put("monotone", bool(np.all(np.isfinite(t_app)) and (np.all(d > 0) or np.all(d < 0))))
    rep.write(out / "report.txt")
    return {"grid": f"{a['resolution']} nodes FixedEnds"}


def run_extinction(p: Params, out: Path, ladder) -> dict:
    if ladder:
        raise ValidationError("extinction-compare does not take a ladder")
    t = p.section("twisted")
    cfg = _flow_config(p)
    rows = []
    rep = Report()
    for amp in t["amplitudes"]:
        m = build_twisted_neck(t["d0"], amp, t["shape"], t["circle_length"], t["resolution"])
        traj = run_to_singularity(m, cfg)
        T, res = extinction_estimate(traj)
        idr = traj.channels["identity_residual"]
        idmax = float(np.nanmax(idr)) / (8 * np.pi) if np.any(np.isfinite(idr)) else math.nan
        rows.append([amp, T, res, idmax, traj.reason])
        rep.section(f"amplitude {fmt(amp)}")
        rep.put("T_ext", T)
        rep.put("fit_residual", res)
        rep.put("max_identity_residual_over_8pi", idmax)
        rep.put("reason", traj.reason)
    write_csv(out / "extinction.csv", ["amplitude", "T_ext", "fit_residual", "identity_over_8pi", "reason"], rows)
    order = np.argsort([r[0] for r in rows], kind="stable")
    T_sorted = np.array([rows[i][1] for i in order])
    rep.section("comparison")
    rep.put("strictly_increasing_in_amplitude", bool(np.all(np.diff(T_sorted) > 0)))
    rep.write(out / "report.txt")
    return {"grid": f"{t['resolution']} polar nodes"}


def run_geodesic_audit(p: Params, out: Path, ladder) -> dict:
    if ladder:
        raise ValidationError("geodesic-audit does not take a ladder")
    spec = _hook_spec(p)
    a = p.section("audit")
    seed = p.get("run", "seed")
    mesh = build_hook_mesh(spec, a["mesh_resolution"], fiber_resolution=_fiber(p, 1))
    results = geodesic_audit(mesh, seeds=a["seeds"], seed=seed, points=a["points"],
                             perturbation=a["perturbation"], max_iter=a["max_iter"],
                             residual_tol=a["residual_tol"], collapse_frac=a["collapse_frac"], modes=a["modes"])
    write_csv(out / "geodesics.csv", ["seed_index", "outcome", "length", "residual", "index", "s_mean"],
              ([r.seed_index, r.outcome, r.length, r.residual, r.index, r.s_mean] for r in results))
    write_csv(out / "curves.csv", ["seed_index", "k", "x1", "x2", "x3"],
              ([r.seed_index, k, *pt] for r in results for k, pt in enumerate(r.curve)))
    counts = {}
    for r in results:
        counts[r.outcome] = counts.get(r.outcome, 0) + 1
    rep = Report()
    rep.section("hook")
    for k, val in vars(spec).items():
        rep.put(k, val)
    rep.section("audit")
    rep.put("seed", seed)
    rep.put("seeds", a["seeds"])
    for k in ("geodesic", "collapsed", "escaped", "unconverged"):
        rep.put(k, counts.get(k, 0))
    stable = [r.seed_index for r in results if r.stable]
    rep.put("stable_geodesics", len(stable))
    rep.put("stable_seed_indices", tuple(stable) if stable else "none")
    rep.write(out / "report.txt")
    return {"grid": f"mesh {mesh.s.size} cosine x {a['points']}-gon seeds"}


RUNNERS = {
    "build-hook": run_build_hook,
    "curvature-report": run_curvature_report,
    "flow-run": run_flow,
    "classify": run_classify,
    "appearance-demo": run_appearance,
    "extinction-compare": run_extinction,
    "geodesic-audit": run_geodesic_audit,
}


def _write_manifest(out: Path, kind: str, p: Params, extra: dict, wall: float, ladder, status: str) -> None:
    rep = Report()
    rep.section("manifest")
    rep.put("experiment", kind)
    rep.put("tool", "hooklab")
    rep.put("tool_version", __version__)
    rep.put("python", platform.python_version())
    rep.put("numpy", np.__version__)
    rep.put("scipy", scipy.__version__)
    rep.put("status", status)
    rep.put("wall_time_s", round(wall, 3))
    if ladder:
        rep.put("ladder", tuple(ladder))
    for k, v in extra.items():
        rep.put(k, v)
    for sec, vals in p.values.items():
        rep.section(f"config {sec}")
        for k, v in vals.items():
            rep.put(k, v)
    rep.write(out / "manifest.txt")


def run(kind: str, config_text: str, out: Path, *, ladder=None, seed: int | None = None,
        audit: bool = False) -> int:
    """Run one experiment; returns the process exit code."""
    out = Path(out)
    try:
        if ladder is not None and len(ladder) < 3:
            raise ValidationError("--ladder needs at least three resolutions")
        if ladder is not None and any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ValidationError("--ladder resolutions must increase")
        p = load_config(kind, config_text, seed)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        extra = RUNNERS[kind](p, out, list(ladder) if ladder else None)
        status = "ok"
        code = 0
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (MonitorViolation, InvariantBreach) as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        extra, status, code = {"error": str(exc)}, "invariant breach", 3
    wall = time.perf_counter() - t0
    missing = p.consumed - p.recorded
    if missing:
        extra = dict(extra, error="consumed parameters missing from manifest")
        status, code = "invariant breach", 3
    _write_manifest(out, kind, p, extra, wall, ladder, status)
    if audit:
        rep = Report()
        rep.section("audit")
        rep.put("consumed", len(p.consumed))
        rep.put("recorded", len(p.recorded))
        rep.put("consumed_not_recorded", ", ".join(f"{s}.{k}" for s, k in sorted(missing)) or "none")
        unused = sorted(p.recorded - p.consumed)
        rep.put("recorded_not_consumed", ", ".join(f"{s}.{k}" for s, k in unused) or "none")
        rep.write(out / "audit.txt")
    return code


def _ladder(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("ladder must be comma-separated integers") from None
    return vals


def _batch_job(args):
    kind, text, out, seed, audit = args
    return run(kind, text, Path(out), seed=seed, audit=audit)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hooklab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", type=Path, help="key = value config with module sections")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--ladder", type=_ladder, help="resolution ladder n1,n2,n3 for a convergence study")
        sp.add_argument("--seed", type=int, help="overrides [run] seed")
        sp.add_argument("--audit", action="store_true", help="write consumed-versus-recorded parameter audit")
    bp = sub.add_parser("batch", help="run several configs concurrently; each needs [run] kind")
    bp.add_argument("configs", type=Path, nargs="+")
    bp.add_argument("--out", type=Path, required=True)
    bp.add_argument("--jobs", type=int, default=2)
    bp.add_argument("--seed", type=int)
    bp.add_argument("--audit", action="store_true")
    args = parser.parse_args(argv)

    def read(path: Path | None) -> str:
        if path is None:
            return ""
        try:
            return path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from None

    if args.command == "batch":
        jobs = []
        try:
            for path in args.configs:
                text = read(path)
                cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
                cp.optionxform = str
                cp.read_string(text)
                kind = cp.get("run", "kind", fallback=None)
                if kind not in EXPERIMENTS:
                    raise ValidationError(f"{path}: [run] kind must name an experiment")
                cp.remove_option("run", "kind")
                lines = []
                for sec in cp.sections():
                    lines.append(f"[{sec}]")
                    lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
                jobs.append((kind, "\n".join(lines) + "\n", str(args.out / path.stem), args.seed, args.audit))
        except (ValidationError, configparser.Error) as exc:
            print(f"validation error: {exc}", file=sys.stderr)
            return 2
        with ProcessPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            codes = list(pool.map(_batch_job, jobs))
        return max(codes) if codes else 0
    try:
        text = read(args.config)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    return run(args.command, text, args.out, ladder=args.ladder, seed=args.seed, audit=args.audit)


if __name__ == "__main__":
    sys.exit(main())
