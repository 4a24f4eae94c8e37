"""Ricci flow of the rotationally symmetric surrogate metrics.

Solver A evolves a ``ProfileMetric`` ``phi_g^2 dx^2 + psi^2 g_{S^n}`` in a
fixed coordinate ``x``; solver B evolves a ``TwistedMetric``
``k + e^{2u} dtheta^2``.  Both use Heun's method (explicit RK2) with an
adaptive step bounded by the curvature scale and by the explicit diffusion
limit.
"""

from __future__ import annotations

import math
from typing import Callable
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from .curvature import (
    SPHERE_AREA,
    CurvatureField,
    _even_extend,
    profile_curvature,
    twisted_curvature,
)
from .hookgen import ProfileMetric, TwistedMetric, ValidationError

__all__ = [
    "FlowConfig",
    "Trajectory",
    "PinchEvent",
    "MonitorViolation",
    "step_profile_flow",
    "step_twisted_flow",
    "run_to_singularity",
    "singular_time_estimate",
    "extinction_estimate",
    "pinching_monitor",
    "regrid_profile",
    "regrid_density",
    "regrid_distortion",
    "flow_curvature",
    "dirichlet_energy",
    "local_extrema",
]


class MonitorViolation(RuntimeError):
    """A pinching estimate failed beyond tolerance; indicates a solver defect."""


@dataclass(frozen=True)
class FlowConfig:
    """Run parameters.

    ``cfl`` bounds ``dt * max|Rm|``; ``diffusion_cfl`` bounds ``dt / h_s^2``
    with ``h_s`` the smallest arclength spacing.  ``r0_config`` is a free
    canonical scale kept for reporting; it enters no computation.
    """

    cfl: float = 0.1
    diffusion_cfl: float = 0.2
    regrid_threshold: float = 3.0
    regrid_policy: str = "curvature"
    rm_max_stop: float = 1.0e4
    pinch_floor: float = 1.0e-3
    area_stop: float = 1.0e-3
    snapshot_log_step: float = 0.05
    monitor_pinching: bool = True
    monitor_identity: bool = True
    monitor_tol: float = 1.0e-6
    r0_config: float = 1.0
    epsilon_neck: float = 0.1
    max_steps: int = 2_000_000
    t_max: float = math.inf

    def __post_init__(self) -> None:
        bad = [f.name for f in fields(self)
               if isinstance(getattr(self, f.name), (int, float)) and not isinstance(getattr(self, f.name), bool)
               and not getattr(self, f.name) > 0]
        if bad:
            raise ValidationError(f"FlowConfig parameters must be positive: {', '.join(bad)}")
        if not self.cfl < 1:
            raise ValidationError("cfl must lie in (0, 1)")
        if self.epsilon_neck > 0.2:
            raise ValidationError("epsilon_neck must be at most 0.2")
        if self.regrid_policy not in ("arclength", "curvature"):
            raise ValidationError("regrid_policy must be 'arclength' or 'curvature'")
        if self.regrid_threshold <= 1:
            raise ValidationError("regrid_threshold must exceed 1")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class PinchEvent:
    """Returned by a step when ``psi`` (or ``h``) reaches zero at an interior node."""

    index: int
    value: float
    before: ProfileMetric | TwistedMetric


@dataclass(frozen=True)
class Trajectory:
    """Time series of a flow run.

    ``channels`` holds one value per accepted state (including ``t = 0``);
    ``snapshots`` is a decimated list of metrics at ``snapshot_times``.
    """

    kind: str
    times: np.ndarray
    channels: dict
    snapshots: tuple
    snapshot_times: np.ndarray
    reason: str
    T_hat: float
    T_hat_residual: float
    config: FlowConfig
    events: tuple = ()
    metadata: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.snapshots[-1]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def local_extrema(psi: np.ndarray, kind: str, periodic: bool = False) -> np.ndarray:
    """Indices of interior local minima or maxima (plateaus count once per node)."""
    p = np.asarray(psi)
    if periodic:
        left, right = np.roll(p, 1), np.roll(p, -1)
        idx = np.arange(p.size)
    else:
        left, right = p[:-2], p[2:]
        p = p[1:-1]
        idx = np.arange(1, p.size + 1)
    if kind == "min":
        mask = (p <= left) & (p <= right)
    else:
        mask = (p >= left) & (p >= right)
    return idx[mask]


def _arc_spacing(m) -> float:
    g = m.phi_g if isinstance(m, ProfileMetric) else m.a
    h = m.h if isinstance(m, ProfileMetric) else m.h_x
    return float(np.min(g) * h)


def flow_curvature(m: ProfileMetric) -> CurvatureField:
    """Curvature used by the profile solver (the closed-form engine)."""
    return profile_curvature(m)


def dirichlet_energy(m: TwistedMetric, field_: CurvatureField | None = None) -> float:
    """``int_{S^2} |grad u|^2 dvol_k``."""
    f = field_ if field_ is not None else twisted_curvature(m)
    return float(trapezoid(f.extras["grad_u_sq"] * 2 * np.pi * m.h * m.a, m.x))


def _odd_extend1(v):
    return np.concatenate([-v[1:2], v, -v[-2:-1]])


def _ext(v, odd, periodic):
    if periodic:
        return np.concatenate([v[-1:], v, v[:1]])
    return _odd_extend1(v) if odd else _even_extend(v, 1)


def _cdiff(v, h, odd=False, periodic=False):
    e = _ext(v, odd, periodic)
    return (e[2:] - e[:-2]) / (2 * h)


def _deturck_rhs(m: ProfileMetric):
    """Gauge terms ``(psi_t, phi_t)`` of the DeTurck flow relative to a round background.

    The background is ``dx^2 + b^2 g_{S^n}`` with ``b = sin(pi x)/pi`` for
    TwoCaps and ``b`` constant otherwise; the DeTurck field is ``w d/dx`` with
    ``w = X_x/X^3 + n(b b_x/Y^2 - Y_x/(Y X^2))`` (``X = phi_g``, ``Y = psi``).
    For TwoCaps the fiber radius is factored as ``Y = b v`` so that the
    ``1/Y`` terms cancel pointwise near the poles.  Returns the full
    right-hand sides ``Y_t`` and ``X_t`` minus the ``-2 Ric`` part of ``X_t``.
    """
    X, Y, h, n = m.phi_g, m.psi, m.h, m.n
    per = m.periodic
    Xx = _cdiff(X, h, periodic=per)
    if m.topology != "TwoCaps":
        Yx = _cdiff(Y, h, periodic=per)
        e = _ext(Y, False, per)
        Yxx = (e[2:] - 2 * Y + e[:-2]) / h**2
        Yt = Yxx / X**2 - (n - 1) / Y - Yx**2 / (X**2 * Y)
        Xw = Xx / X**2 - n * Yx / (Y * X)
        We = np.concatenate([Xw[-1:], Xw, Xw[:1]]) if per else _odd_extend1(Xw)
        return Yt, (We[2:] - We[:-2]) / (2 * h)
    b = np.sin(np.pi * m.x) / np.pi
    bx = np.cos(np.pi * m.x)
    v = np.empty_like(Y)
    v[1:-1] = Y[1:-1] / b[1:-1]
    v[0] = (4 * v[1] - v[2]) / 3
    v[-1] = (4 * v[-2] - v[-3]) / 3
    vx = _cdiff(v, h)
    q = np.zeros_like(Y)  # (X^2 - v^2) / b, odd and smooth
    q[1:-1] = (X[1:-1] ** 2 - v[1:-1] ** 2) / b[1:-1]
    e = _odd_extend1(Y)
    Yxx = (e[2:] - 2 * Y + e[:-2]) / h**2
    Yt = np.zeros_like(Y)
    i = slice(1, -1)
    # (n-1)(b_x^2 - 1)/b = -(n-1) pi^2 b
    Yt[i] = (Yxx[i] / X[i] ** 2 - (n - 1) * np.pi**2 * b[i] / v[i]
             + bx[i] ** 2 * q[i] / (X[i] ** 2 * v[i])
             - 2 * bx[i] * vx[i] / X[i] ** 2 - b[i] * vx[i] ** 2 / (X[i] ** 2 * v[i])
             + n * bx[i] * vx[i] / v[i] ** 2)
    Xw = Xx / X**2 + n * (bx * q / (v**2 * X) - vx / (v * X))
    Xw[0] = Xw[-1] = 0.0
    We = _odd_extend1(Xw)
    return Yt, (We[2:] - We[:-2]) / (2 * h)


def _profile_rhs(m: ProfileMetric, gauge: str = "deturck"):
    f = flow_curvature(m)
    # g_t = -2 Ric acting on the two warping factors
    dphi = -m.phi_g * f.ric_radial
    if gauge == "deturck":
        dpsi, gauge_phi = _deturck_rhs(m)
        dphi = dphi + gauge_phi
    else:
        dpsi = -m.psi * f.ric_fiber
    if m.topology == "FixedEnds":
        # Dirichlet ends: the end slices are held
        dpsi[0] = dpsi[-1] = 0.0
    if m.topology == "TwoCaps":
        dpsi[0] = dpsi[-1] = 0.0
        # the pole gauge factor follows its even extrapolation from the interior
        dphi[0] = (4 * dphi[1] - dphi[2]) / 3
        dphi[-1] = (4 * dphi[-2] - dphi[-3]) / 3
    return dpsi, dphi, f


def _twisted_rhs(m: TwistedMetric):
    f = twisted_curvature(m)
    K = f.extras["K_k"]
    d = f.extras
    u_s, u_ss = d["u_s"], d["u_ss"]
    da = m.a * (-K + u_ss + u_s**2)
    dh = -K * m.h + d["h_s"] * u_s
    dh[0] = dh[-1] = 0.0
    du = d["laplace_u"] + d["grad_u_sq"]
    return da, dh, du, f


def _check_dt(dt, f: CurvatureField, m, cfl: float, diffusion_cfl: float) -> None:
    if not dt > 0:
        raise ValidationError("time step must be positive")
    rm = float(np.max(f.rm_norm))
    if dt * rm > cfl * (1 + 1e-12):
        raise ValidationError(f"CFL violation: dt * max|Rm| = {dt * rm:.3g} > {cfl}")
    hs = _arc_spacing(m)
    if dt > diffusion_cfl * hs * hs * (1 + 1e-12):
        raise ValidationError(f"diffusion limit violated: dt = {dt:.3g} > {diffusion_cfl} * h_s^2 = {diffusion_cfl * hs * hs:.3g}")


def _pinched_profile(psi, topology):
    inner = psi[1:-1] if topology == "TwoCaps" else psi
    bad = np.flatnonzero(inner <= 0)
    if bad.size == 0:
        return None
    i = int(bad[0]) + (1 if topology == "TwoCaps" else 0)
    return i, float(psi[i])


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------


def step_profile_flow(m: ProfileMetric, dt: float, *, cfl: float = 0.1, diffusion_cfl: float = 0.5,
                      gauge: str = "auto") -> ProfileMetric | PinchEvent:
    """One Heun step of ``psi_t = -psi Ric_fiber``, ``phi_t = -phi Ric_ss``.

    For ``n = 2`` this is ``psi_t = psi_ss - (1 - psi_s^2)/psi`` and
    ``phi_t = 2 phi psi_ss / psi``.  Returns a ``PinchEvent`` instead of a
    metric when ``psi`` reaches zero away from the poles.
    """
    if gauge not in ("auto", "deturck", "none"):
        raise ValidationError("gauge must be 'auto', 'deturck' or 'none'")
    if gauge == "auto":
        gauge = "deturck" if m.topology == "TwoCaps" else "none"
    k1p, k1g, f = _profile_rhs(m, gauge)
    _check_dt(dt, f, m, cfl, diffusion_cfl)
    psi1, phi1 = m.psi + dt * k1p, m.phi_g + dt * k1g
    pinch = _pinched_profile(psi1, m.topology)
    if pinch is None and np.all(phi1 > 0):
        k2p, k2g, _ = _profile_rhs(ProfileMetric(m.x, phi1, psi1, m.n, m.topology), gauge)
        psi2 = m.psi + 0.5 * dt * (k1p + k2p)
        phi2 = m.phi_g + 0.5 * dt * (k1g + k2g)
        pinch = _pinched_profile(psi2, m.topology)
        if pinch is None and np.all(phi2 > 0):
            if m.topology == "TwoCaps":
                psi2[0] = psi2[-1] = 0.0
            return ProfileMetric(m.x, phi2, psi2, m.n, m.topology)
    if pinch is None:
        pinch = (int(np.argmin(m.psi[1:-1])) + 1, 0.0)
    return PinchEvent(index=pinch[0], value=pinch[1], before=m)


def step_twisted_flow(m: TwistedMetric, dt: float, *, cfl: float = 0.1,
                      diffusion_cfl: float = 0.5) -> TwistedMetric | PinchEvent:
    """One Heun step of the reduced flow of ``k + e^{2u} dtheta^2``.

    ``u_t = Lap_k u + |du|^2``; ``k_t = -2 K k + 2 (Hess u + du du)``, i.e.
    ``a_t = a (-K + u_ss + u_s^2)`` and ``h_t = -K h + h_s u_s``.
    """
    k1a, k1h, k1u, f = _twisted_rhs(m)
    _check_dt(dt, f, m, cfl, diffusion_cfl)
    a1, h1, u1 = m.a + dt * k1a, m.h + dt * k1h, m.u + dt * k1u
    if np.all(a1 > 0) and np.all(h1[1:-1] > 0):
        k2a, k2h, k2u, _ = _twisted_rhs(TwistedMetric(m.x, a1, h1, u1, m.circle_length))
        a2 = m.a + 0.5 * dt * (k1a + k2a)
        h2 = m.h + 0.5 * dt * (k1h + k2h)
        u2 = m.u + 0.5 * dt * (k1u + k2u)
        if np.all(a2 > 0) and np.all(h2[1:-1] > 0):
            h2[0] = h2[-1] = 0.0
            return TwistedMetric(m.x, a2, h2, u2, m.circle_length)
    i = int(np.argmin(m.h[1:-1])) + 1
    return PinchEvent(index=i, value=0.0, before=m)


# ---------------------------------------------------------------------------
# regrid
# ---------------------------------------------------------------------------


def regrid_density(m: ProfileMetric, policy: str) -> np.ndarray:
    """Target node density per unit arclength at the current nodes.

    ``"arclength"`` is uniform; ``"curvature"`` is ``sqrt(|Rm|)`` smoothed
    and floored at the mean, so that thin necks get proportionally more
    nodes while the rest of the profile stays resolved.
    """
    if policy == "arclength":
        return np.ones_like(m.psi)
    if policy != "curvature":
        raise ValidationError(f"unknown regrid policy {policy!r}")
    rho = np.sqrt(flow_curvature(m).rm_norm)
    s = m.arclength()
    total = m.total_length()
    floor = trapezoid(rho, s) / s[-1] if not m.periodic else float(np.mean(rho))
    rho = np.maximum(rho, floor)
    kernel = np.array([1.0, 2.0, 1.0]) / 4
    for _ in range(4):
        e = np.concatenate([rho[:1], rho, rho[-1:]]) if not m.periodic else np.concatenate([rho[-1:], rho, rho[:1]])
        rho = np.convolve(e, kernel, mode="valid")
    return rho / total


def regrid_distortion(m: ProfileMetric, policy: str = "arclength") -> float:
    """Ratio of largest to smallest (actual spacing / target spacing)."""
    r = m.phi_g * regrid_density(m, policy)
    return float(np.max(r) / np.min(r))


def regrid_profile(m: ProfileMetric, policy: str = "arclength") -> ProfileMetric:
    """Resample onto a grid that equidistributes the target density.

    The total length (trapezoid of ``phi_g``) is preserved to rounding
    error; ``psi`` is interpolated by a cubic spline in arclength.
    """
    s = m.arclength()
    total = m.total_length()
    rho = regrid_density(m, policy)
    if m.periodic:
        s_closed = np.concatenate([s, [total]])
        rho_c = np.concatenate([rho, rho[:1]])
    else:
        s_closed, rho_c = s, rho
    mass = np.concatenate([[0.0], np.cumsum(0.5 * (rho_c[1:] + rho_c[:-1]) * np.diff(s_closed))])
    x_of_s = mass / mass[-1]
    s_new = np.interp(m.x, x_of_s, s_closed)
    phi = mass[-1] / np.interp(s_new, s_closed, rho_c)
    # fix the total exactly, then place nodes by the trapezoid rule of the new gauge
    if m.periodic:
        phi *= total / (np.sum(phi) * m.h)
        s_nodes = np.concatenate([[0.0], np.cumsum(0.5 * (phi[1:] + phi[:-1]) * m.h)])
        spline = CubicSpline(s_closed, np.concatenate([m.psi, m.psi[:1]]), bc_type="periodic")
    else:
        phi *= total / trapezoid(phi, m.x)
        s_nodes = np.concatenate([[0.0], np.cumsum(0.5 * (phi[1:] + phi[:-1]) * m.h)])
        s_nodes[-1] = min(s_nodes[-1], s[-1])
        spline = CubicSpline(s, m.psi)
    psi = spline(s_nodes)
    if m.topology == "TwoCaps":
        psi[0] = psi[-1] = 0.0
    return ProfileMetric(m.x, phi, psi, m.n, m.topology)


# ---------------------------------------------------------------------------
# monitors and estimates
# ---------------------------------------------------------------------------


def pinching_monitor(state, t: float, normalization: float = 1.0) -> dict[str, float]:
    """Residuals of the two pinching estimates for three-dimensional flows.

    ``state`` is a metric or its ``CurvatureField``.  Curvatures and time are
    rescaled by ``normalization`` (the factor that makes ``max|Rm| <= 1`` at
    ``t = 0``).  Residual (1) is ``min(R + 6/(4t+1))``; residual (2) is
    ``min(R - 2X(log X + log(1+t) - 3))`` over nodes with ``X > 0``, where
    ``X = max(-sec_min, 0)``, and NaN when no node has ``X > 0``.
    """
    if isinstance(state, CurvatureField):
        f = state
    elif isinstance(state, TwistedMetric):
        f = twisted_curvature(state)
    else:
        f = flow_curvature(state)
    lam = float(normalization)
    R = f.R / lam
    tt = t * lam
    r1 = float(np.min(R + 6.0 / (4 * tt + 1)))
    X = np.maximum(-f.sec_min / lam, 0.0)
    pos = X > 0
    if np.any(pos):
        Xp = X[pos]
        r2 = float(np.min(R[pos] - 2 * Xp * (np.log(Xp) + math.log1p(tt) - 3)))
    else:
        r2 = math.nan
    return {"pinch1": r1, "pinch2": r2}


def _final_decade(values: np.ndarray, larger_is_later: bool) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    end = v[-1]
    return v >= end / 10 if larger_is_later else v <= 10 * end


def singular_time_estimate(times, max_rm) -> tuple[float, float]:
    """Zero of the linear fit of ``1/max|Rm|`` over the final decade of ``max|Rm|``.

    Returns the estimate and the RMS fit residual expressed in time units.
    """
    t = np.asarray(times, dtype=float)
    rm = np.asarray(max_rm, dtype=float)
    sel = _final_decade(rm, larger_is_later=True)
    if np.count_nonzero(sel) < 3:
        raise ValidationError("too few samples in the final decade of max|Rm|")
    y = 1.0 / rm[sel]
    slope, icpt = np.polyfit(t[sel], y, 1)
    if not slope < 0:
        raise ValidationError("curvature does not blow up over the final decade")
    resid = y - (slope * t[sel] + icpt)
    return float(-icpt / slope), float(np.sqrt(np.mean(resid**2)) / abs(slope))


def extinction_estimate(traj: Trajectory) -> tuple[float, float]:
    """Extinction time from a linear fit of the slice area over its final decade.

    Returns ``(T_ext, residual)`` with the RMS fit residual in time units.
    """
    if traj.reason in ("pinch", "pinch_floor"):
        raise ValidationError("trajectory ended in a non-trivial pinch; extinction is undefined")
    area = traj.channels.get("area")
    if area is None:
        raise ValidationError("trajectory has no slice-area channel")
    t = traj.times
    sel = _final_decade(area, larger_is_later=False)
    if np.count_nonzero(sel) < 3:
        raise ValidationError("too few samples in the final decade of the area")
    slope, icpt = np.polyfit(t[sel], area[sel], 1)
    if not slope < 0:
        raise ValidationError("area is not decreasing over the final decade")
    resid = area[sel] - (slope * t[sel] + icpt)
    return float(-icpt / slope), float(np.sqrt(np.mean(resid**2)) / abs(slope))


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _profile_channels(m: ProfileMetric, f: CurvatureField) -> dict[str, float]:
    psi = m.psi
    mins = local_extrema(psi, "min", m.periodic)
    maxs = local_extrema(psi, "max", m.periodic)
    neck = float(np.min(psi[mins])) if mins.size else math.nan
    return {
        "max_rm": float(np.max(f.rm_norm)),
        "min_rm": float(np.min(f.rm_norm)),
        "min_R": float(np.min(f.R)),
        "max_R": float(np.max(f.R)),
        "neck_psi": neck,
        "neck_area": SPHERE_AREA[m.n] * neck**m.n if mins.size else math.nan,
        "bulb_rm": float(np.max(f.rm_norm[maxs])) if maxs.size else math.nan,
        "length": m.total_length(),
    }


def _twisted_channels(m: TwistedMetric, f: CurvatureField) -> dict[str, float]:
    return {
        "max_rm": float(np.max(f.rm_norm)),
        "min_rm": float(np.min(f.rm_norm)),
        "min_R": float(np.min(f.R)),
        "max_R": float(np.max(f.R)),
        "area": m.slice_area(),
        "dirichlet": dirichlet_energy(m, f),
    }


def run_to_singularity(m: ProfileMetric | TwistedMetric, config: FlowConfig | None = None,
                       observer: Callable[[float, ProfileMetric | TwistedMetric], dict] | None = None) -> Trajectory:
    """Integrate until ``max|Rm| >= rm_max_stop``, a pinch, or extinction.

    The step is ``min(cfl / max|Rm|, diffusion_cfl * h_s^2)``.  Profile runs
    regrid when the spacing distortion relative to the ``regrid_policy``
    density exceeds ``regrid_threshold``; they stop at the pinch floor once the smallest
    neck radius falls below ``pinch_floor`` times the smallest initial bulb
    radius.  Twisted runs stop when the slice area falls below
    ``area_stop`` times its initial value.  ``observer(t, state)`` is called
    on every accepted state and its float entries become extra channels.
    """
    cfg = config or FlowConfig()
    twisted = isinstance(m, TwistedMetric)
    if not twisted and not isinstance(m, ProfileMetric):
        raise ValidationError("run_to_singularity needs a ProfileMetric or TwistedMetric")
    curv = twisted_curvature if twisted else flow_curvature
    chan = _twisted_channels if twisted else _profile_channels
    step = step_twisted_flow if twisted else step_profile_flow

    f = curv(m)
    rm0 = float(np.max(f.rm_norm))
    norm = max(1.0, rm0)
    three_d = twisted or m.n == 2
    if not twisted:
        maxs = local_extrema(m.psi, "max", m.periodic)
        bulb0 = float(np.min(m.psi[maxs])) if maxs.size else float(np.max(m.psi))
        floor = cfg.pinch_floor * bulb0
    else:
        area0 = m.slice_area()

    rows: list[dict] = []
    times = [0.0]
    snaps, snap_t = [m], [0.0]
    last_snap_rm = rm0
    events: list[dict] = []
    t = 0.0
    reason = "max_steps"

    def record(state, fld, dt):
        row = chan(state, fld)
        row["dt"] = dt
        if observer is not None:
            row.update(observer(t, state))
        if three_d and cfg.monitor_pinching:
            row.update(pinching_monitor(fld, t, norm))
            for key in ("pinch1", "pinch2"):
                if row[key] < -cfg.monitor_tol:
                    raise MonitorViolation(f"pinching estimate {key} violated at t={t:.6g}: residual {row[key]:.3g}")
        return row

    rows.append(record(m, f, math.nan))
    if twisted:
        rows[-1]["identity_residual"] = math.nan
    for _ in range(cfg.max_steps):
        rm = rows[-1]["max_rm"]
        if rm >= cfg.rm_max_stop:
            reason = "rm_stop"
            break
        if not twisted and rows[-1]["neck_psi"] < floor:
            reason = "pinch_floor"
            break
        if twisted and rows[-1]["area"] < cfg.area_stop * area0:
            reason = "area_stop"
            break
        if t >= cfg.t_max:
            reason = "t_max"
            break
        hs = _arc_spacing(m)
        dt = min(cfg.cfl / rm, cfg.diffusion_cfl * hs * hs, cfg.t_max - t)
        new = step(m, dt, cfl=cfg.cfl, diffusion_cfl=cfg.diffusion_cfl)
        if isinstance(new, PinchEvent):
            reason = "pinch"
            events.append({"t": t, "event": "pinch", "index": new.index})
            break
        t += dt
        if not twisted and regrid_distortion(new, cfg.regrid_policy) > cfg.regrid_threshold:
            before = new.total_length()
            new = regrid_profile(new, cfg.regrid_policy)
            events.append({"t": t, "event": "regrid", "length_before": before,
                           "length_after": new.total_length()})
        m = new
        f = curv(m)
        row = record(m, f, dt)
        if twisted:
            prev = rows[-1]
            rate = (row["area"] - prev["area"]) / dt
            row["identity_residual"] = abs(rate + 8 * np.pi - 0.5 * (row["dirichlet"] + prev["dirichlet"]))
        rows.append(row)
        times.append(t)
        if abs(math.log(row["max_rm"] / last_snap_rm)) >= cfg.snapshot_log_step:
            snaps.append(m)
            snap_t.append(t)
            last_snap_rm = row["max_rm"]
    if snap_t[-1] != t:
        snaps.append(m)
        snap_t.append(t)
    channels = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    times_arr = np.array(times)
    try:
        T_hat, T_res = singular_time_estimate(times_arr, channels["max_rm"])
    except ValidationError:
        T_hat, T_res = math.nan, math.nan
    for arr in (times_arr, *channels.values()):
        arr.setflags(write=False)
    return Trajectory(kind="twisted" if twisted else "profile", times=times_arr, channels=channels,
                      snapshots=tuple(snaps), snapshot_times=np.array(snap_t), reason=reason,
                      T_hat=T_hat, T_hat_residual=T_res, config=cfg, events=tuple(events),
                      metadata={"normalization": norm, "n": 2 if twisted else m.n,
                                "resolution": int(m.x.size)})
