"""Hook spine, radius profile, tube meshes and symmetric surrogate metrics.

The hook is a tube of slowly varying radius ``d0 * phi(s)`` around the planar
curve ``gamma_L``.  Everything here is a pure function of its inputs; returned
objects are frozen dataclasses holding read-only arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import trapezoid
from scipy.optimize import fsolve

__all__ = [
    "ValidationError",
    "HookSpec",
    "SpineCurve",
    "RadiusProfile",
    "EmbeddedMesh",
    "ProfileMetric",
    "TwistedMetric",
    "TOPOLOGIES",
    "bump_f",
    "bump_derivatives",
    "spine_eval",
    "build_spine",
    "spine_arclength",
    "mu_length",
    "radius_eval",
    "build_radius_profile",
    "profile_plan_summary",
    "twist_beta",
    "fiber_directions",
    "tube_positions",
    "TubeChart",
    "build_sphere_mesh",
    "build_revolution_mesh",
    "build_hook_mesh",
    "cosine_grid",
    "build_dumbbell_profile",
    "build_twisted_neck",
    "cylinder_profile",
    "round_sphere_profile",
]

TOPOLOGIES = ("TwoCaps", "Periodic", "FixedEnds")
D0_MAX = 0.45
# Gauss-Legendre rule used for the join quadrature.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


class ValidationError(ValueError):
    """Input violates a documented precondition."""


def _frozen(*arrays: np.ndarray) -> None:
    for a in arrays:
        if isinstance(a, np.ndarray):
            a.setflags(write=False)


# ---------------------------------------------------------------------------
# bump function
# ---------------------------------------------------------------------------


def bump_f(x):
    """Smooth bump ``exp(1 + 1/(4x^2 - 1))`` on ``[-1/2, 1/2]``, zero at the ends."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > 0.5):
        raise ValidationError("bump_f is defined for |x| <= 1/2")
    out = np.zeros_like(xa)
    inside = np.abs(xa) < 0.5
    xi = xa[inside]
    out[inside] = np.exp(1.0 + 1.0 / (4.0 * xi * xi - 1.0))
    return float(out) if np.ndim(x) == 0 else out


def bump_derivatives(x, order: int = 3) -> list[np.ndarray]:
    """Return ``[f, f', f'', f''']`` (up to ``order``) of the bump, zero outside."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    res = [np.zeros_like(xa) for _ in range(order + 1)]
    inside = np.abs(xa) < 0.5
    if np.any(inside):
        xi = xa[inside]
        d = 4.0 * xi * xi - 1.0
        f = np.exp(1.0 + 1.0 / d)
        g1 = -8.0 * xi / d**2
        g2 = -8.0 / d**2 + 128.0 * xi * xi / d**3
        g3 = 384.0 * xi / d**3 - 3072.0 * xi**3 / d**4
        vals = [f, f * g1, f * (g2 + g1 * g1), f * (g3 + 3.0 * g1 * g2 + g1**3)]
        for k in range(order + 1):
            res[k][inside] = vals[k]
    return res


def _smoothstep5(t, order: int = 3) -> list[np.ndarray]:
    """Quintic smoothstep ``10t^3 - 15t^4 + 6t^5`` clipped to [0, 1] with derivatives."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    vals = [
        10 * t**3 - 15 * t**4 + 6 * t**5,
        30 * t**2 - 60 * t**3 + 30 * t**4,
        60 * t - 180 * t**2 + 120 * t**3,
        60 - 360 * t + 360 * t**2,
    ]
    return vals[: order + 1]


def _quintic_hermite(p0, m0, a0, p1, m1, a1) -> Polynomial:
    """Quintic on [0, 1] with prescribed value, slope and curvature at both ends."""
    u = Polynomial([0, 1])
    h00 = 1 - 10 * u**3 + 15 * u**4 - 6 * u**5
    h10 = u - 6 * u**3 + 8 * u**4 - 3 * u**5
    h20 = (u**2 - 3 * u**3 + 3 * u**4 - u**5) / 2
    h01 = 10 * u**3 - 15 * u**4 + 6 * u**5
    h11 = -4 * u**3 + 7 * u**4 - 3 * u**5
    h21 = (u**3 - 2 * u**4 + u**5) / 2
    return p0 * h00 + m0 * h10 + a0 * h20 + p1 * h01 + m1 * h11 + a1 * h21


# ---------------------------------------------------------------------------
# spine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HookSpec:
    """Parameters of the thin hook."""

    L: float
    eps1: float
    eps2: float
    d0: float
    L_st: float = 0.0
    n: int = 2

    def __post_init__(self) -> None:
        problems = []
        if not self.L > 1:
            problems.append(f"L must be > 1 (got {self.L})")
        if not 0 < self.eps1 < 0.25:
            problems.append(f"eps1 must lie in (0, 1/4) (got {self.eps1})")
        if not 0 <= self.eps2 < 0.25:
            problems.append(f"eps2 must lie in [0, 1/4) (got {self.eps2})")
        if not 0 < self.d0 < D0_MAX:
            problems.append(f"d0 must lie in (0, {D0_MAX}) (got {self.d0})")
        if not self.L_st >= 0:
            problems.append(f"L_st must be >= 0 (got {self.L_st})")
        if self.n not in (1, 2):
            problems.append(f"n must be 1 or 2 (got {self.n})")
        if problems:
            raise ValidationError("HookSpec: " + "; ".join(problems))

    def scaled(self, **changes) -> "HookSpec":
        vals = dict(L=self.L, eps1=self.eps1, eps2=self.eps2, d0=self.d0, L_st=self.L_st, n=self.n)
        vals.update(changes)
        return HookSpec(**vals)


@dataclass(frozen=True)
class SpineCurve:
    """Samples of ``gamma_L`` with its Frenet data.

    ``speed`` is ``|d gamma / ds|``; ``kappa`` is the signed curvature per unit
    arclength (positive for left turns).
    """

    L: float
    s: np.ndarray
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray
    speed: np.ndarray

    def __post_init__(self) -> None:
        _frozen(self.s, self.point, self.tangent, self.normal, self.kappa, self.speed)


@lru_cache(maxsize=1)
def _join_parameters() -> tuple[float, float, float]:
    """Length and curvature coefficients of the arc join on ``[1/6, 1/3]``.

    Curvature per unit arclength is ``S5(t) + A b1(t) + B b2(t)`` with
    ``t = sigma / ell``.  It vanishes to second order at ``t = 0`` and equals 1
    to second order at ``t = 1``; ``(ell, A, B)`` are fixed by the end point
    and end heading of the circular arc.
    """
    target = np.array([5 * math.pi / 6, 0.5, 1.0 / 6 + math.sin(math.pi / 3)])

    def residual(p):
        ell, a, b = p
        kp = _kappa_poly(a, b)
        th = _heading_poly(kp, ell)
        x, y = _join_xy(th, ell, np.array([1.0]))
        return [th(1.0) - target[0], x[0] - target[1], y[0] - target[2]]

    sol, info, ier, msg = fsolve(residual, [1.07, 1.05, -4.1], xtol=1e-15, full_output=True)
    if np.max(np.abs(residual(sol))) > 1e-12:
        raise RuntimeError(f"arc join solve failed: {msg}")
    return float(sol[0]), float(sol[1]), float(sol[2])


def _kappa_poly(a: float, b: float) -> Polynomial:
    t = Polynomial([0, 1])
    s5 = 10 * t**3 - 15 * t**4 + 6 * t**5
    b1 = 64 * t**3 * (1 - t) ** 3
    return s5 + a * b1 + b * b1 * (2 * t - 1)


def _heading_poly(kp: Polynomial, ell: float) -> Polynomial:
    return math.pi / 2 + ell * kp.integ(lbnd=0)


def _join_xy(th: Polynomial, ell: float, t: np.ndarray, panels: int = 32):
    """Integrate ``(cos, sin)`` of the heading from 0 to each ``t`` (composite Gauss)."""
    t = np.asarray(t, dtype=float)
    edges = np.linspace(0.0, 1.0, panels + 1)
    # cumulative integrals at panel edges
    a, b = edges[:-1], edges[1:]
    nodes = 0.5 * (b - a)[:, None] * _GL_X[None, :] + 0.5 * (a + b)[:, None]
    w = 0.5 * (b - a)[:, None] * _GL_W[None, :]
    thn = th(nodes)
    cx = np.concatenate([[0.0], np.cumsum((w * np.cos(thn)).sum(axis=1))])
    cy = np.concatenate([[0.0], np.cumsum((w * np.sin(thn)).sum(axis=1))])
    k = np.clip(np.floor(t * panels).astype(int), 0, panels - 1)
    lo = edges[k]
    nodes = 0.5 * (t - lo)[:, None] * _GL_X[None, :] + 0.5 * (t + lo)[:, None]
    w = 0.5 * (t - lo)[:, None] * _GL_W[None, :]
    thn = th(nodes)
    x = 1.0 + ell * (cx[k] + (w * np.cos(thn)).sum(axis=1))
    y = 1.0 / 6 + ell * (cy[k] + (w * np.sin(thn)).sum(axis=1))
    return x, y


@lru_cache(maxsize=1)
def _join_model():
    ell, a, b = _join_parameters()
    kp = _kappa_poly(a, b)
    th = _heading_poly(kp, ell)
    # quintic speed map u -> t on the parameter window [1/6, 1/3]
    p = _quintic_hermite(0.0, 1.0 / (6 * ell), 0.0, 1.0, math.pi / (6 * ell), 0.0)
    return ell, kp, th, p


def _join_eval(u: np.ndarray):
    """Frenet data on the first arc join, parametrized by ``u in [0, 1]``."""
    ell, kp, th, p = _join_model()
    t = p(u)
    x, y = _join_xy(th, ell, t)
    heading = th(t)
    speed = 6 * ell * p.deriv(1)(u)
    dspeed = 36 * ell * p.deriv(2)(u)
    kappa = kp(t)
    dkappa = kp.deriv(1)(t) * speed / ell
    return x, y, heading, speed, dspeed, kappa, dkappa


def _mu_eval(s: np.ndarray):
    """Frenet data of the smoothed bend ``mu`` on ``[0, 1]``."""
    s = np.asarray(s, dtype=float)
    n = s.size
    x = np.empty(n)
    y = np.empty(n)
    hd = np.empty(n)
    v = np.empty(n)
    dv = np.zeros(n)
    k = np.zeros(n)
    dk = np.zeros(n)

    m = s <= 1.0 / 6
    x[m], y[m], hd[m], v[m] = 1.0, s[m], math.pi / 2, 1.0

    m = (s > 1.0 / 6) & (s < 1.0 / 3)
    if np.any(m):
        x[m], y[m], hd[m], v[m], dv[m], k[m], dk[m] = _join_eval(6.0 * (s[m] - 1.0 / 6))

    m = (s >= 1.0 / 3) & (s <= 2.0 / 3)
    x[m] = np.cos(math.pi * s[m])
    y[m] = 1.0 / 6 + np.sin(math.pi * s[m])
    hd[m] = math.pi * s[m] + math.pi / 2
    v[m], k[m] = math.pi, 1.0

    m = (s > 2.0 / 3) & (s < 5.0 / 6)
    if np.any(m):
        # mirror image of the first join across the x2 axis
        jx, jy, jh, jv, jdv, jk, jdk = _join_eval(6.0 * ((1.0 - s[m]) - 1.0 / 6))
        x[m], y[m] = -jx, jy
        hd[m] = math.pi - jh + math.pi  # reflect the tangent then reverse it
        v[m], dv[m], k[m], dk[m] = jv, -jdv, jk, -jdk

    m = s >= 5.0 / 6
    x[m], y[m], hd[m], v[m] = -1.0, 1.0 - s[m], -math.pi / 2, 1.0
    return x, y, hd, v, dv, k, dk


def mu_length() -> float:
    """Length of the smoothed bend ``mu``."""
    ell = _join_parameters()[0]
    return 1.0 / 3 + 2 * ell + math.pi / 3


def spine_arclength(L: float, s) -> dict[str, np.ndarray]:
    """Arclength ``sigma(s)`` of ``gamma_L`` from ``s = 0`` with the speed and its two derivatives."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    ell, _, _, p = _join_model()
    p1, p2, p3 = p.deriv(1), p.deriv(2), p.deriv(3)
    sig = np.empty_like(s)
    v = np.empty_like(s)
    dv = np.zeros_like(s)
    ddv = np.zeros_like(s)
    mu0 = L + 1.0
    pieces = [
        (s < 1, lambda t: (L * t, L)),
        ((s >= 1) & (s < 2), lambda t: (L + t - 1.0, 1.0)),
        (s >= 3, lambda t: (mu0 + mu_length() + L * (t - 3.0), L)),
    ]
    for m, fn in pieces:
        sig[m], v[m] = fn(s[m])
    m = (s >= 2) & (s < 3)
    if np.any(m):
        r = s[m] - 2.0
        out = np.empty_like(r)
        vv = np.empty_like(r)
        dd = np.zeros_like(r)
        d2 = np.zeros_like(r)
        a = r <= 1.0 / 6
        out[a], vv[a] = r[a], 1.0
        a = (r > 1.0 / 6) & (r < 1.0 / 3)
        u = 6.0 * (r[a] - 1.0 / 6)
        out[a] = 1.0 / 6 + ell * p(u)
        vv[a], dd[a], d2[a] = 6 * ell * p1(u), 36 * ell * p2(u), 216 * ell * p3(u)
        a = (r >= 1.0 / 3) & (r <= 2.0 / 3)
        out[a] = 1.0 / 6 + ell + math.pi * (r[a] - 1.0 / 3)
        vv[a] = math.pi
        a = (r > 2.0 / 3) & (r < 5.0 / 6)
        u = 6.0 * ((1.0 - r[a]) - 1.0 / 6)
        out[a] = 1.0 / 6 + ell + math.pi / 3 + ell * (1.0 - p(u))
        vv[a], dd[a], d2[a] = 6 * ell * p1(u), -36 * ell * p2(u), 216 * ell * p3(u)
        a = r >= 5.0 / 6
        out[a] = mu_length() - (1.0 - r[a])
        vv[a] = 1.0
        sig[m], v[m], dv[m], ddv[m] = mu0 + out, vv, dd, d2
    return {"sigma": sig, "speed": v, "dspeed": dv, "ddspeed": ddv}


def spine_eval(L: float, s) -> dict[str, np.ndarray]:
    """Evaluate ``gamma_L`` and its Frenet data at parameters ``s`` in ``[0, 4]``.

    Returns arrays ``point (n,2)``, ``tangent``, ``normal`` (left normal),
    ``speed``, ``dspeed`` (d speed/ds), ``kappa`` and ``dkappa`` (d kappa/ds).
    """
    if not L > 1:
        raise ValidationError(f"L must be > 1 (got {L})")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s < 0) | (s > 4)):
        raise ValidationError("spine parameter must lie in [0, 4]")
    n = s.size
    x = np.empty(n)
    y = np.empty(n)
    hd = np.empty(n)
    v = np.empty(n)
    dv = np.zeros(n)
    k = np.zeros(n)
    dk = np.zeros(n)

    m = s < 1
    x[m], y[m], hd[m], v[m] = 1.0, (s[m] - 1.0) * L - 1.0, math.pi / 2, L
    m = (s >= 1) & (s < 2)
    x[m], y[m], hd[m], v[m] = 1.0, s[m] - 2.0, math.pi / 2, 1.0
    m = (s >= 2) & (s < 3)
    if np.any(m):
        x[m], y[m], hd[m], v[m], dv[m], k[m], dk[m] = _mu_eval(s[m] - 2.0)
    m = s >= 3
    x[m], y[m], hd[m], v[m] = -1.0, (3.0 - s[m]) * L, -math.pi / 2, L

    tangent = np.stack([np.cos(hd), np.sin(hd)], axis=-1)
    # exact axis-aligned values on straight pieces
    straight = (s < 2 + 1.0 / 6) | (s >= 3 - 1.0 / 6)
    tangent[straight] = np.round(tangent[straight])
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=-1)
    return {
        "s": s,
        "point": np.stack([x, y], axis=-1),
        "tangent": tangent,
        "normal": normal,
        "speed": v,
        "dspeed": dv,
        "kappa": k,
        "dkappa": dk,
    }


def build_spine(L: float, resolution: int) -> SpineCurve:
    """Sample ``gamma_L`` at ``resolution`` uniform parameters in ``[0, 4]``."""
    if resolution < 5:
        raise ValidationError("spine resolution must be at least 5")
    s = np.linspace(0.0, 4.0, int(resolution))
    d = spine_eval(L, s)
    return SpineCurve(L=float(L), s=s, point=d["point"], tangent=d["tangent"],
                      normal=d["normal"], kappa=d["kappa"], speed=d["speed"])


# ---------------------------------------------------------------------------
# radius profile
# ---------------------------------------------------------------------------
#
# The ramps below are functions of the spine arclength sigma, so that the
# tube radius stays smooth across the speed jumps of gamma_L at s = 1 and
# s = 3.  Derivatives are returned with respect to s or sigma on request.


@dataclass(frozen=True)
class _ProfilePlan:
    L: float
    eps1: float
    eps2: float
    k: float
    k_right: float
    eta_left: float
    eta_right: float
    m_left: float
    m_right: float
    sig_c: float
    sig_total: float
    cap_bottom: Polynomial
    cap_top: Polynomial


def _expo(x, k):
    """``1 - exp(-k x)`` with derivatives in x."""
    e = np.exp(-k * x)
    return [1 - e, k * e, -k * k * e, k**3 * e]


def _leibniz(f, g):
    return [sum(math.comb(o, j) * f[j] * g[o - j] for j in range(o + 1)) for o in range(4)]


def _left_shape(s, sig, plan: _ProfilePlan):
    """Concave ramp ``C(sigma)`` from ``s = 1/L``, tapered to zero on ``[m_left, 1 + eps2]``."""
    c = _expo(sig - 1.0, plan.k)
    w = 1.0 + plan.eps2 - plan.m_left
    sm = _smoothstep5((s - plan.m_left) / w)
    t = [1 - sm[0], -sm[1] / w, -sm[2] / w**2, -sm[3] / w**3]
    prod = _leibniz(c, t)
    taper = s > plan.m_left
    return [np.where(taper, p, ci) for p, ci in zip(prod, c)]


def _right_shape(s, sig, plan: _ProfilePlan):
    """Decreasing ramp ``D(sigma)`` ending at ``s = 4 - 1/L`` with a smooth onset after ``2 - eps2``."""
    e = _expo(plan.sig_c - sig, plan.k_right)
    e = [e[0], -e[1], e[2], -e[3]]
    a = 2.0 - plan.eps2
    w = plan.m_right - a
    sm = _smoothstep5((s - a) / w)
    t = [sm[0], sm[1] / w, sm[2] / w**2, sm[3] / w**3]
    prod = _leibniz(e, t)
    onset = s < plan.m_right
    return [np.where(onset, p, ei) for p, ei in zip(prod, e)]


def _bump_part(s, eps1, order=3):
    """``eps1 * f(s - 1.5)`` on ``[1, 2]`` and zero elsewhere (unit speed there)."""
    s = np.asarray(s, dtype=float)
    x = np.clip(s - 1.5, -0.5, 0.5)
    d = bump_derivatives(x, order)
    inside = (s > 1.0) & (s < 2.0)
    return [np.where(inside, eps1 * dk, 0.0) for dk in d]


def _cap_poly(phi: list[float]) -> Polynomial:
    """Quartic ``Q(sigma)`` closing the tube: ``Q(0) = 0`` and ``Q = phi^2`` to third order at 1.

    ``phi`` holds the value and first three arclength derivatives of the
    radius factor at the join, oriented away from the tip.
    """
    p0, p1, p2, p3 = phi
    q1 = 2 * p0 * p1
    q2 = 2 * (p1 * p1 + p0 * p2)
    q3 = 2 * (3 * p1 * p2 + p0 * p3)
    y = Polynomial([-1, 1])
    base = p0 * p0 + q1 * y + q2 / 2 * y**2 + q3 / 6 * y**3
    return base - base(0.0) * y**4


def _taper_eta(plan: _ProfilePlan, side: str) -> float:
    """Largest ramp amplitude (halved) keeping the profile monotone on the taper window."""
    if side == "left":
        grid = np.linspace(plan.m_left, 1.0 + plan.eps2, 2001)[1:-1]
        slope_bump = _bump_part(grid, plan.eps1, 1)[1]
        ramp = _left_shape(grid, _sigma(plan.L, grid), plan)[1]
        bad = -ramp > 0
        ratio = slope_bump[bad] / -ramp[bad]
    else:
        grid = np.linspace(2.0 - plan.eps2, plan.m_right, 2001)[1:-1]
        slope_bump = -_bump_part(grid, plan.eps1, 1)[1]
        ramp = _right_shape(grid, _sigma(plan.L, grid), plan)[1]
        bad = ramp > 0
        ratio = slope_bump[bad] / ramp[bad]
    return 0.5 * float(np.min(ratio)) if ratio.size else 0.0


def _sigma(L, s):
    return spine_arclength(L, s)["sigma"]


def _middle_eval(s, sig, plan: _ProfilePlan):
    """Profile on ``[1/L, 4 - 1/L]`` as value and three sigma-derivatives."""
    s = np.asarray(s, dtype=float)
    out = [np.ones_like(s)] + [np.zeros_like(s) for _ in range(3)]
    bump = _bump_part(s, plan.eps1)
    for j in range(4):
        out[j] = out[j] + bump[j]
    if plan.eps2 > 0:
        left = s < 1.0 + plan.eps2
        right = s > 2.0 - plan.eps2
        cl = _left_shape(s, sig, plan)
        cr = _right_shape(s, sig, plan)
        for j in range(4):
            out[j] = out[j] + np.where(left, plan.eta_left * cl[j], 0.0)
            out[j] = out[j] + np.where(right, plan.eta_right * cr[j], 0.0)
    return out


@lru_cache(maxsize=64)
def _profile_plan(L: float, eps1: float, eps2: float) -> _ProfilePlan:
    k = float(min(2.0 / (L - 1.0), 8.0))
    sig_total = 2 * L + 1.0 + mu_length()
    # the right ramp spreads its descent over the whole right leg
    k_right = 2.0 / (L - 1.0 + mu_length())
    zero = Polynomial([0.0])
    plan = _ProfilePlan(L, eps1, eps2, k, k_right, 0.0, 0.0, 1.0 + eps2 / 2, 2.0 - eps2 / 2,
                        sig_total - 1.0, sig_total, zero, zero)
    eta_l = eta_r = 0.0
    m_l, m_r = plan.m_left, plan.m_right
    if eps2 > 0:
        # taper windows chosen to maximize the admissible ramp amplitudes
        best = (-1.0, m_l)
        for frac in np.linspace(0.05, 0.95, 19):
            trial = replace(plan, m_left=1.0 + frac * eps2)
            best = max(best, (_taper_eta(trial, "left"), trial.m_left))
        eta_l, m_l = best
        best = (-1.0, m_r)
        for frac in np.linspace(0.05, 0.95, 19):
            trial = replace(plan, m_right=2.0 - eps2 + frac * eps2)
            best = max(best, (_taper_eta(trial, "right"), trial.m_right))
        eta_r, m_r = best
    plan = replace(plan, m_left=m_l, m_right=m_r)
    sig = np.linspace(0.0, 1.0, 2001)
    sb = np.array([1.0 / L, 4.0 - 1.0 / L])
    sigb = _sigma(L, sb)
    # ramp amplitudes are shrunk until both quartic caps close monotonically and concavely
    for _ in range(60):
        plan = replace(plan, eta_left=eta_l, eta_right=eta_r)
        mid = _middle_eval(sb, sigb, plan)
        cap_b = _cap_poly([float(mid[j][0]) for j in range(4)])
        cap_t = _cap_poly([float(mid[j][1]) * (-1) ** j for j in range(4)])
        if all(np.all(c.deriv(1)(sig[:-1]) > 0) and np.all(c.deriv(2)(sig[1:-1]) < 0)
               for c in (cap_b, cap_t)):
            break
        if eta_l == 0.0 and eta_r == 0.0:
            raise ValidationError("cap closure is not increasing and concave; reduce eps1")
        eta_l, eta_r = eta_l / 2, eta_r / 2
        if max(eta_l, eta_r) < 1e-12:
            eta_l = eta_r = 0.0
    return replace(plan, cap_bottom=cap_b, cap_top=cap_t)


def _sqrt_chain(q: Polynomial, sig: np.ndarray):
    """Value and derivatives of ``sqrt(Q(sigma))``."""
    qv = [q(sig), q.deriv(1)(sig), q.deriv(2)(sig), q.deriv(3)(sig)]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.sqrt(np.maximum(qv[0], 0.0))
        p1 = qv[1] / (2 * p)
        p2 = (qv[2] - 2 * p1 * p1) / (2 * p)
        p3 = (qv[3] - 6 * p1 * p2) / (2 * p)
    return [p, p1, p2, p3]


def radius_eval(spec: HookSpec, s, wrt: str = "s") -> list[np.ndarray]:
    """Return ``[phi, phi', phi'', phi''']`` at parameters ``s``.

    Derivatives are taken with respect to ``s`` (default) or to the spine
    arclength (``wrt="sigma"``).  They are infinite at the cap tips.  In ``s``
    the first derivatives jump where the spine speed jumps (``s = 1, 3``);
    in arclength the profile is C^2 everywhere.
    """
    if wrt not in ("s", "sigma"):
        raise ValidationError("wrt must be 's' or 'sigma'")
    plan = _profile_plan(float(spec.L), float(spec.eps1), float(spec.eps2))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s < 0) | (s > 4)):
        raise ValidationError("profile parameter must lie in [0, 4]")
    L = plan.L
    arc = spine_arclength(L, s)
    sig = arc["sigma"]
    out = _middle_eval(s, sig, plan)
    bot = s < 1.0 / L
    if np.any(bot):
        c = _sqrt_chain(plan.cap_bottom, sig[bot])
        for j in range(4):
            out[j][bot] = c[j]
    top = s > 4.0 - 1.0 / L
    if np.any(top):
        c = _sqrt_chain(plan.cap_top, plan.sig_total - sig[top])
        for j in range(4):
            out[j][top] = c[j] * (-1) ** j
    if wrt == "sigma":
        return out
    v, dv, ddv = arc["speed"], arc["dspeed"], arc["ddspeed"]
    with np.errstate(invalid="ignore"):
        # speed derivatives vanish at the tips, where phi' is infinite
        t1 = np.where(dv == 0, 0.0, out[1] * dv)
        t2 = np.where(dv == 0, 0.0, 3 * out[2] * v * dv) + np.where(ddv == 0, 0.0, out[1] * ddv)
    return [out[0], out[1] * v, out[2] * v * v + t1, out[3] * v**3 + t2]


def profile_plan_summary(spec: HookSpec) -> dict[str, float]:
    """Derived construction constants of the radius profile, for reporting."""
    plan = _profile_plan(float(spec.L), float(spec.eps1), float(spec.eps2))
    return {"eta_left": plan.eta_left, "eta_right": plan.eta_right, "ramp_rate": plan.k,
            "ramp_rate_right": plan.k_right,
            "taper_left": float(plan.m_left), "onset_right": float(plan.m_right)}


@dataclass(frozen=True)
class RadiusProfile:
    """Samples of the radius factor ``phi`` and its first two ``s``-derivatives."""

    spec: HookSpec
    grid: np.ndarray
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self) -> None:
        _frozen(self.grid, self.values, self.d1, self.d2)


def _check_resolution(spec: HookSpec, h: float) -> None:
    if spec.eps2 > 0 and h > spec.eps2 / 4:
        raise ValidationError(
            f"resolution too coarse to resolve the eps2 transition: spacing {h:.3g} > eps2/4 = {spec.eps2 / 4:.3g}"
        )


def build_radius_profile(spec: HookSpec, resolution: int) -> RadiusProfile:
    """Sample ``phi`` on a uniform grid of ``resolution`` points in ``[0, 4]``."""
    if resolution < 9:
        raise ValidationError("profile resolution must be at least 9")
    grid = np.linspace(0.0, 4.0, int(resolution))
    _check_resolution(spec, grid[1] - grid[0])
    v, d1, d2, _ = radius_eval(spec, grid)
    return RadiusProfile(spec=spec, grid=grid, values=v, d1=d1, d2=d2)


# ---------------------------------------------------------------------------
# tube mesh
# ---------------------------------------------------------------------------


def twist_beta(a) -> np.ndarray:
    """Cut-off for the stretch term: 1 on ``[2+1/12, 3-1/12]``, 0 near 2 and 3."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    lo, hi = 2.0 + 1.0 / 24, 2.0 + 1.0 / 12

    def step(t):
        # C-infinity step: 0 for t <= 0, 1 for t >= 1
        t = np.clip(t, 0.0, 1.0)
        num = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        den = num + np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
        return num / den

    up = step((a - lo) / (hi - lo))
    down = step(((5.0 - a) - lo) / (hi - lo))
    out = np.minimum(up, down)
    return np.where((a >= 2.0) & (a <= 3.0), out, 0.0)


def cosine_grid(n: int) -> np.ndarray:
    """Cell-centred parameters in ``(0, 4)`` clustered quadratically at the cap tips."""
    return _cosine_s((np.arange(n) + 0.5) / n)


def _cosine_s(zeta):
    return 2.0 * (1.0 - np.cos(np.pi * np.asarray(zeta, dtype=float)))


def _fiber_grid(n: int, fiber_resolution) -> dict:
    if n == 1:
        na = int(fiber_resolution or 32)
        if na < 4:
            raise ValidationError("fiber resolution must be at least 4")
        return {"alpha": 2 * np.pi * np.arange(na) / na}
    nt, nphi = fiber_resolution or (12, 24)
    if nphi % 2 or nt < 2 or nphi < 4:
        raise ValidationError("fiber resolution (n_theta, n_phi) needs n_theta >= 2 and even n_phi >= 4")
    return {
        "theta": (np.arange(nt) + 0.5) * np.pi / nt,
        "phi": 2 * np.pi * np.arange(nphi) / nphi,
    }


def fiber_directions(n: int, normal: np.ndarray, fiber: dict) -> np.ndarray:
    """Unit vectors in the normal space, shape ``(ns, *fiber_shape, n + 2)``."""
    ns = normal.shape[0]
    if n == 1:
        al = fiber["alpha"]
        out = np.zeros((ns, al.size, 3))
        out[..., 0] = normal[:, None, 0] * np.cos(al)[None, :]
        out[..., 1] = normal[:, None, 1] * np.cos(al)[None, :]
        out[..., 2] = np.sin(al)[None, :]
        return out
    th, ph = fiber["theta"], fiber["phi"]
    ct, st = np.cos(th)[:, None], np.sin(th)[:, None]
    out = np.zeros((ns, th.size, ph.size, 4))
    out[..., 0] = normal[:, None, None, 0] * ct[None]
    out[..., 1] = normal[:, None, None, 1] * ct[None]
    out[..., 2] = (st * np.cos(ph)[None, :])[None]
    out[..., 3] = (st * np.sin(ph)[None, :])[None]
    return out


def tube_positions(spec: HookSpec, s, fiber: dict) -> tuple[np.ndarray, dict]:
    """Positions ``gamma_L(s) + d0 phi(s) omega`` for given parameters and fiber grid."""
    sp = spine_eval(spec.L, s)
    r = spec.d0 * radius_eval(spec, sp["s"])[0]
    return _assemble(sp["point"], sp["normal"], r, spec.n, fiber), {"spine": sp, "radius": r}


def _assemble(point, normal, radius, n, fiber):
    omega = fiber_directions(n, normal, fiber)
    center = np.zeros((point.shape[0], n + 2))
    center[:, :2] = point
    shape = (point.shape[0],) + (1,) * (omega.ndim - 2) + (n + 2,)
    return center.reshape(shape) + radius.reshape(shape[:-1] + (1,)) * omega


@dataclass(frozen=True)
class TubeChart:
    """Smooth parametrization of a tube by a uniform index coordinate ``zeta``.

    ``fn(zeta)`` returns the spine parameter ``s``, spine point, in-plane
    normal and the signed tube radius.  The sign flips when ``zeta`` leaves
    the physical range through a cap tip, so that ghost layers obtained by
    evaluating outside the range continue the surface smoothly.
    """

    fn: Callable
    zeta: np.ndarray
    scale: float = 1.0

    def __call__(self, zeta):
        d = self.fn(np.asarray(zeta, dtype=float))
        if self.scale != 1.0:
            d = dict(d, point=self.scale * d["point"], radius=self.scale * d["radius"])
        return d


def _hook_chart_fn(spec: HookSpec, kind: str, s0: float, ds: float):
    def fn(zeta):
        if kind == "cosine":
            s = _cosine_s(zeta)
            sign = np.where(np.sin(np.pi * zeta) < 0, -1.0, 1.0)
            s = np.clip(s, 0.0, 4.0)
        else:
            s = s0 + ds * zeta
            sign = np.ones_like(s)
            if np.any((s <= 0) | (s >= 4)):
                raise ValidationError("mesh window (with ghost layers) must lie strictly inside (0, 4)")
        sp = spine_eval(spec.L, s)
        r = spec.d0 * radius_eval(spec, s)[0]
        return {"s": s, "point": sp["point"], "normal": sp["normal"], "radius": sign * r}

    return fn


@dataclass(frozen=True)
class EmbeddedMesh:
    """Tube hypersurface sampled on a (spine parameter, fiber) grid.

    ``positions`` has shape ``(n_s, n_alpha, 3)`` for ``n = 1`` and
    ``(n_s, n_theta, n_phi, 4)`` for ``n = 2``.
    """

    spec: HookSpec | None
    n: int
    s: np.ndarray
    fiber: dict
    positions: np.ndarray
    center: np.ndarray
    radius: np.ndarray
    omega: np.ndarray
    twist: np.ndarray  # beta(s) * L_st per slice
    chart: TubeChart
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        _frozen(self.s, self.positions, self.center, self.radius, self.omega, self.twist)

    def reconstruction_residual(self) -> float:
        """Max deviation of stored positions from ``center + radius * omega``."""
        shape = (self.s.size,) + (1,) * (self.omega.ndim - 2) + (self.n + 2,)
        rebuilt = self.center.reshape(shape) + self.radius.reshape(shape[:-1] + (1,)) * self.omega
        return float(np.max(np.abs(self.positions - rebuilt)))

    def evaluate(self, zeta, fiber: dict) -> np.ndarray:
        """Positions at arbitrary index coordinates and fiber angles (for ghost layers)."""
        d = self.chart(zeta)
        return _assemble(d["point"], d["normal"], d["radius"], self.n, fiber)

    def twist_at(self, zeta) -> np.ndarray:
        if self.spec is None or self.spec.L_st == 0:
            return np.zeros(np.size(zeta))
        return twist_beta(self.chart(zeta)["s"]) * self.spec.L_st

    def scaled(self, lam: float) -> "EmbeddedMesh":
        """Same mesh with every ambient coordinate multiplied by ``lam``."""
        chart = TubeChart(self.chart.fn, self.chart.zeta, self.chart.scale * lam)
        return _mesh_from_chart(self.spec, self.n, chart, self.fiber, dict(self.metadata, scale=chart.scale))


def _mesh_from_chart(spec, n, chart: TubeChart, fiber: dict, metadata: dict) -> EmbeddedMesh:
    d = chart(chart.zeta)
    omega = fiber_directions(n, d["normal"], fiber)
    center = np.zeros((chart.zeta.size, n + 2))
    center[:, :2] = d["point"]
    shape = (chart.zeta.size,) + (1,) * (omega.ndim - 2) + (n + 2,)
    pos = center.reshape(shape) + d["radius"].reshape(shape[:-1] + (1,)) * omega
    l_st = 0.0 if spec is None else spec.L_st
    twist = twist_beta(d["s"]) * l_st
    return EmbeddedMesh(spec=spec, n=n, s=d["s"], fiber=fiber, positions=pos, center=center,
                        radius=d["radius"], omega=omega, twist=twist, chart=chart, metadata=metadata)


def build_hook_mesh(spec: HookSpec, resolution: int, *, s_grid=None, fiber_resolution=None) -> EmbeddedMesh:
    """Sample the hook tube.

    By default the spine parameters are ``cosine_grid(resolution)``, which
    resolves the cap tips.  Pass a uniform ``s_grid`` to sample a window
    instead.  ``fiber_resolution`` is the number of angles (n = 1) or
    ``(n_theta, n_phi)`` (n = 2).
    """
    if s_grid is None:
        if resolution < 8:
            raise ValidationError("mesh resolution must be at least 8")
        zeta = (np.arange(int(resolution)) + 0.5) / int(resolution)
        s = _cosine_s(zeta)
        kind, s0, ds = "cosine", 0.0, 0.0
        chart = TubeChart(_hook_chart_fn(spec, kind, s0, ds), zeta)
    else:
        s = np.asarray(s_grid, dtype=float)
        if s.ndim != 1 or s.size < 3 or np.any(np.diff(s) <= 0):
            raise ValidationError("s_grid must be a strictly increasing 1-D array of >= 3 points")
        ds = float(s[1] - s[0])
        if np.max(np.abs(np.diff(s) - ds)) > 1e-9 * max(1.0, ds):
            raise ValidationError("s_grid must be uniformly spaced")
        if s[0] - 2 * ds <= 0 or s[-1] + 2 * ds >= 4:
            raise ValidationError("s_grid (with two ghost layers) must lie strictly inside (0, 4)")
        kind, s0 = "window", float(s[0])
        chart = TubeChart(_hook_chart_fn(spec, kind, s0, ds), np.arange(s.size, dtype=float))
    if spec.eps2 > 0:
        near = ((s > 1) & (s < 1 + 2 * spec.eps2)) | ((s > 2 - 2 * spec.eps2) & (s < 2))
        if np.any(near):
            gaps = np.diff(s)
            idx = np.flatnonzero(near[:-1] | near[1:])
            _check_resolution(spec, float(np.max(gaps[idx])) if idx.size else 0.0)
    fiber = _fiber_grid(spec.n, fiber_resolution)
    return _mesh_from_chart(spec, spec.n, chart, fiber,
                            {"resolution": int(s.size), "grid": kind, "scale": 1.0})


def build_sphere_mesh(radius: float, resolution: int, n: int = 1, fiber_resolution=None) -> EmbeddedMesh:
    """Round ``S^{n+1}`` of the given radius written as a tube around a straight segment."""
    if radius <= 0 or resolution < 4:
        raise ValidationError("sphere mesh needs radius > 0 and resolution >= 4")

    def fn(zeta):
        z = -radius * np.cos(np.pi * zeta)
        pt = np.stack([np.zeros_like(z), z], axis=-1)
        nrm = np.tile([-1.0, 0.0], (z.size, 1))
        return {"s": zeta, "point": pt, "normal": nrm, "radius": radius * np.sin(np.pi * zeta)}

    zeta = (np.arange(int(resolution)) + 0.5) / int(resolution)
    return _mesh_from_chart(None, n, TubeChart(fn, zeta), _fiber_grid(n, fiber_resolution),
                            {"resolution": int(resolution), "grid": "sphere", "scale": 1.0})


def build_revolution_mesh(radius_fn: Callable, z_grid, n: int = 1, fiber_resolution=None) -> EmbeddedMesh:
    """Tube of radius ``radius_fn(z)`` around the segment ``{0} x z_grid`` (uniform ``z_grid``)."""
    z = np.asarray(z_grid, dtype=float)
    dz = float(z[1] - z[0])
    if z.ndim != 1 or z.size < 3 or np.max(np.abs(np.diff(z) - dz)) > 1e-9 * max(1.0, abs(dz)):
        raise ValidationError("z_grid must be a uniform 1-D array of >= 3 points")

    def fn(zeta):
        zz = z[0] + dz * zeta
        pt = np.stack([np.zeros_like(zz), zz], axis=-1)
        nrm = np.tile([-1.0, 0.0], (zz.size, 1))
        return {"s": zz, "point": pt, "normal": nrm, "radius": np.asarray(radius_fn(zz), dtype=float)}

    return _mesh_from_chart(None, n, TubeChart(fn, np.arange(z.size, dtype=float)),
                            _fiber_grid(n, fiber_resolution),
                            {"resolution": int(z.size), "grid": "revolution", "scale": 1.0})


# ---------------------------------------------------------------------------
# rotationally symmetric surrogates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileMetric:
    """``g = phi_g(x)^2 dx^2 + psi(x)^2 g_{S^n}`` on a uniform grid ``x`` in ``[0, 1]``.

    TwoCaps and FixedEnds grids include both end points; Periodic grids have
    period 1 and omit ``x = 1``.
    """

    x: np.ndarray
    phi_g: np.ndarray
    psi: np.ndarray
    n: int = 2
    topology: str = "TwoCaps"

    def __post_init__(self) -> None:
        if self.topology not in TOPOLOGIES:
            raise ValidationError(f"unknown topology {self.topology!r}")
        if self.n not in (1, 2):
            raise ValidationError("fiber dimension must be 1 or 2")
        if not (self.x.shape == self.phi_g.shape == self.psi.shape) or self.x.ndim != 1:
            raise ValidationError("profile channels must be 1-D arrays of equal length")
        if self.x.size < 5:
            raise ValidationError("profile needs at least 5 nodes")
        if np.any(self.phi_g <= 0):
            raise ValidationError("gauge factor must be positive")
        interior = self.psi[1:-1]
        if np.any(interior <= 0):
            raise ValidationError("fiber radius must be positive at interior nodes")
        if self.topology == "TwoCaps" and (self.psi[0] != 0 or self.psi[-1] != 0):
            raise ValidationError("TwoCaps profile must vanish at both ends")
        if self.topology != "TwoCaps" and (self.psi[0] <= 0 or self.psi[-1] <= 0):
            raise ValidationError("fiber radius must be positive at the ends")
        _frozen(self.x, self.phi_g, self.psi)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def periodic(self) -> bool:
        return self.topology == "Periodic"

    def arclength(self) -> np.ndarray:
        """Cumulative arclength at the nodes (trapezoid in x)."""
        mid = 0.5 * (self.phi_g[1:] + self.phi_g[:-1]) * np.diff(self.x)
        return np.concatenate([[0.0], np.cumsum(mid)])

    def total_length(self) -> float:
        if self.periodic:
            # one full period, nodes exclude the duplicated endpoint
            return float(np.sum(self.phi_g) * self.h)
        return float(self.arclength()[-1])

    def scaled(self, lam: float) -> "ProfileMetric":
        """Metric multiplied by ``lam**2``."""
        return ProfileMetric(self.x, lam * self.phi_g, lam * self.psi, self.n, self.topology)


def _uniform_x(resolution: int, periodic: bool = False) -> np.ndarray:
    if resolution < 5:
        raise ValidationError("profile resolution must be at least 5")
    return np.linspace(0.0, 1.0, int(resolution), endpoint=not periodic)


def round_sphere_profile(r: float, resolution: int, n: int = 2) -> ProfileMetric:
    """Round ``S^{n+1}`` of radius ``r``: ``psi = r sin(s / r)``."""
    x = _uniform_x(resolution)
    length = np.pi * r
    psi = r * np.sin(np.pi * x)
    psi[0] = psi[-1] = 0.0
    return ProfileMetric(x, np.full_like(x, length), psi, n, "TwoCaps")


def cylinder_profile(d0: float, length: float, resolution: int, n: int = 2,
                     topology: str = "Periodic") -> ProfileMetric:
    """Round cylinder of radius ``d0``; periodic grids omit the endpoint ``x = 1``."""
    x = _uniform_x(resolution, topology == "Periodic")
    return ProfileMetric(x, np.full_like(x, float(length)), np.full_like(x, float(d0)), n, topology)


def _descent(u, um, r_top, r_neck, kappa_neck):
    """Monotone septic from a bulb equator (u = 0) to the neck minimum (u = um).

    Value, slope, curvature and a zero third derivative are matched at both
    ends, so the mirrored neck is C^3 at its centre and at the equators.
    """
    drop = r_top - r_neck
    a = -um * um / (r_top * drop)  # matches psi'' = -1/r_top at the equator
    b = kappa_neck * um * um / drop
    rows, rhs = [], []
    for t0, vals in ((0.0, (1.0, 0.0, a, 0.0)), (1.0, (0.0, 0.0, b, 0.0))):
        for k, v in enumerate(vals):
            rows.append([math.perm(j, k) * t0 ** (j - k) if j >= k else 0.0 for j in range(8)])
            rhs.append(v)
    poly = Polynomial(np.linalg.solve(np.array(rows), np.array(rhs)))
    t = np.linspace(0.0, 1.0, 4001)[1:-1]
    if np.any(poly.deriv(1)(t) >= 0):
        raise ValidationError("neck join is not monotone; lengthen the neck or reduce the bulb/neck ratio")
    return r_neck + drop * poly(u / um)


def build_dumbbell_profile(bulb_radii, neck_radius: float, neck_length: float, resolution: int,
                           n: int = 2, neck_curvature: float | None = None) -> ProfileMetric:
    """Two round caps of radii ``bulb_radii`` joined by a neck.

    ``neck_length`` is the arclength between the two bulb equators and
    ``neck_radius`` the minimum of ``psi``, attained at the neck midpoint.  The
    joins are C^2 quintics; ``neck_curvature`` is ``psi_ss`` at the minimum.
    """
    r1, r2 = (float(b) for b in bulb_radii)
    rn, ln = float(neck_radius), float(neck_length)
    if min(r1, r2, rn) <= 0 or ln < 0:
        raise ValidationError("dumbbell radii must be positive and the neck length nonnegative")
    x = _uniform_x(resolution)
    if ln == 0:
        if not (r1 == r2 == rn):
            raise ValidationError("zero neck length requires equal bulb and neck radii")
        return round_sphere_profile(r1, resolution, n)
    if not rn < min(r1, r2):
        raise ValidationError("neck radius must be smaller than both bulb radii")
    um = ln / 2
    if neck_curvature is None:
        neck_curvature = 1.0
    if neck_curvature <= 0:
        raise ValidationError("neck curvature must be positive")
    total = np.pi * r1 / 2 + ln + np.pi * r2 / 2
    s = x * total
    e1 = np.pi * r1 / 2
    e2 = e1 + ln
    psi = np.empty_like(s)
    m = s <= e1
    psi[m] = r1 * np.sin(s[m] / r1)
    m = (s > e1) & (s <= e1 + um)
    psi[m] = _descent(s[m] - e1, um, r1, rn, neck_curvature)
    m = (s > e1 + um) & (s < e2)
    psi[m] = _descent(e2 - s[m], um, r2, rn, neck_curvature)
    m = s >= e2
    psi[m] = r2 * np.sin((total - s[m]) / r2)
    if r1 == r2:
        # exact mirror symmetry
        psi = 0.5 * (psi + psi[::-1])
    psi[0] = psi[-1] = 0.0
    return ProfileMetric(x, np.full_like(x, total), psi, n, "TwoCaps")


@dataclass(frozen=True)
class TwistedMetric:
    """``k + e^{2u} dtheta^2`` with ``k = a(x)^2 dx^2 + h(x)^2 dphi^2`` on ``x`` in ``[0, 1]``."""

    x: np.ndarray
    a: np.ndarray
    h: np.ndarray
    u: np.ndarray
    circle_length: float = 2 * np.pi

    def __post_init__(self) -> None:
        if not (self.x.shape == self.a.shape == self.h.shape == self.u.shape):
            raise ValidationError("twisted metric channels must have equal length")
        if np.any(self.a <= 0) or np.any(self.h[1:-1] <= 0):
            raise ValidationError("gauge and warp must be positive in the interior")
        if self.h[0] != 0 or self.h[-1] != 0:
            raise ValidationError("warp must vanish at both poles")
        _frozen(self.x, self.a, self.h, self.u)

    @property
    def h_x(self) -> float:
        return float(self.x[1] - self.x[0])

    def rho(self) -> np.ndarray:
        mid = 0.5 * (self.a[1:] + self.a[:-1]) * np.diff(self.x)
        return np.concatenate([[0.0], np.cumsum(mid)])

    def slice_area(self) -> float:
        """Area of ``S^2 x {theta}``, trapezoid in x."""
        w = 2 * np.pi * self.h * self.a
        return float(trapezoid(w, self.x))


def build_twisted_neck(d0: float, amplitude: float, shape: Callable | str, circle_length: float,
                       resolution: int) -> TwistedMetric:
    """Round ``S^2`` of radius ``d0`` with twist potential ``u = amplitude * shape(rho / d0)``.

    ``shape`` is a function of the polar angle in ``[0, pi]`` (or the name
    ``"cos"``); it must have zero slope at both poles.
    """
    if d0 <= 0 or amplitude < 0 or circle_length <= 0:
        raise ValidationError("need d0 > 0, amplitude >= 0, circle_length > 0")
    if isinstance(shape, str):
        shapes = {"cos": np.cos, "cos2": lambda t: np.cos(2 * t), "const": np.ones_like}
        if shape not in shapes:
            raise ValidationError(f"unknown twist shape {shape!r}")
        shape = shapes[shape]
    x = _uniform_x(resolution)
    theta = np.pi * x
    eps = 1e-6
    slope = [(shape(np.array([p + eps])) - shape(np.array([p - eps])))[0] / (2 * eps) for p in (0.0, np.pi)]
    if max(abs(v) for v in slope) > 1e-6:
        raise ValidationError("twist shape must have zero slope at the poles")
    h = d0 * np.sin(theta)
    h[0] = h[-1] = 0.0
    u = amplitude * np.asarray(shape(theta), dtype=float)
    return TwistedMetric(x, np.full_like(x, np.pi * d0), h, u, float(circle_length))
