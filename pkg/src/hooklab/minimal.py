"""Minimal slices of warped products, their stability, and sweepout widths.

For ``g = ds^2 + psi(s)^2 g_{S^n}`` a slice ``{s0} x S^n`` is minimal iff
``psi_s(s0) = 0``; it is then totally geodesic and its Jacobi operator is
``-Delta + n psi_ss / psi``, whose lowest eigenvalue is ``n psi_ss(s0)/psi(s0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh
from scipy.optimize import brentq
from scipy.special import eval_legendre, roots_legendre

from .curvature import SPHERE_AREA, profile_derivatives
from .hookgen import ProfileMetric, ValidationError
from .ricci import FlowConfig, Trajectory, run_to_singularity

__all__ = [
    "MinimalSlice",
    "WidthSurrogate",
    "AreaDecay",
    "AppearanceResult",
    "find_minimal_slices",
    "slice_stability",
    "brute_force_second_variation",
    "area_decay_tracker",
    "width_surrogate",
    "slice_area",
    "appearance_profile",
    "appearance_run",
    "GeodesicResult",
    "geodesic_audit",
]

STABILITY_TOL = 1e-6


@dataclass(frozen=True)
class MinimalSlice:
    """A critical slice ``{s0} x S^n``; ``area = |S^n| psi(s0)^n`` (unit-sphere area ``SPHERE_AREA[n]``)."""

    location: float
    x: float
    psi: float
    area: float
    verdict: str
    eigenvalue: float
    degenerate_family: bool = False


@dataclass(frozen=True)
class WidthSurrogate:
    """Largest slice area over an arclength interval versus its designated boundary slice."""

    lo: float
    hi: float
    boundary: str
    value: float
    boundary_area: float
    margin: float
    argmax: float

    @property
    def flag(self) -> bool:
        return self.value > self.boundary_area + self.margin


def slice_area(psi, n: int):
    return SPHERE_AREA[n] * np.asarray(psi, dtype=float) ** n


def _verdict(eig: float, psi0: float, tol: float) -> str:
    scale = tol / psi0**2
    if abs(eig) <= scale:
        return "degenerate"
    return "stable" if eig > 0 else "unstable"


def _splines(m: ProfileMetric):
    d = profile_derivatives(m)
    s = d["s"]
    if m.periodic:
        period = m.total_length()
        s = np.append(s, s[0] + period)
        cols = [np.append(d[k], d[k][0]) for k in ("psi", "psi_s", "psi_ss")]
        bc = "periodic"
    else:
        cols = [d[k] for k in ("psi", "psi_s", "psi_ss")]
        bc = "not-a-knot"
    return s, cols, [CubicSpline(s, c, bc_type=bc) for c in cols]


def find_minimal_slices(m: ProfileMetric, *, root_tol: float = 1e-10, flat_tol: float = 1e-9,
                        stability_tol: float = STABILITY_TOL) -> list[MinimalSlice]:
    """All interior critical slices of ``psi``, ordered by location.

    Roots are bracketed by sign changes of the discrete ``psi_s`` and refined
    by ``brentq`` on its cubic interpolant.  A run of at least three nodes
    with ``|psi_s| <= flat_tol`` (a cylinder) is reported once, at its
    middle node, flagged as a degenerate family.
    """
    s, (psi, ps, pss), (sp_psi, sp_ps, sp_pss) = _splines(m)
    n_nodes = m.x.size
    # candidate nodes: interior ones, plus the wrap node for periodic grids
    nodes = np.arange(n_nodes) if m.periodic else np.arange(1, n_nodes - 1)
    flat = np.abs(ps) <= flat_tol
    out: list[MinimalSlice] = []

    def emit(s0, family=False, node=None):
        p0 = float(psi[node]) if node is not None else float(sp_psi(s0))
        q0 = float(pss[node]) if node is not None else float(sp_pss(s0))
        eig = m.n * q0 / p0
        verdict = "degenerate" if family else _verdict(eig, p0, stability_tol)
        xs = float(np.interp(s0, s[:n_nodes], m.x))
        out.append(MinimalSlice(location=float(s0), x=xs, psi=p0, area=float(slice_area(p0, m.n)),
                                verdict=verdict, eigenvalue=float(eig), degenerate_family=family))

    # runs of flat nodes
    runs, cur = [], []
    for i in nodes:
        if flat[i]:
            cur.append(int(i))
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    for run in runs:
        if len(run) >= 3:
            emit(s[run[len(run) // 2]], family=True, node=run[len(run) // 2])
        else:
            for k in run:
                emit(s[k], node=k)
    # sign changes between consecutive non-flat nodes
    last = n_nodes if m.periodic else n_nodes - 1
    for i in range(last):
        j = i + 1
        if flat[i] or flat[j % n_nodes] or ps[i] * ps[j] >= 0:
            continue
        r = brentq(lambda z: float(sp_ps(z)), s[i], s[j], xtol=root_tol * max(1.0, s[-1]))
        if m.periodic and r >= s[n_nodes]:
            r -= s[n_nodes] - s[0]
        emit(r)
    out.sort(key=lambda z: z.location)
    return out


def slice_stability(m: ProfileMetric, s0: float, *, crit_tol: float = 1e-6,
                    stability_tol: float = STABILITY_TOL) -> tuple[str, float]:
    """Verdict and lowest Jacobi eigenvalue ``n psi_ss / psi`` of the slice at arclength ``s0``."""
    s, _, (sp_psi, sp_ps, sp_pss) = _splines(m)
    if not s[0] < s0 < s[-1] and not m.periodic:
        raise ValidationError("slice location must be interior")
    if m.periodic:
        s0 = s[0] + (s0 - s[0]) % (s[-1] - s[0])
    slope = float(sp_ps(s0))
    if abs(slope) > crit_tol:
        raise ValidationError(f"slice at s={s0:.6g} is not critical: psi_s = {slope:.3g}")
    p0 = float(sp_psi(s0))
    eig = m.n * float(sp_pss(s0)) / p0
    return _verdict(eig, p0, stability_tol), eig


def brute_force_second_variation(m: ProfileMetric, s0: float, *, modes: int = 4, eps: float = 1e-3,
                                 quad: int = 48) -> float:
    """Lowest eigenvalue of the discrete second variation of slice area at ``s0``.

    Normal graphs ``s = s0 + f`` over the fiber sphere are expanded in
    rotation-invariant modes (Legendre ``P_l`` for ``n = 2``, ``cos(l theta)``
    for ``n = 1``).  The area functional is evaluated with ``psi`` taken from
    a cubic spline of the grid values, its Hessian is formed by central
    differences, and the generalized eigenproblem against the ``L^2`` mass
    matrix of the slice is solved.  No curvature formula enters.
    """
    sp = CubicSpline(m.arclength(), m.psi)
    n = m.n
    if n == 2:
        z, w = roots_legendre(quad)
        w = 2 * np.pi * w
        basis = np.array([eval_legendre(l, z) for l in range(modes)])
        # d/dz P_l via the three-term identity (1 - z^2) P_l' = l (P_{l-1} - z P_l)
        dbasis = np.array([np.zeros_like(z)] + [l * (eval_legendre(l - 1, z) - z * eval_legendre(l, z))
                                                 for l in range(1, modes)])
        grad_w = 1.0 / (1 - z**2)  # |grad f|^2 = (1 - z^2) f_z^2 = [(1 - z^2) f_z]^2 / (1 - z^2)
    else:
        th = 2 * np.pi * np.arange(quad) / quad
        w = np.full(quad, 2 * np.pi / quad)
        basis = np.array([np.cos(l * th) for l in range(modes)])
        dbasis = np.array([-l * np.sin(l * th) for l in range(modes)])
        grad_w = np.ones(quad)

    def area(c):
        f = c @ basis
        df = c @ dbasis
        p = sp(s0 + f)
        return float(np.sum(w * p**n * np.sqrt(1 + grad_w * df**2 / p**2)))

    k = modes
    H = np.empty((k, k))
    a0 = area(np.zeros(k))
    E = np.eye(k) * eps
    for i in range(k):
        for j in range(i, k):
            if i == j:
                H[i, i] = (area(E[i]) - 2 * a0 + area(-E[i])) / eps**2
            else:
                H[i, j] = H[j, i] = (area(E[i] + E[j]) - area(E[i] - E[j]) - area(-E[i] + E[j])
                                     + area(-E[i] - E[j])) / (4 * eps**2)
    p0 = float(sp(s0))
    M = (basis * (w * p0**n)) @ basis.T
    return float(eigh(H, M, eigvals_only=True)[0])


# ---------------------------------------------------------------------------
# area decay of stable necks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AreaDecay:
    times: np.ndarray
    tau: np.ndarray
    areas: np.ndarray
    slope: float
    intercept: float
    ratio_min: float
    ratio_max: float
    bounds: tuple
    window: np.ndarray

    @property
    def within_bounds(self) -> bool:
        return self.bounds[0] <= self.ratio_min and self.ratio_max <= self.bounds[1]


def _least_stable_area(m: ProfileMetric) -> float:
    areas = [z.area for z in find_minimal_slices(m) if z.verdict in ("stable", "degenerate")]
    return min(areas) if areas else math.nan


def area_decay_tracker(traj: Trajectory, *, bounds: tuple | None = None) -> AreaDecay:
    """Area of the least-area stable slice against ``tau = T_hat - t``.

    Degenerate slices (nonnegative second variation at tolerance) are
    admitted, so an exact cylinder is tracked.  The fit and the ratio
    ``A / tau`` use the final decade ``tau <= 10 tau_final`` of the snapshots.
    """
    if traj.kind != "profile":
        raise ValidationError("area tracking needs a profile trajectory")
    if not math.isfinite(traj.T_hat):
        raise ValidationError("trajectory has no singular-time estimate")
    n = traj.metadata.get("n", 2)
    if bounds is None:
        unit = 8 * np.pi if n == 2 else 2 * np.pi
        bounds = (0.9 * unit, 1.1 * unit)
    t = np.asarray(traj.snapshot_times, dtype=float)
    areas = np.array([_least_stable_area(m) for m in traj.snapshots])
    ok = np.isfinite(areas)
    if not ok.any():
        raise ValidationError("no stable slice in trajectory")
    t, areas = t[ok], areas[ok]
    tau = traj.T_hat - t
    if np.any(tau <= 0):
        raise ValidationError("snapshots past the estimated singular time")
    window = tau <= 10 * tau[-1]
    if window.sum() < 3:
        raise ValidationError("fewer than three snapshots in the final decade")
    slope, icpt = np.polyfit(tau[window], areas[window], 1)
    ratio = areas[window] / tau[window]
    return AreaDecay(times=t, tau=tau, areas=areas, slope=float(slope), intercept=float(icpt),
                     ratio_min=float(ratio.min()), ratio_max=float(ratio.max()),
                     bounds=tuple(bounds), window=window)


# ---------------------------------------------------------------------------
# width surrogate
# ---------------------------------------------------------------------------


def width_surrogate(m: ProfileMetric, region: tuple[float, float], boundary: str = "lo",
                    margin: float = 0.0) -> WidthSurrogate:
    """Foliation-slice maximum over the arclength interval ``region``.

    The sweepout is the family of slices ``{s} x S^n`` for ``s`` in the
    interval, starting at the boundary slice (``"lo"`` or ``"hi"`` end).
    Its maximal area bounds the min-max width from above.
    """
    lo, hi = (float(v) for v in region)
    s = m.arclength()
    if not lo < hi:
        raise ValidationError("empty region")
    if lo < s[0] - 1e-12 or hi > s[-1] + 1e-12:
        raise ValidationError("region exceeds the profile")
    if boundary not in ("lo", "hi"):
        raise ValidationError("boundary must be 'lo' or 'hi'")
    inside = (s > lo) & (s < hi)
    ss = np.concatenate([[lo], s[inside], [hi]])
    pp = np.interp(ss, s, m.psi)
    a = slice_area(pp, m.n)
    k = int(np.argmax(a))
    b_area = float(a[0] if boundary == "lo" else a[-1])
    return WidthSurrogate(lo=lo, hi=hi, boundary=boundary, value=float(a[k]), boundary_area=b_area,
                          margin=float(margin), argmax=float(ss[k]))


# ---------------------------------------------------------------------------
# appearance of stable slices
# ---------------------------------------------------------------------------


def appearance_profile(slope: float, *, end_radius: float = 0.5, length: float = 1.0,
                       resolution: int = 201, n: int = 2) -> ProfileMetric:
    """Linear FixedEnds profile ``psi = end_radius + slope (length - s)``.

    The radius decreases toward the held right end, so at ``t = 0`` there is
    no critical slice.  Under the flow the interior shrinks while the end
    slice is held, and a stable neck is created next to it.
    """
    if not 0 < slope < 1:
        raise ValidationError("slope must lie in (0, 1)")
    if end_radius <= 0 or length <= 0:
        raise ValidationError("end_radius and length must be positive")
    x = np.linspace(0.0, 1.0, resolution)
    psi = end_radius + slope * length * (1 - x)
    return ProfileMetric(x=x, phi_g=np.full_like(x, length), psi=psi, n=n, topology="FixedEnds")


@dataclass(frozen=True)
class AppearanceResult:
    """Outcome of an appearance run.

    ``t_appear`` is the first accepted time with a stable slice and
    ``t_flag`` the first with the width flag set (``nan`` when never).
    """

    times: np.ndarray
    stable_count: np.ndarray
    flag: np.ndarray
    width: np.ndarray
    boundary_area: np.ndarray
    t_appear: float
    t_flag: float
    initial_slices: tuple
    trajectory: Trajectory = field(repr=False)

    @property
    def stable_at_flag(self) -> bool:
        """A stable slice is present from the first flagged time to the end of the run."""
        if not math.isfinite(self.t_flag):
            return False
        after = self.times >= self.t_flag
        return bool(np.all(self.stable_count[after] > 0))


def appearance_run(m: ProfileMetric, region: tuple[float, float], *, boundary: str = "lo",
                   margin: float = 0.0, t_max: float, config: FlowConfig | None = None) -> AppearanceResult:
    """Flow ``m`` to ``t_max`` and monitor stable slices and the width flag at every step.

    ``region`` is given in the grid coordinate ``x``.  FixedEnds and
    Periodic profiles evolve without a gauge term and regridding is switched
    off here, so ``x`` labels the same material slices throughout.
    """
    base = config or FlowConfig()
    cfg = FlowConfig(**{**base.as_dict(), "t_max": t_max, "regrid_threshold": math.inf})

    def observe(t, state):
        s = state.arclength()
        lo, hi = np.interp(region, state.x, s)
        w = width_surrogate(state, (lo, hi), boundary, margin)
        stable = sum(z.verdict == "stable" for z in find_minimal_slices(state))
        return {"stable_count": float(stable), "width": w.value, "boundary_area": w.boundary_area,
                "flag": float(w.flag)}

    traj = run_to_singularity(m, cfg, observer=observe)
    ch = traj.channels
    times = traj.times
    stable = ch["stable_count"]
    flag = ch["flag"] > 0

    def first(mask):
        idx = np.flatnonzero(mask)
        return float(times[idx[0]]) if idx.size else math.nan

    return AppearanceResult(times=times, stable_count=stable, flag=flag, width=ch["width"],
                            boundary_area=ch["boundary_area"], t_appear=first(stable > 0),
                            t_flag=first(flag), initial_slices=tuple(find_minimal_slices(m)),
                            trajectory=traj)


# ---------------------------------------------------------------------------
# closed geodesics on n = 1 tubes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicResult:
    """Outcome of one seeded shortening.

    ``outcome`` is ``"geodesic"`` (converged, non-degenerate length),
    ``"collapsed"`` (shrank to a point), ``"escaped"`` (reached the edge of
    the parameter domain) or ``"unconverged"``.  ``index`` is the smallest
    Rayleigh quotient of ``int(phi'^2 - K phi^2) / int(phi^2)`` over the
    trial basis and is only set for geodesics.
    """

    seed_index: int
    outcome: str
    length: float
    residual: float
    index: float
    u_mean: float
    s_mean: float
    curve: np.ndarray = field(repr=False)

    @property
    def stable(self) -> bool:
        return self.outcome == "geodesic" and self.index >= 0


class _Tube:
    """Smooth parametrization ``X(u, alpha)`` of an ``n = 1`` tube in ``R^3``.

    Hook meshes are reparametrized by ``sigma = sigma_tot (1 - cos(pi u))/2``
    with ``sigma`` the spine arclength, which is smooth across the parameter
    joins of the spine and through the cap tips.  Other meshes use their own
    chart coordinate.
    """

    def __init__(self, mesh, table: int = 20001):
        from .hookgen import radius_eval, spine_arclength, spine_eval

        if mesh.n != 1:
            raise ValidationError("geodesic audit needs an n = 1 mesh")
        if mesh.spec is not None:
            spec = mesh.spec
            s_fine = np.linspace(0.0, 4.0, 200001)
            sig_fine = spine_arclength(spec.L, s_fine)["sigma"]
            u = np.linspace(0.0, 1.0, table)
            sig = sig_fine[-1] * (1 - np.cos(np.pi * u)) / 2
            s = np.clip(np.interp(sig, sig_fine, s_fine), 0.0, 4.0)
            sp = spine_eval(spec.L, s)
            scale = mesh.chart.scale
            point, normal = scale * sp["point"], sp["normal"]
            radius = scale * spec.d0 * radius_eval(spec, s)[0]
            self.lo, self.hi = 0.0, 1.0
        else:
            z = mesh.chart.zeta
            lo, hi = (0.0, 1.0) if mesh.metadata.get("grid") == "sphere" else (float(z[0]), float(z[-1]))
            u = np.linspace(lo, hi, table)
            d = mesh.chart(u)
            s, point, normal, radius = d["s"], d["point"], d["normal"], d["radius"]
            self.lo, self.hi = lo, hi
        self._s = CubicSpline(u, s)
        self._sp = [CubicSpline(u, c) for c in (point[:, 0], point[:, 1], normal[:, 0], normal[:, 1], radius)]
        self.r_max = float(np.max(np.abs(radius)))

    def eval(self, u, al, order: int = 1):
        """Positions and parameter derivatives up to ``order`` (1 or 2)."""
        px, py, nx, ny, r = ([f(u, k) for k in range(order + 1)] for f in self._sp)
        ca, sa = np.cos(al), np.sin(al)

        def X(k):
            # k-th u-derivative of the position with alpha fixed
            out = [px[k] + sum(math.comb(k, j) * r[j] * nx[k - j] for j in range(k + 1)) * ca,
                   py[k] + sum(math.comb(k, j) * r[j] * ny[k - j] for j in range(k + 1)) * ca,
                   r[k] * sa]
            return np.stack(out, axis=-1)

        res = {"X": X(0), "Xu": X(1)}
        res["Xa"] = np.stack([-r[0] * nx[0] * sa, -r[0] * ny[0] * sa, r[0] * ca], axis=-1)
        if order >= 2:
            res["Xuu"] = X(2)
            res["Xua"] = np.stack([-(r[1] * nx[0] + r[0] * nx[1]) * sa, -(r[1] * ny[0] + r[0] * ny[1]) * sa,
                                   r[1] * ca], axis=-1)
            res["Xaa"] = np.stack([-r[0] * nx[0] * ca, -r[0] * ny[0] * ca, -r[0] * sa], axis=-1)
        return res

    def gauss_curvature(self, u, al):
        d = self.eval(u, al, order=2)
        nrm = np.cross(d["Xu"], d["Xa"])
        nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
        E = np.sum(d["Xu"] ** 2, -1)
        F = np.sum(d["Xu"] * d["Xa"], -1)
        G = np.sum(d["Xa"] ** 2, -1)
        L2 = np.sum(d["Xuu"] * nrm, -1)
        M2 = np.sum(d["Xua"] * nrm, -1)
        N2 = np.sum(d["Xaa"] * nrm, -1)
        return (L2 * N2 - M2**2) / (E * G - F**2)

    def s_of(self, u):
        return self._s(u)


def _curve_energy(tube: _Tube, m: int):
    def fun(v):
        u, al = v[:m], v[m:]
        d = tube.eval(u, al)
        X = d["X"]
        e = np.roll(X, -1, axis=0) - X
        energy = m * np.sum(e**2)
        gX = 2 * m * (e[np.arange(m) - 1] - e)
        return energy, np.concatenate([np.sum(gX * d["Xu"], -1), np.sum(gX * d["Xa"], -1)])
    return fun


def _geodesic_residual(tube: _Tube, u, al) -> tuple[float, float]:
    """``max |kappa_g| * length`` of the closed polygon, and its length.

    ``kappa_g`` is the discrete curvature vector projected on the conormal
    (surface normal cross curve tangent), so uneven vertex spacing along the
    curve does not count.
    """
    d = tube.eval(u, al)
    X = d["X"]
    fwd = np.roll(X, -1, axis=0) - X
    h = np.linalg.norm(fwd, axis=-1)
    length = float(h.sum())
    back = X - np.roll(X, 1, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        nrm = np.cross(d["Xu"], d["Xa"])
        nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
        tan = fwd + back
        tan /= np.linalg.norm(tan, axis=-1, keepdims=True)
        conormal = np.cross(nrm, tan)
        hb = np.roll(h, 1)
        # curvature vector of the circle through three consecutive vertices (non-uniform spacing)
        kvec = 2 * (fwd / h[:, None] - back / hb[:, None]) / (h + hb)[:, None]
        kg = np.abs(np.sum(kvec * conormal, -1))
    return float(np.max(kg) * length), length


def _stability_index(tube: _Tube, u, al, modes: int) -> float:
    d = tube.eval(u, al)
    X = d["X"]
    h = np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=-1)
    length = h.sum()
    t = np.concatenate([[0.0], np.cumsum(h)[:-1]])
    w = 0.5 * (h + np.roll(h, 1))
    K = tube.gauss_curvature(u, al)
    k = np.arange(1, modes + 1)
    ang = 2 * np.pi * np.outer(k, t) / length
    basis = np.vstack([np.ones_like(t), np.cos(ang), np.sin(ang)])
    dbasis = np.vstack([np.zeros_like(t), -(2 * np.pi * k / length)[:, None] * np.sin(ang),
                        (2 * np.pi * k / length)[:, None] * np.cos(ang)])
    Q = (dbasis * w) @ dbasis.T - (basis * (w * K)) @ basis.T
    Mm = (basis * w) @ basis.T
    return float(eigh(Q, Mm, eigvals_only=True)[0])


def _newton_polish(fun, v, span: float, iters: int = 8):
    """Pseudo-inverse Newton steps on the energy gradient, with a step cap."""
    n = v.size
    m = n // 2
    cap = np.concatenate([np.full(m, 1e-2 * span), np.full(m, 0.1)])
    g = fun(v)[1]
    for _ in range(iters):
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1e-6
            H[:, i] = (fun(v + e)[1] - fun(v - e)[1]) / 2e-6
        w, Q = np.linalg.eigh(0.5 * (H + H.T))
        keep = np.abs(w) > 1e-8 * np.abs(w).max()
        step = -Q @ np.where(keep, (Q.T @ g) / np.where(keep, w, 1.0), 0.0)
        step *= min(1.0, float(np.min(cap / np.maximum(np.abs(step), 1e-300))))
        g_new = fun(v + step)[1]
        if np.linalg.norm(g_new) >= np.linalg.norm(g):
            break
        v, g = v + step, g_new
    return v


def _shorten(tube: _Tube, u0, al0, *, max_iter: int, residual_tol: float, collapse_frac: float,
             modes: int, seed_index: int, rounds: int = 3) -> GeodesicResult:
    from scipy.optimize import minimize

    m = u0.size
    fun = _curve_energy(tube, m)
    _, len0 = _geodesic_residual(tube, u0, al0)
    span = tube.hi - tube.lo
    state = {"collapsed": False}

    def cb(intermediate_result):
        v = intermediate_result.x
        _, ln = _geodesic_residual(tube, v[:m], v[m:])
        if ln < collapse_frac * len0:
            state["collapsed"] = True
            raise StopIteration

    bounds = [(tube.lo, tube.hi)] * m + [(None, None)] * m
    v = np.concatenate([u0, al0])
    for _ in range(rounds):
        res = minimize(fun, v, jac=True, method="L-BFGS-B", bounds=bounds, callback=cb,
                       options={"maxiter": max_iter, "gtol": 1e-14, "ftol": 0.0, "maxcor": 30})
        v = res.x
        u = v[:m]
        if state["collapsed"] or np.any(u <= tube.lo + 1e-9 * span) or np.any(u >= tube.hi - 1e-9 * span):
            break
        v = _newton_polish(fun, v, span)
        v[:m] = np.clip(v[:m], tube.lo, tube.hi)
        if _geodesic_residual(tube, v[:m], v[m:])[0] <= residual_tol:
            break
    u, al = v[:m], v[m:]
    resid, length = _geodesic_residual(tube, u, al)
    edge = np.any(u <= tube.lo + 1e-9 * span) or np.any(u >= tube.hi - 1e-9 * span)
    index = math.nan
    if state["collapsed"] or length < collapse_frac * len0:
        outcome = "collapsed"
    elif edge:
        outcome = "escaped"
    elif resid <= residual_tol:
        outcome = "geodesic"
        index = _stability_index(tube, u, al, modes)
    else:
        outcome = "unconverged"
    u_mean = float(np.mean(u))
    return GeodesicResult(seed_index=seed_index, outcome=outcome, length=length, residual=resid, index=index,
                          u_mean=u_mean, s_mean=float(tube.s_of(u_mean)), curve=tube.eval(u, al)["X"])


def geodesic_audit(mesh, *, seeds: int = 200, seed: int = 0, points: int = 64, perturbation: float = 0.02,
                   u_range: tuple[float, float] | None = None, max_iter: int = 20000,
                   residual_tol: float = 1e-9, collapse_frac: float = 0.02, modes: int = 8) -> list[GeodesicResult]:
    """Seeded Birkhoff-style shortening of closed curves on an ``n = 1`` tube.

    Seeds are fiber circles at evenly spaced parameters in ``u_range``
    (default: the middle 90% of the domain); every odd-numbered seed gets a
    random low-mode wobble of relative amplitude ``perturbation`` in the tube
    parameter.  Each curve is an equidistant polygon shortened by minimizing
    its discrete energy with L-BFGS-B.  A curve counts as a geodesic when its
    scaled geodesic curvature ``max kappa_g * length`` is below
    ``residual_tol``; no stable geodesic found is the intended outcome on a
    thin hook, not a proof.  Results are ordered by seed index and depend
    only on ``seed``.
    """
    if seeds < 1 or points < 8:
        raise ValidationError("geodesic audit needs seeds >= 1 and points >= 8")
    tube = _Tube(mesh)
    span = tube.hi - tube.lo
    a, b = u_range if u_range is not None else (tube.lo + 0.05 * span, tube.hi - 0.05 * span)
    if not tube.lo <= a < b <= tube.hi:
        raise ValidationError("u_range must lie inside the tube parameter domain")
    rng = np.random.default_rng(seed)
    n_base = (seeds + 1) // 2
    centers = np.linspace(a, b, n_base)
    al0 = 2 * np.pi * np.arange(points) / points
    out = []
    for k in range(seeds):
        c = centers[k // 2]
        u0 = np.full(points, c)
        if k % 2:
            coef = rng.normal(size=(3, 2))
            wob = sum(coef[j, 0] * np.cos((j + 1) * al0) + coef[j, 1] * np.sin((j + 1) * al0) for j in range(3))
            u0 = np.clip(c + perturbation * span * wob / 3, tube.lo, tube.hi)
        out.append(_shorten(tube, u0, al0.copy(), max_iter=max_iter, residual_tol=residual_tol,
                            collapse_frac=collapse_frac, modes=modes, seed_index=k))
    return out
