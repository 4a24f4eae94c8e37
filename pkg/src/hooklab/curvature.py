"""Curvature of the symmetric metrics and of embedded tube meshes.

Two independent engines are provided: closed warped-product formulas
evaluated with pole-aware finite differences (``profile_curvature``,
``twisted_curvature``) and a finite-difference oracle working from ambient
positions (``embedded_oracle``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .hookgen import EmbeddedMesh, ProfileMetric, TwistedMetric, ValidationError

__all__ = [
    "CurvatureField",
    "SliceFlux",
    "PositivityReport",
    "profile_derivatives",
    "profile_curvature",
    "profile_curvature_from_derivatives",
    "twisted_derivatives",
    "twisted_curvature",
    "embedded_oracle",
    "metric_curvature",
    "slice_flux",
    "positivity_report",
]

SPHERE_AREA = {1: 2 * np.pi, 2: 4 * np.pi}


@dataclass(frozen=True)
class CurvatureField:
    """Per-node curvature channels.

    ``ric_radial`` is Ric of the unit normal to the symmetric slices (the
    ``s`` direction for profiles and tubes, the circle direction for twisted
    metrics); ``ric_fiber`` is the mean of Ric over an orthonormal frame of
    the slice.  ``K_mixed`` is the mean sectional curvature of planes
    containing the slice normal and ``K_fiber`` the sectional curvature of
    the slice plane (NaN when the slice is one-dimensional).  ``rm_norm`` is
    the largest absolute sectional curvature.
    """

    R: np.ndarray
    ric_radial: np.ndarray
    ric_fiber: np.ndarray
    K_mixed: np.ndarray
    K_fiber: np.ndarray
    sec_min: np.ndarray
    sec_max: np.ndarray
    rm_norm: np.ndarray
    coords: np.ndarray
    n: int
    source: str
    points: np.ndarray | None = None
    extras: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def ric_normal(self) -> np.ndarray:
        return self.ric_radial

    def trace_residual(self) -> float:
        """Max relative deviation of ``R`` from the trace of the Ricci channels."""
        tr = self.ric_radial + self.n * self.ric_fiber
        scale = np.maximum(np.abs(self.R), np.max(np.abs(self.R)) * 1e-300 + 1e-300)
        return float(np.max(np.abs(self.R - tr) / scale))


def _sectional_channels(K_mixed, K_fiber, n):
    if n == 1:
        return K_mixed, K_mixed, np.abs(K_mixed)
    lo = np.minimum(K_mixed, K_fiber)
    hi = np.maximum(K_mixed, K_fiber)
    return lo, hi, np.maximum(np.abs(lo), np.abs(hi))


# ---------------------------------------------------------------------------
# profile metrics
# ---------------------------------------------------------------------------


def _odd_extend(v, k=2):
    return np.concatenate([-v[k:0:-1], v, -v[-2:-k - 2:-1]])


def _even_extend(v, k=2):
    return np.concatenate([v[k:0:-1], v, v[-2:-k - 2:-1]])


def _conservative_second(f, g, h, periodic=False):
    """``(1/g) d/dx (f_x / g)`` at interior nodes of an extended (or periodic) array."""
    if periodic:
        gp = 0.5 * (g + np.roll(g, -1))
        flux = (np.roll(f, -1) - f) / (h * gp)
        return (flux - np.roll(flux, 1)) / (h * g)
    gp = 0.5 * (g[1:] + g[:-1])
    flux = (f[1:] - f[:-1]) / (h * gp)
    out = np.full_like(f, np.nan)
    out[1:-1] = (flux[1:] - flux[:-1]) / (h * g[1:-1])
    return out


def _pole_extrapolate(values, s_dist):
    """Value at ``s = 0`` of the quadratic in ``s^2`` through three samples."""
    z = np.asarray(s_dist, dtype=float) ** 2
    v = np.asarray(values, dtype=float)
    w = [z[1] * z[2] / ((z[0] - z[1]) * (z[0] - z[2])),
         z[0] * z[2] / ((z[1] - z[0]) * (z[1] - z[2])),
         z[0] * z[1] / ((z[2] - z[0]) * (z[2] - z[1]))]
    return float(w[0] * v[0] + w[1] * v[1] + w[2] * v[2])


def profile_derivatives(m: ProfileMetric) -> dict[str, np.ndarray]:
    """Arclength derivatives of ``psi``.

    TwoCaps profiles use odd ghost nodes across the poles, a fourth-order
    stencil for ``psi_s`` and a conservative second-order stencil for
    ``psi_ss``.  Periodic profiles wrap; FixedEnds use one-sided stencils at
    the two ends.
    """
    h = m.h
    psi, g = m.psi, m.phi_g
    if m.topology == "TwoCaps":
        pe, ge = _odd_extend(psi), _even_extend(g)
        px = (-pe[4:] + 8 * pe[3:-1] - 8 * pe[1:-3] + pe[:-4]) / (12 * h)
        pss = _conservative_second(pe, ge, h)[2:-2]
    elif m.topology == "Periodic":
        px = (np.roll(psi, -1) - np.roll(psi, 1)) / (2 * h)
        pss = _conservative_second(psi, g, h, periodic=True)
    else:
        px = np.gradient(psi, h, edge_order=2)
        pss = _conservative_second(psi, g, h)
        pss[0] = 3 * pss[1] - 3 * pss[2] + pss[3]
        pss[-1] = 3 * pss[-2] - 3 * pss[-3] + pss[-4]
    return {"s": m.arclength(), "psi": psi, "psi_s": px / g, "psi_ss": pss}


def profile_curvature_from_derivatives(psi, psi_s, psi_ss, n: int) -> dict[str, np.ndarray]:
    """Warped-product curvature channels from ``psi`` and its arclength derivatives."""
    psi, psi_s, psi_ss = (np.asarray(a, dtype=float) for a in (psi, psi_s, psi_ss))
    with np.errstate(divide="ignore", invalid="ignore"):
        k_mixed = -psi_ss / psi
        if n == 1:
            k_fiber = np.full_like(psi, np.nan)
            ric_r = k_mixed
            ric_f = k_mixed
            R = 2 * k_mixed
        else:
            k_fiber = (1 - psi_s**2) / psi**2
            ric_r = 2 * k_mixed
            ric_f = k_mixed + k_fiber
            R = 4 * k_mixed + 2 * k_fiber
    return {"R": R, "ric_radial": ric_r, "ric_fiber": ric_f, "K_mixed": k_mixed, "K_fiber": k_fiber}


def profile_curvature(m: ProfileMetric) -> CurvatureField:
    """Closed-form curvature of ``phi_g^2 dx^2 + psi^2 g_{S^n}``."""
    interior = m.psi if m.topology != "TwoCaps" else m.psi[1:-1]
    if np.any(interior <= 0):
        raise ValidationError("fiber radius must be positive away from the poles")
    d = profile_derivatives(m)
    ch = profile_curvature_from_derivatives(d["psi"], d["psi_s"], d["psi_ss"], m.n)
    if m.topology == "TwoCaps":
        s = d["s"]
        for end, idx, dist in ((0, [1, 2, 3], s[[1, 2, 3]] - s[0]), (-1, [-2, -3, -4], s[-1] - s[[-2, -3, -4]])):
            km = _pole_extrapolate(ch["K_mixed"][idx], dist)
            ch["K_mixed"][end] = km
            if m.n == 1:
                ch["ric_radial"][end] = ch["ric_fiber"][end] = km
                ch["R"][end] = 2 * km
            else:
                # smooth pole: the metric is locally isotropic
                ch["K_fiber"][end] = km
                ch["ric_radial"][end] = 2 * km
                ch["ric_fiber"][end] = 2 * km
                ch["R"][end] = 6 * km
    lo, hi, rm = _sectional_channels(ch["K_mixed"], ch["K_fiber"], m.n)
    return CurvatureField(R=ch["R"], ric_radial=ch["ric_radial"], ric_fiber=ch["ric_fiber"],
                          K_mixed=ch["K_mixed"], K_fiber=ch["K_fiber"], sec_min=lo, sec_max=hi,
                          rm_norm=rm, coords=d["s"], n=m.n, source="profile",
                          extras={"psi_s": d["psi_s"], "psi_ss": d["psi_ss"]},
                          metadata={"topology": m.topology, "rm_convention": "max |sectional|"})


# ---------------------------------------------------------------------------
# twisted metrics
# ---------------------------------------------------------------------------


def twisted_derivatives(m: TwistedMetric) -> dict[str, np.ndarray]:
    """Arclength derivatives of ``h`` and ``u`` with pole ghosts (h odd, u and a even)."""
    hx = m.h_x
    he, ue, ae = _odd_extend(m.h), _even_extend(m.u), _even_extend(m.a)
    h_x = (-he[4:] + 8 * he[3:-1] - 8 * he[1:-3] + he[:-4]) / (12 * hx)
    h_ss = _conservative_second(he, ae, hx)[2:-2]
    u_x = (ue[3:-1] - ue[1:-3]) / (2 * hx)
    u_ss = _conservative_second(ue, ae, hx)[2:-2]
    return {"s": m.rho(), "h_s": h_x / m.a, "h_ss": h_ss, "u_s": u_x / m.a, "u_ss": u_ss}


def twisted_curvature(m: TwistedMetric) -> CurvatureField:
    """Curvature of ``k + e^{2u} dtheta^2`` with rotationally symmetric ``k`` and ``u``."""
    d = twisted_derivatives(m)
    h, s = m.h, d["s"]
    u_s, u_ss = d["u_s"], d["u_ss"]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = -d["h_ss"] / h
        drift = d["h_s"] / h * u_s
    for end, idx, dist in ((0, [1, 2, 3], s[[1, 2, 3]] - s[0]), (-1, [-2, -3, -4], s[-1] - s[[-2, -3, -4]])):
        K[end] = _pole_extrapolate(K[idx], dist)
        drift[end] = u_ss[end]
    lap = u_ss + drift
    grad2 = u_s**2
    k_s_theta = -(u_ss + grad2)
    k_phi_theta = -drift
    ric_nu = -(lap + grad2)
    ric_ss = K + k_s_theta
    ric_pp = K + k_phi_theta
    R = 2 * K - 2 * lap - 2 * grad2
    secs = np.stack([K, k_s_theta, k_phi_theta])
    lo, hi = secs.min(axis=0), secs.max(axis=0)
    return CurvatureField(R=R, ric_radial=ric_nu, ric_fiber=0.5 * (ric_ss + ric_pp),
                          K_mixed=0.5 * ric_nu, K_fiber=K, sec_min=lo, sec_max=hi,
                          rm_norm=np.maximum(np.abs(lo), np.abs(hi)), coords=s, n=2, source="twisted",
                          extras={"K_k": K, "laplace_u": lap, "grad_u_sq": grad2,
                                  "ric_ss": ric_ss, "ric_phiphi": ric_pp,
                                  "h_s": d["h_s"], "u_s": u_s, "u_ss": u_ss},
                          metadata={"rm_convention": "max |sectional|"})


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------


def _d1(F, ax):
    return 0.5 * (np.roll(F, -1, axis=ax) - np.roll(F, 1, axis=ax))


def _d2(F, ax):
    return np.roll(F, -1, axis=ax) - 2 * F + np.roll(F, 1, axis=ax)


def _second(F, a, b):
    return _d2(F, a) if a == b else _d1(_d1(F, a), b)


def metric_curvature(g: np.ndarray, axes: list[int]) -> dict[str, np.ndarray]:
    """Riemann data of a metric field ``g[..., d, d]`` sampled on a unit-spaced grid.

    ``axes`` lists the array axis carrying each coordinate.  Derivatives are
    central differences via ``np.roll``, so values within two layers of a
    non-periodic edge are invalid and must be cropped by the caller.
    Returns the lowered Ricci tensor, the inverse metric and ``R``.
    """
    d = g.shape[-1]
    ginv = np.linalg.inv(g)
    dg = np.stack([_d1(g, ax) for ax in axes], axis=-3)  # [..., c, a, b] = d_c g_ab
    ddg = np.empty(g.shape[:-2] + (d, d, d, d))
    for i, a in enumerate(axes):
        for j, b in enumerate(axes):
            if j < i:
                ddg[..., i, j, :, :] = ddg[..., j, i, :, :]
            else:
                ddg[..., i, j, :, :] = _second(g, a, b)
    # Christoffel symbols of the first kind: Gam[..., d, b, c] = 1/2 (g_db,c + g_dc,b - g_bc,d)
    gam1 = 0.5 * (np.einsum("...cdb->...dbc", dg) + np.einsum("...bdc->...dbc", dg) - dg)
    gam2 = np.einsum("...ad,...dbc->...abc", ginv, gam1)
    # R_abcd = 1/2 (g_ad,bc + g_bc,ad - g_ac,bd - g_bd,ac) + g_ef (G^e_bc G^f_ad - G^e_bd G^f_ac)
    t1 = np.einsum("...bcad->...abcd", ddg)
    t2 = np.einsum("...adbc->...abcd", ddg)
    t3 = np.einsum("...bdac->...abcd", ddg)
    t4 = np.einsum("...acbd->...abcd", ddg)
    quad = np.einsum("...ebc,...ead->...abcd", gam1, gam2) - np.einsum("...ebd,...eac->...abcd", gam1, gam2)
    riem = 0.5 * (t1 + t2 - t3 - t4) + quad
    ric = np.einsum("...ac,...abcd->...bd", ginv, riem)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    R = np.einsum("...ab,...ab->...", ginv, ric)
    return {"ric": ric, "ginv": ginv, "R": R, "riemann": riem}


def _extended_grid(mesh: EmbeddedMesh, ng: int):
    """Positions with ``ng`` ghost layers on every non-periodic axis, plus helper data."""
    zeta = mesh.chart.zeta
    dz = float(zeta[1] - zeta[0])
    z_ext = zeta[0] + dz * np.arange(-ng, zeta.size + ng)
    if mesh.n == 1:
        fib = dict(mesh.fiber)
        periodic_axes = [1]
    else:
        th = mesh.fiber["theta"]
        dth = float(th[1] - th[0])
        fib = {"theta": th[0] + dth * np.arange(-ng, th.size + ng), "phi": mesh.fiber["phi"]}
        periodic_axes = [2]
    X = mesh.evaluate(z_ext, fib)
    # stored samples are authoritative for the physical nodes
    core = (slice(ng, -ng),) + ((slice(None),) if mesh.n == 1 else (slice(ng, -ng), slice(None)))
    drift = np.max(np.abs(X[core] - mesh.positions))
    if drift > 1e-9 * max(1.0, float(np.max(np.abs(mesh.positions)))):
        raise ValidationError("mesh positions are inconsistent with its chart")
    X[core] = mesh.positions
    chart = mesh.chart(z_ext)
    center = np.zeros((z_ext.size, mesh.n + 2))
    center[:, :2] = chart["point"]
    return X, core, center, z_ext, periodic_axes


def _gauss_route(mesh: EmbeddedMesh):
    ng = 2
    X, core, center, z_ext, _ = _extended_grid(mesh, ng)
    n = mesh.n
    d = n + 1
    axes = list(range(d))
    Xa = [_d1(X, ax) for ax in axes]
    g = np.empty(X.shape[:-1] + (d, d))
    for a in range(d):
        for b in range(a, d):
            g[..., a, b] = g[..., b, a] = np.einsum("...i,...i->...", Xa[a], Xa[b])
    gc = g[core]
    det = np.linalg.det(gc)
    scale = np.max(np.abs(gc), axis=(-1, -2)) ** d
    if np.any(det <= 1e-12 * scale):
        raise ValidationError("degenerate induced metric: tube is not embedded at this resolution")
    tang = np.stack(Xa, axis=-1)[core]  # [..., m, d]
    q, _ = np.linalg.qr(tang, mode="complete")
    nu = q[..., :, -1]
    shape = (z_ext.size,) + (1,) * (X.ndim - 2) + (n + 2,)
    outward = np.einsum("...i,...i->...", (X - center.reshape(shape))[core], nu)
    nu = nu * np.where(outward < 0, -1.0, 1.0)[..., None]
    II = np.empty_like(gc)
    for a in range(d):
        for b in range(a, d):
            II[..., a, b] = II[..., b, a] = np.einsum("...i,...i->...", _second(X, a, b)[core], nu)
    ginv = np.linalg.inv(gc)
    shape_op = ginv @ II
    H = np.trace(shape_op, axis1=-2, axis2=-1)
    R = H**2 - np.einsum("...ab,...ba->...", shape_op, shape_op)
    ric = H[..., None, None] * II - II @ ginv @ II
    cinv = np.linalg.inv(np.linalg.cholesky(gc))
    kap = np.linalg.eigvalsh(cinv @ II @ np.swapaxes(cinv, -1, -2))
    secs = np.stack([kap[..., i] * kap[..., j] for i in range(d) for j in range(i + 1, d)], axis=-1)
    return {"g": gc, "ginv": ginv, "ric": ric, "R": R, "secs": secs,
            "extras": {"principal": kap, "mean_curvature": H}}


def _intrinsic_channels(g, axes, tau, center_index):
    """Augment ``g`` by the stretch term and return curvature data at ``center_index``."""
    gi00 = np.linalg.inv(g)[..., 0, 0]
    g = g.copy()
    g[..., 0, 0] += tau / gi00
    out = metric_curvature(g, axes)
    gc = g[center_index]
    ric = out["ric"][center_index]
    R = out["R"][center_index]
    ginv = out["ginv"][center_index]
    cinv = np.linalg.inv(np.linalg.cholesky(gc))
    rho = np.linalg.eigvalsh(cinv @ ric @ np.swapaxes(cinv, -1, -2))
    secs = (0.5 * R)[..., None] if g.shape[-1] == 2 else 0.5 * R[..., None] - rho
    return {"g": gc, "ginv": ginv, "ric": ric, "R": R, "secs": secs}


def _metric_from_positions(X, axes):
    Xa = [_d1(X, ax) for ax in axes]
    d = len(axes)
    g = np.empty(X.shape[:-1] + (d, d))
    for a in range(d):
        for b in range(a, d):
            g[..., a, b] = g[..., b, a] = np.einsum("...i,...i->...", Xa[a], Xa[b])
    return g


def _intrinsic_rows(mesh: EmbeddedMesh, rows: np.ndarray) -> dict:
    """Intrinsic curvature on the given spine rows.

    For ``n = 2`` every node is evaluated in its own rotated fiber chart in
    which it sits on the equator, which keeps the metric derivatives away
    from the coordinate poles of the latitude-longitude grid.
    """
    zeta = mesh.chart.zeta
    dz = float(zeta[1] - zeta[0])
    off = np.arange(-2, 3)
    results = []
    if mesh.n == 1:
        al = mesh.fiber["alpha"]
        for i in rows:
            zr = zeta[i] + dz * off
            X = mesh.evaluate(zr, {"alpha": al})
            tau = mesh.twist_at(zr)[:, None]
            results.append(_intrinsic_channels(_metric_from_positions(X, [0, 1]), [0, 1], tau, (2,)))
    else:
        th, ph = mesh.fiber["theta"], mesh.fiber["phi"]
        dth, dph = float(th[1] - th[0]), float(ph[1] - ph[0])
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        c1 = np.stack([-np.sin(TH), np.cos(TH) * np.cos(PH), np.cos(TH) * np.sin(PH)], axis=-1)
        c2 = np.stack([np.cos(TH), np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH)], axis=-1)
        c3 = np.stack([np.zeros_like(TH), -np.sin(PH), np.cos(PH)], axis=-1)
        tl = np.pi / 2 + dth * off
        pl = dph * off
        wl = np.stack(np.broadcast_arrays(np.cos(tl)[:, None], np.sin(tl)[:, None] * np.cos(pl)[None, :],
                                          np.sin(tl)[:, None] * np.sin(pl)[None, :]), axis=-1)  # (5, 5, 3)
        W = (c1[:, :, None, None, :] * wl[..., 0:1] + c2[:, :, None, None, :] * wl[..., 1:2]
             + c3[:, :, None, None, :] * wl[..., 2:3]).reshape(-1, 5, 5, 3)
        for i in rows:
            zr = zeta[i] + dz * off
            ch = mesh.chart(zr)
            nrm, pt, rad = ch["normal"], ch["point"], ch["radius"]
            X = np.empty((5,) + W.shape[:-1] + (4,))
            X[..., 0] = pt[:, 0, None, None, None] + rad[:, None, None, None] * W[None, ..., 0] * nrm[:, 0, None, None, None]
            X[..., 1] = pt[:, 1, None, None, None] + rad[:, None, None, None] * W[None, ..., 0] * nrm[:, 1, None, None, None]
            X[..., 2] = rad[:, None, None, None] * W[None, ..., 1]
            X[..., 3] = rad[:, None, None, None] * W[None, ..., 2]
            tau = mesh.twist_at(zr)[:, None, None, None]
            res = _intrinsic_channels(_metric_from_positions(X, [0, 2, 3]), [0, 2, 3], tau, (2, slice(None), 2, 2))
            fib_shape = (th.size, ph.size)
            results.append({k: v.reshape(fib_shape + v.shape[1:]) for k, v in res.items()})
    return {k: np.stack([r[k] for r in results]) for k in results[0]}


def embedded_oracle(mesh: EmbeddedMesh, method: str = "auto") -> CurvatureField:
    """Curvature of a tube mesh from finite differences of its ambient positions.

    ``method="gauss"`` uses the second fundamental form and the Gauss
    equation on the Euclidean induced metric.  ``method="intrinsic"``
    assembles Christoffel symbols of the induced metric augmented by the
    stretch term; it is accurate away from the two cap tips.  ``"auto"``
    uses the Gauss route and switches to the intrinsic route on the rows
    whose stencil meets the twist support.  Accuracy heuristic: at least
    64 spine nodes per unit arclength and 12 latitude cells.
    """
    if method not in ("auto", "gauss", "intrinsic"):
        raise ValidationError(f"unknown oracle method {method!r}")
    twisted = bool(np.any(mesh.twist > 0))
    if method == "gauss" and twisted:
        raise ValidationError("the Gauss route cannot represent a twisted metric")
    n = mesh.n
    base = _gauss_route(mesh)
    used = "gauss"
    rows = np.array([], dtype=int)
    if method == "intrinsic":
        rows = np.arange(mesh.s.size)
    elif method == "auto" and twisted:
        tw = np.convolve((mesh.twist > 0).astype(float), np.ones(5), mode="same") > 0
        rows = np.flatnonzero(tw)
    if rows.size:
        intr = _intrinsic_rows(mesh, rows)
        for key in ("ginv", "ric", "R", "secs"):
            base[key] = base[key].copy()
            base[key][rows] = intr[key]
        base["extras"] = {}
        used = "intrinsic" if rows.size == mesh.s.size else "mixed"
    ginv, ric, R, secs = base["ginv"], base["ric"], base["R"], base["secs"]
    g00 = ginv[..., 0, 0]
    e = ginv[..., :, 0] / np.sqrt(g00)[..., None]
    ric_r = np.einsum("...a,...ab,...b->...", e, ric, e)
    tr = np.einsum("...ab,...ab->...", ginv, ric)
    ric_f = (tr - ric_r) / n
    k_fiber = 0.5 * R - ric_r if n == 2 else np.full_like(R, np.nan)
    lo, hi = secs.min(axis=-1), secs.max(axis=-1)
    coords = np.broadcast_to(mesh.s.reshape((-1,) + (1,) * (R.ndim - 1)), R.shape).copy()
    extras = dict(base["extras"], metric=base["g"], twist=mesh.twist, intrinsic_rows=rows)
    return CurvatureField(R=R, ric_radial=ric_r, ric_fiber=ric_f, K_mixed=ric_r / n, K_fiber=k_fiber,
                          sec_min=lo, sec_max=hi, rm_norm=np.maximum(np.abs(lo), np.abs(hi)),
                          coords=coords, n=n, source=f"embedded-{used}", points=mesh.positions,
                          extras=extras, metadata={"rm_convention": "max |sectional|", "method": used})


# ---------------------------------------------------------------------------
# slice flux and positivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceFlux:
    """``int_{Z^a} (R - Ric(nu, nu))`` with a quadrature error estimate."""

    a: float
    value: float
    error: float
    area: float


def _mesh_slice_flux(field: CurvatureField, mesh: EmbeddedMesh, a: float) -> SliceFlux:
    if mesh.spec is not None:
        L = mesh.spec.L
        if a < 1.0 / L or a > 4.0 - 1.0 / L:
            raise ValidationError(f"slice a = {a} meets a cap region; the slice normal is undefined there")
    hit = np.flatnonzero(np.abs(mesh.s - a) <= 1e-9 * max(1.0, abs(a)))
    if hit.size == 0:
        raise ValidationError(f"slice a = {a} is not a row of the mesh")
    i = int(hit[0])
    f = (field.R - field.ric_radial)[i]
    gfib = field.extras["metric"][i][..., 1:, 1:]
    dens = np.sqrt(np.linalg.det(gfib))  # area per unit index cell
    if mesh.n == 1:
        vals = f * dens
        fine = float(np.sum(vals))
        coarse = float(2 * np.sum(vals[::2]))
        return SliceFlux(a, fine, abs(fine - coarse) / 3, float(np.sum(dens)))
    th = mesh.fiber["theta"]
    dth = float(th[1] - th[0])
    # exact sphere measure per latitude cell, applied to the smooth density dens / sin(theta)
    w_exact = 2 * np.sin(th) * np.sin(dth / 2) / dth
    smooth = dens / np.sin(th)[:, None]
    fine = float(np.sum(f * smooth * w_exact[:, None]))
    area = float(np.sum(smooth * w_exact[:, None]))
    coarse_terms = (f * smooth)[:, ::2] * 2
    nt = th.size
    if nt % 2 == 0:
        merged = 0.5 * (coarse_terms[0::2] + coarse_terms[1::2])
        thc = 0.5 * (th[0::2] + th[1::2])
        wc = 2 * np.sin(thc) * np.sin(dth) / dth
        coarse = float(np.sum(merged * wc[:, None]))
    else:
        coarse = float(np.sum(coarse_terms * w_exact[:, None]))
    return SliceFlux(a, fine, abs(fine - coarse) / 3, area)


def slice_flux(field: CurvatureField, geometry, a: float = 0.0) -> SliceFlux:
    """Integrate ``R - Ric(nu, nu)`` over the slice labelled ``a``.

    ``geometry`` is the ``EmbeddedMesh`` (``a`` is a spine parameter that
    must be a mesh row), a ``ProfileMetric`` (``a`` is the coordinate ``x``)
    or a ``TwistedMetric`` (all circle slices agree; ``a`` is ignored).
    """
    if isinstance(geometry, EmbeddedMesh):
        return _mesh_slice_flux(field, geometry, float(a))
    if isinstance(geometry, TwistedMetric):
        f = (field.R - field.ric_radial) * 2 * np.pi * geometry.h * geometry.a
        x = geometry.x
        fine = float(trapezoid(f, x))
        coarse = float(np.sum(0.5 * (f[2::2] + f[:-2:2]) * np.diff(x[::2]))) if x.size % 2 else fine
        return SliceFlux(float(a), fine, abs(fine - coarse) / 3, geometry.slice_area())
    if isinstance(geometry, ProfileMetric):
        x = geometry.x
        if not x[0] <= a <= x[-1]:
            raise ValidationError("slice label outside the profile grid")
        if geometry.topology == "TwoCaps" and (a <= x[0] or a >= x[-1]):
            raise ValidationError("slice at a pole is degenerate")
        f = field.R - field.ric_radial
        val = float(np.interp(a, x, f))
        psi = float(np.interp(a, x, geometry.psi))
        area = SPHERE_AREA[geometry.n] * psi**geometry.n
        near = int(np.argmin(np.abs(x - a)))
        err = abs(val - f[near]) * area if abs(x[near] - a) > 1e-12 else 0.0
        return SliceFlux(float(a), val * area, err, area)
    raise ValidationError(f"unsupported geometry type {type(geometry).__name__}")


@dataclass(frozen=True)
class PositivityReport:
    min_R: float
    argmin_R: tuple
    min_sectional: float
    argmin_sectional: tuple
    count: int
    where_R: np.ndarray | None = None
    where_sectional: np.ndarray | None = None


def positivity_report(field: CurvatureField, region: Callable | np.ndarray | None = None) -> PositivityReport:
    """Minima of ``R`` and of the sectional curvature over a region.

    ``region`` is a boolean mask, a predicate ``(points, coords) -> mask``
    or ``None`` for every node.
    """
    if region is None:
        mask = np.ones(field.R.shape, dtype=bool)
    elif callable(region):
        mask = np.asarray(region(field.points, field.coords), dtype=bool)
    else:
        mask = np.asarray(region, dtype=bool)
    mask = np.broadcast_to(mask, field.R.shape)
    if not np.any(mask):
        raise ValidationError("positivity region is empty")
    R = np.where(mask, field.R, np.inf)
    S = np.where(mask, field.sec_min, np.inf)
    iR = np.unravel_index(int(np.argmin(R)), R.shape)
    iS = np.unravel_index(int(np.argmin(S)), S.shape)
    pR = field.points[iR] if field.points is not None else None
    pS = field.points[iS] if field.points is not None else None
    return PositivityReport(float(R[iR]), tuple(int(v) for v in iR), float(S[iS]), tuple(int(v) for v in iS),
                            int(np.count_nonzero(mask)), pR, pS)
