"""Classification of singular events and detection of neck regions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvature import profile_curvature, profile_derivatives, twisted_curvature
from .hookgen import ProfileMetric, ValidationError
from .ricci import Trajectory, local_extrema

__all__ = [
    "SingularityReport",
    "NeckRegion",
    "classify",
    "q_series",
    "detect_necks",
    "thin_tube_predicate",
    "bulb_centers",
]

_EVENT_REASONS = ("rm_stop", "pinch_floor", "pinch", "area_stop")


@dataclass(frozen=True)
class NeckRegion:
    """Maximal run of nodes that is ``eps``-close to a round cylinder after rescaling."""

    lo: int
    hi: int
    s_lo: float
    s_hi: float
    center: float
    psi_center: float

    @property
    def length(self) -> float:
        return self.s_hi - self.s_lo

    def contains(self, s: float) -> bool:
        return self.s_lo <= s <= self.s_hi


@dataclass(frozen=True)
class SingularityReport:
    T_hat: float
    trivial: bool
    verdict: str
    q_times: np.ndarray
    q: np.ndarray
    q_sup: float
    q_log_slope: float
    rm_fraction: float
    necks: tuple
    q_bound: float
    trend_tol: float

    def as_text(self) -> str:
        lines = [
            f"T_hat = {self.T_hat:.17g}",
            f"trivial = {self.trivial}",
            f"verdict = {self.verdict}",
            f"q_sup = {self.q_sup:.17g}",
            f"q_log_slope = {self.q_log_slope:.17g}",
            f"min_over_max_rm = {self.rm_fraction:.17g}",
            f"q_bound = {self.q_bound:.17g}",
            f"trend_tol = {self.trend_tol:.17g}",
            f"necks = {len(self.necks)}",
        ]
        for k, nk in enumerate(self.necks):
            lines.append(f"neck{k} = s[{nk.s_lo:.17g}, {nk.s_hi:.17g}] center {nk.center:.17g} "
                         f"psi {nk.psi_center:.17g}")
        return "\n".join(lines)


def q_series(times, max_rm, T_hat: float):
    """``q = max|Rm| (T_hat - t)`` on the final decade ``max|Rm| >= final/10``."""
    t = np.asarray(times, dtype=float)
    rm = np.asarray(max_rm, dtype=float)
    sel = (rm >= rm[-1] / 10) & (t < T_hat)
    return t[sel], rm[sel] * (T_hat - t[sel])


def _final_rm(traj: Trajectory):
    last = traj.final
    if traj.kind == "profile":
        return profile_curvature(last).rm_norm
    return twisted_curvature(last).rm_norm


def classify(traj: Trajectory, *, q_bound: float = 10.0, trend_tol: float = 0.1,
             trivial_fraction: float = 0.01, epsilon: float = 0.1) -> SingularityReport:
    """Trivial/non-trivial and Type I/II verdicts from a trajectory.

    The q log-slope is ``d log q / d log(1/(T_hat - t))`` over the final
    decade, so a positive value means ``q`` grows toward the singular time.
    Type I needs ``sup q <= q_bound`` and ``|slope| <= trend_tol``; Type II
    needs ``sup q > q_bound`` and ``slope > trend_tol``.  Anything else, or a
    run without a usable blow-up fit, is Inconclusive.
    """
    if traj.reason not in _EVENT_REASONS:
        raise ValidationError(f"trajectory did not reach a singular event (ended by {traj.reason})")
    rm = _final_rm(traj)
    frac = float(np.min(rm) / np.max(rm))
    trivial = frac >= trivial_fraction
    necks = tuple(detect_necks(traj.final, epsilon)) if traj.kind == "profile" else ()
    T = traj.T_hat
    empty = np.array([])
    if not math.isfinite(T):
        return SingularityReport(T, trivial, "Inconclusive", empty, empty, math.nan, math.nan, frac, necks,
                                 q_bound, trend_tol)
    qt, q = q_series(traj.times, traj.channels["max_rm"], T)
    if q.size < 3 or np.any(q <= 0):
        return SingularityReport(T, trivial, "Inconclusive", qt, q, math.nan, math.nan, frac, necks,
                                 q_bound, trend_tol)
    slope = float(np.polyfit(-np.log(T - qt), np.log(q), 1)[0])
    sup = float(q.max())
    if sup <= q_bound and abs(slope) <= trend_tol:
        verdict = "TypeI"
    elif sup > q_bound and slope > trend_tol:
        verdict = "TypeII"
    else:
        verdict = "Inconclusive"
    return SingularityReport(T, trivial, verdict, qt, q, sup, slope, frac, necks, q_bound, trend_tol)


def detect_necks(m: ProfileMetric, epsilon: float = 0.1) -> list[NeckRegion]:
    """Maximal node runs with ``|psi_s| <= eps`` and ``|psi psi_ss| <= eps``.

    A run is kept when its arclength is at least ``2 psi / eps`` with ``psi``
    the smallest radius in the run.  Both tests are scale invariant.  The
    backward-in-time part of a strong neck is not checked.
    """
    if not 0 < epsilon <= 0.2:
        raise ValidationError("epsilon must lie in (0, 0.2]")
    d = profile_derivatives(m)
    s, psi = d["s"], m.psi
    ok = (np.abs(d["psi_s"]) <= epsilon) & (np.abs(psi * d["psi_ss"]) <= epsilon) & (psi > 0)
    if m.topology == "TwoCaps":
        ok[0] = ok[-1] = False
    n = psi.size
    if m.periodic and ok.all():
        i = int(np.argmin(psi))
        return [NeckRegion(0, n - 1, float(s[0]), float(s[0] + m.total_length()), float(s[i]), float(psi[i]))]
    runs = []
    i = 0
    while i < n:
        if ok[i]:
            j = i
            while j + 1 < n and ok[j + 1]:
                j += 1
            runs.append([i, j])
            i = j + 1
        else:
            i += 1
    if m.periodic and len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == n - 1:
        # merge the run that wraps around
        first = runs.pop(0)
        runs[-1] = [runs[-1][0], first[1] + n]
    out = []
    period = m.total_length() if m.periodic else 0.0
    for a, b in runs:
        idx = np.arange(a, b + 1) % n
        sa = float(s[a % n])
        sb = float(s[b % n] + (period if b >= n else 0.0))
        k = idx[int(np.argmin(psi[idx]))]
        if sb - sa >= 2 * psi[k] / epsilon:
            out.append(NeckRegion(int(a), int(b), sa, sb, float(s[k]), float(psi[k])))
    return out


def thin_tube_predicate(m: ProfileMetric, x: float, x1: float, x2: float, C_hat: float,
                        epsilon: float = 0.1) -> bool:
    """``R(x) > C_hat (1 + |R(x_i)|)`` for both ``x_i``, with ``x`` in a neck separating them.

    Positions are arclengths.  A snapshot without any neck returns False;
    a point outside every detected neck, or ``x1``, ``x2`` on the same side
    of the neck centre, is a precondition failure.
    """
    if C_hat <= 0:
        raise ValidationError("C_hat must be positive")
    necks = detect_necks(m, epsilon)
    if not necks:
        return False
    hits = [nk for nk in necks if nk.contains(x)]
    if not hits:
        raise ValidationError("x does not lie in a detected neck")
    c = hits[0].center
    if not ((x1 - c) * (x2 - c) < 0):
        raise ValidationError("x1 and x2 are not separated by the neck's central slice")
    f = profile_curvature(m)
    s = f.coords
    r, r1, r2 = np.interp([x, x1, x2], s, f.R)
    return bool(r > C_hat * (1 + abs(r1)) and r > C_hat * (1 + abs(r2)))


def bulb_centers(m: ProfileMetric) -> list[float]:
    """Arclength positions of the interior maxima of ``psi``."""
    s = m.arclength()
    return [float(s[i]) for i in local_extrema(m.psi, "max", m.periodic)]
