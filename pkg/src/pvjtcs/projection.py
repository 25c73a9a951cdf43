"""Euclidean projections onto the slot feasible set.

The slot game is played on ``{x in [0,1]^I : sum(m_i * x_i) = S}`` where
``S = sum(m_i) - E_plus/r`` converts the slot's charging demand into vehicle
units: every member not transporting charges exactly ``r`` kwh, so pinning
the charged energy pins the weighted strategy sum.  The demand floor
``sum(m_i * x_i) >= d_t`` is folded into a preflight bound on ``E_plus``
(``clamp_demand``) so the projection itself only ever sees box-and-hyperplane
geometry.  The equilibrium solver additionally projects onto the intersection
with a separating halfspace; that composite is computed through the halfspace
multiplier (outer bisection plus exact solve on the final clipping pattern).

The single-set projection is solved through its scalar dual: the projection
is ``clip(point + lam*m, 0, 1)`` and the weighted sum of that expression is
a nondecreasing piecewise-linear function of ``lam``, so the exact multiplier
falls out of a breakpoint scan.  The cores are deliberately plain Python:
the solver calls them tens of thousands of times on vectors of a handful of
entries, where array-library call overhead dominates the arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InfeasibleSetError(ValueError):
    """The slot's feasible polyhedron is empty."""


class ProjectionConvergenceError(RuntimeError):
    """A projection subproblem failed to settle; numerical trouble."""


@dataclass
class FeasibleSet:
    """Box-and-hyperplane feasible set of one slot.

    ``m`` holds the group sizes (hyperplane weights), ``d_total`` the slot's
    total transportation demand, ``e_plus`` the charging demand in kwh and
    ``r`` the per-slot charged energy of one vehicle.
    """

    m: Sequence[float]
    d_total: float
    e_plus: float
    r: float

    def __post_init__(self) -> None:
        self.m = np.asarray(self.m, dtype=float)
        if self.r <= 0.0:
            raise ValueError(f"per-slot charge r must be positive, got {self.r}")
        if np.any(self.m < 0.0):
            raise ValueError("group sizes must be nonnegative")

    @property
    def m_total(self) -> float:
        return float(np.sum(self.m))

    @property
    def S(self) -> float:
        """Hyperplane right-hand side in vehicle units."""
        return self.m_total - self.e_plus / self.r

    def is_feasible(self) -> bool:
        s = self.S
        return 0.0 <= s <= self.m_total and self.d_total <= s + 1e-12

    def check_feasible(self) -> None:
        if not self.is_feasible():
            raise InfeasibleSetError(
                f"empty feasible set: S={self.S:.6g} must lie in "
                f"[max(0, d_total={self.d_total:.6g}), sum(m)={self.m_total:.6g}]"
            )


@dataclass
class AdjustmentReport:
    """Outcome of the charging-demand preflight."""

    clamped: bool
    original: float
    adjusted: float

    @property
    def delta(self) -> float:
        return self.adjusted - self.original


@dataclass
class Halfspace:
    """``{z : <normal, z - anchor> <= 0}``."""

    normal: np.ndarray
    anchor: np.ndarray

    def __post_init__(self) -> None:
        self.normal = np.asarray(self.normal, dtype=float)
        self.anchor = np.asarray(self.anchor, dtype=float)
        if self.normal.shape != self.anchor.shape:
            raise ValueError("normal and anchor must have the same shape")

    def violation(self, z: np.ndarray) -> float:
        return float(np.dot(self.normal, np.asarray(z, dtype=float) - self.anchor))

    def contains(self, z: np.ndarray, tol: float = 1e-8) -> bool:
        return self.violation(z) <= tol

    def project(self, z: np.ndarray) -> np.ndarray:
        """Closed-form Euclidean projection onto the halfspace."""
        z = np.asarray(z, dtype=float)
        viol = self.violation(z)
        if viol <= 0.0:
            return z.copy()
        nn = float(np.dot(self.normal, self.normal))
        return z - (viol / nn) * self.normal


def clamp_demand(fset: FeasibleSet) -> tuple[FeasibleSet, AdjustmentReport]:
    """Pull the charging demand into the satisfiable range.

    The most energy one slot can absorb is ``r * (sum(m) - d_total)``: every
    member beyond the transportation demand charges.  Demand below zero or
    above that cap is clamped and reported.  Raises if the transportation
    demand alone exceeds the population.
    """
    m_total = fset.m_total
    if fset.d_total > m_total:
        raise InfeasibleSetError(
            f"transportation demand {fset.d_total:.6g} exceeds group population {m_total:.6g}"
        )
    cap = fset.r * (m_total - fset.d_total)
    adjusted = min(max(fset.e_plus, 0.0), cap)
    report = AdjustmentReport(
        clamped=(adjusted != fset.e_plus), original=fset.e_plus, adjusted=adjusted
    )
    out = FeasibleSet(m=fset.m.copy(), d_total=fset.d_total, e_plus=adjusted, r=fset.r)
    return out, report


def _dual_scan(point: Sequence[float], m: Sequence[float], S: float) -> list[float]:
    """Exact box-hyperplane projection via the scalar dual multiplier.

    ``z_i(lam) = clip(point_i + lam*m_i, 0, 1)`` makes ``g(lam) = sum(m*z)``
    nondecreasing and piecewise linear with breakpoints where coordinates
    enter or leave the box faces; the crossing of ``g`` with ``S`` is located
    by scanning the sorted breakpoints and then solved in closed form on the
    active pattern.
    """
    n = len(point)
    total = 0.0
    for i in range(n):
        total += m[i]
    if S <= 0.0:
        return [0.0] * n
    if S >= total:
        return [1.0] * n

    knots = []
    for i in range(n):
        knots.append(-point[i] / m[i])          # coordinate leaves the 0 face
        knots.append((1.0 - point[i]) / m[i])   # coordinate reaches the 1 face
    knots.sort()

    lam = knots[0]
    g_prev = 0.0  # g at the first knot: everything still clipped to 0
    for k in range(1, 2 * n):
        lam_next = knots[k]
        if lam_next == lam:
            continue
        # exact g at the segment end
        g_next = 0.0
        for i in range(n):
            zi = point[i] + lam_next * m[i]
            if zi < 0.0:
                zi = 0.0
            elif zi > 1.0:
                zi = 1.0
            g_next += m[i] * zi
        if g_next >= S:
            break
        lam = lam_next
        g_prev = g_next
    # crossing lies in (lam, lam_next]; interpolate on the linear segment
    lam_mid = 0.5 * (lam + lam_next)
    num = S
    den = 0.0
    for i in range(n):
        zi = point[i] + lam_mid * m[i]
        if zi <= 0.0:
            pass
        elif zi >= 1.0:
            num -= m[i]
        else:
            num -= m[i] * point[i]
            den += m[i] * m[i]
    lam_star = (num / den) if den > 0.0 else lam_next
    out = []
    for i in range(n):
        zi = point[i] + lam_star * m[i]
        if zi < 0.0:
            zi = 0.0
        elif zi > 1.0:
            zi = 1.0
        out.append(zi)
    return out


def project_box_hyperplane(
    point: Sequence[float], m: Sequence[float], S: float
) -> np.ndarray:
    """Project onto ``{z in [0,1]^I : sum(m_i z_i) = S}``.

    Exact: the scalar dual multiplier of the hyperplane is located by a
    breakpoint scan and solved in closed form on the resulting clipping
    pattern.
    """
    point_l = [float(v) for v in point]
    m_l = [float(v) for v in m]
    if len(point_l) != len(m_l):
        raise ValueError("point and weights must have the same length")
    if any(w <= 0.0 for w in m_l):
        raise ValueError("zero-weight groups must be removed before projecting")
    m_total = sum(m_l)
    if not -1e-9 <= S <= m_total + 1e-9:
        raise InfeasibleSetError(f"S={S:.6g} outside [0, sum(m)={m_total:.6g}]")
    return np.array(_dual_scan(point_l, m_l, min(max(S, 0.0), m_total)))


def project_feasible(point: Sequence[float], fset: FeasibleSet) -> np.ndarray:
    """Project onto the slot feasible set."""
    fset.check_feasible()
    return project_box_hyperplane(point, fset.m, fset.S)


def _intersection_core(
    point: list[float],
    m: list[float],
    S: float,
    g: list[float],
    c: float,
    max_rounds: int,
) -> list[float]:
    """Projection onto box-hyperplane-halfspace, all plain floats.

    Outer bisection on the halfspace multiplier ``tau`` (the halfspace
    violation of the tau-shifted single-set projection is nonincreasing in
    ``tau`` by firm nonexpansiveness), with an exact two-multiplier solve
    attempted on every visited clipping pattern.
    """
    n = len(point)
    hscale = 1.0 + abs(c)
    for gi in g:
        hscale += abs(gi)
    m_total = 0.0
    for mi in m:
        m_total += mi

    z0 = _dual_scan(point, m, S)
    h0 = -c
    for i in range(n):
        h0 += g[i] * z0[i]
    if h0 <= 0.0:
        return z0
    # Slope of the violation in tau on z0's clipping pattern: the component
    # of the normal orthogonal to the hyperplane weights.  Drives both the
    # immediate exact solve (a Newton step from tau=0) and the bracket scale.
    mm0 = mg0 = gg0 = 0.0
    for i in range(n):
        if 0.0 < z0[i] < 1.0:
            mm0 += m[i] * m[i]
            mg0 += m[i] * g[i]
            gg0 += g[i] * g[i]
    slope0 = (gg0 - mg0 * mg0 / mm0) if mm0 > 0.0 else 0.0

    def polish(z: list[float]) -> list[float] | None:
        mm = mg = gg = 0.0
        any_free = False
        b1 = S
        b2 = c
        for i in range(n):
            if 0.0 < z[i] < 1.0:
                any_free = True
                mm += m[i] * m[i]
                mg += m[i] * g[i]
                gg += g[i] * g[i]
                b1 -= m[i] * point[i]
                b2 -= g[i] * point[i]
            else:
                b1 -= m[i] * z[i]
                b2 -= g[i] * z[i]
        if not any_free:
            return None
        # Solve for the two multipliers via the Schur complement: the normal
        # is often nearly parallel to the hyperplane weights, which makes
        # the multipliers ill-conditioned but leaves the projected point
        # itself well-behaved; the residual checks below arbitrate.
        g_perp_sq = gg - (mg * mg) / mm
        if g_perp_sq <= 1e-14 * gg:
            return None
        tau = -(b2 - (mg / mm) * b1) / g_perp_sq
        lam = (b1 + tau * mg) / mm
        if tau < -1e-12:
            return None
        if tau < 0.0:
            tau = 0.0
        cand = []
        sm = sg = 0.0
        for i in range(n):
            zi = point[i] + lam * m[i] - tau * g[i]
            if zi < 0.0:
                zi = 0.0
            elif zi > 1.0:
                zi = 1.0
            cand.append(zi)
            sm += m[i] * zi
            sg += g[i] * zi
        if abs(sm - S) > 1e-9 * max(1.0, m_total):
            return None
        if abs(sg - c) > 1e-9 * hscale:
            return None
        return cand

    def shifted_projection(tau: float) -> tuple[list[float], float]:
        pt = [point[i] - tau * g[i] for i in range(n)]
        z = _dual_scan(pt, m, S)
        h = -c
        for i in range(n):
            h += g[i] * z[i]
        return z, h

    exact = polish(z0)
    if exact is not None:
        return exact

    nn = 0.0
    for gi in g:
        nn += gi * gi
    tau_lo, h_lo = 0.0, h0
    tau_hi = h0 / slope0 if slope0 > 0.0 else h0 / nn
    for _ in range(200):
        z_hi, h_hi = shifted_projection(tau_hi)
        if h_hi <= 0.0:
            break
        tau_lo, h_lo = tau_hi, h_hi
        tau_hi *= 2.0
    else:
        raise ProjectionConvergenceError(
            "halfspace appears unreachable from the feasible set"
        )

    # The violation is piecewise linear and nonincreasing in tau; Illinois
    # false position avoids the one-sided stalling of the plain variant, and
    # the pattern solve finishes exactly once a probe lands on the root's
    # clipping pattern.
    z = z_hi
    side = 0
    w_lo, w_hi = h_lo, h_hi
    for _ in range(max_rounds):
        if w_lo - w_hi > 0.0:
            tau = tau_lo + (tau_hi - tau_lo) * w_lo / (w_lo - w_hi)
            width = tau_hi - tau_lo
            if not tau_lo + 1e-6 * width <= tau <= tau_hi - 1e-6 * width:
                tau = 0.5 * (tau_lo + tau_hi)
        else:
            tau = 0.5 * (tau_lo + tau_hi)
        z, h = shifted_projection(tau)
        exact = polish(z)
        if exact is not None:
            return exact
        if abs(h) <= 1e-13 * hscale:
            break
        if h > 0.0:
            tau_lo, w_lo = tau, h
            if side == -1:
                w_hi *= 0.5
            side = -1
        else:
            tau_hi, w_hi = tau, h
            if side == 1:
                w_lo *= 0.5
            side = 1
    viol = -c
    for i in range(n):
        viol += g[i] * z[i]
    if viol > 1e-8 * hscale:
        raise ProjectionConvergenceError(
            f"halfspace multiplier search did not settle within {max_rounds} "
            f"rounds (violation {viol:.3e})"
        )
    return z


def project_intersection(
    point: Sequence[float],
    fset: FeasibleSet,
    half: Halfspace,
    max_rounds: int = 200,
) -> np.ndarray:
    """Project onto the feasible set intersected with a halfspace.

    An alternating-projection scheme is deliberately avoided here: near an
    equilibrium the halfspace normal aligns with the charging hyperplane and
    alternating projections stall on such glancing intersections.  The
    two-multiplier dual search in ``_intersection_core`` has no such failure
    mode.
    """
    point_l = [float(v) for v in point]
    g_l = [float(v) for v in half.normal]
    if all(v == 0.0 for v in g_l):
        return project_feasible(point, fset)
    fset.check_feasible()
    m_l = [float(v) for v in fset.m]
    if any(w <= 0.0 for w in m_l):
        raise ValueError("zero-weight groups must be removed before projecting")
    c = float(np.dot(half.normal, half.anchor))
    return np.array(
        _intersection_core(point_l, m_l, fset.S, g_l, c, max_rounds)
    )
