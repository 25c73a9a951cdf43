"""Independent reference implementations the test suite checks against.

Everything here deliberately avoids the production code paths: projections
are brute-force active-set enumerations or plain bisections, equilibria come
from projected gradient ascent on the aggregate payoff, linear programs are
solved by vertex enumeration, and shortest paths by Bellman-Ford.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def bisection_projection(point, m, S, iters: int = 80):
    """Box-hyperplane projection via plain dual bisection (oracle-grade)."""
    point = [float(v) for v in point]
    m = [float(v) for v in m]
    n = len(point)

    def z_of(lam):
        return [min(max(point[i] + lam * m[i], 0.0), 1.0) for i in range(n)]

    lo = min(-point[i] / m[i] for i in range(n))
    hi = max((1.0 - point[i]) / m[i] for i in range(n))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if sum(m[i] * zi for i, zi in enumerate(z_of(mid))) < S:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    z = z_of(lam)
    free = [i for i in range(n) if 0.0 < z[i] < 1.0]
    if free:
        rest = sum(m[i] * z[i] for i in range(n) if i not in free)
        lam = (S - rest - sum(m[i] * point[i] for i in free)) / sum(
            m[i] * m[i] for i in free
        )
        z = z_of(lam)
    return np.array(z)


def active_set_projection(point, m, S, normal=None, anchor=None):
    """Projection onto box-hyperplane (optionally cut by a halfspace) by
    enumerating every activity pattern and keeping the feasible minimizer."""
    point = np.asarray(point, dtype=float)
    m = np.asarray(m, dtype=float)
    n = len(point)
    cut = normal is not None and float(np.dot(normal, normal)) > 0.0
    if cut:
        normal = np.asarray(normal, dtype=float)
        rhs_cut = float(np.dot(normal, np.asarray(anchor, dtype=float)))

    best = None
    best_dist = np.inf
    for pattern in itertools.product((0.0, 1.0, None), repeat=n):
        fixed = {i: v for i, v in enumerate(pattern) if v is not None}
        free = [i for i in range(n) if i not in fixed]
        for cut_active in (False, True) if cut else (False,):
            rows = [m[free]]
            rhs = [S - sum(m[i] * v for i, v in fixed.items())]
            if cut_active:
                rows.append(normal[free])
                rhs.append(rhs_cut - sum(normal[i] * v for i, v in fixed.items()))
            if free:
                A = np.vstack(rows)
                b = np.array(rhs)
                # projection of the free block onto the affine subspace
                try:
                    corr = A.T @ np.linalg.lstsq(
                        A @ A.T, A @ point[free] - b, rcond=None
                    )[0]
                except np.linalg.LinAlgError:
                    continue
                z_free = point[free] - corr
                if np.any(np.abs(A @ z_free - b) > 1e-8):
                    continue
            else:
                z_free = np.array([])
                if abs(rhs[0]) > 1e-8:
                    continue
                if cut_active and abs(rhs[1]) > 1e-8:
                    continue
            z = np.empty(n)
            for i, v in fixed.items():
                z[i] = v
            z[free] = z_free
            if np.any(z < -1e-9) or np.any(z > 1.0 + 1e-9):
                continue
            if cut and not cut_active:
                if float(np.dot(normal, z)) > rhs_cut + 1e-9:
                    continue
            dist = float(np.linalg.norm(z - point))
            if dist < best_dist - 1e-15:
                best_dist = dist
                best = np.clip(z, 0.0, 1.0)
    if best is None:
        raise ValueError("no feasible activity pattern (empty set?)")
    return best


def projected_gradient_equilibrium(
    m, d, S, price, alpha1, alpha2, max_steps: int = 100_000
):
    """Maximize the aggregate payoff over the feasible set by projected
    gradient ascent.

    The step is 1/L for the curvature bound L = max(2 m^2 + alpha1 m): a
    fixed literal step of 1e-3 overshoots for large groups (L ~ 2e4).  Runs
    the full budget unless the iterate reaches a fixed point to machine
    precision.
    """
    m = np.asarray(m, dtype=float)
    d = np.asarray(d, dtype=float)
    L = float(np.max(2.0 * m * m + alpha1 * m))
    step = 1.0 / L
    x = bisection_projection(np.clip(d / m, 0.0, 1.0) + 0.123, m, S)
    for _ in range(max_steps):
        grad = -2.0 * m * (m * x - d) - alpha1 * m / (2.0 - x) + alpha2 * price * m
        x_new = bisection_projection(x + step * grad, m, S)
        if float(np.max(np.abs(x_new - x))) < 1e-14:
            return x_new
        x = x_new
    return x


def enumerate_lp_vertices(c, A, senses, b, upper):
    """Solve min c.x s.t. A x (=, <=, >=) b, 0 <= x <= upper by enumerating
    basic solutions: equalities always active plus enough actives from the
    inequalities and bounds to pin a vertex."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = len(c)
    eq_rows = [i for i, s in enumerate(senses) if s == "="]
    ineq_rows = [i for i, s in enumerate(senses) if s != "="]

    # candidate active rows: inequality rows, lower bounds, upper bounds
    candidates = (
        [("row", i) for i in ineq_rows]
        + [("lo", j) for j in range(n)]
        + [("up", j) for j in range(n) if np.isfinite(upper[j])]
    )
    need = n - len(eq_rows)
    if need < 0:
        # overdetermined equalities: pick n of them as the active basis and
        # let the feasibility check validate the rest
        mandatory_combos = itertools.combinations(eq_rows, n)
        combo_iter = (([], list(combo)) for combo in mandatory_combos)
    else:
        combo_iter = (
            (eq_rows, list(combo))
            for combo in itertools.combinations(candidates, need)
        )
    best_x, best_obj = None, np.inf
    for mandatory, combo in combo_iter:
        M = np.zeros((n, n))
        rhs = np.zeros(n)
        for k, i in enumerate(mandatory):
            M[k] = A[i]
            rhs[k] = b[i]
        combo = [
            ("row", idx) if isinstance(idx, (int, np.integer)) else idx
            for idx in combo
        ]
        ok = True
        for k, (kind, idx) in enumerate(combo, start=len(mandatory)):
            if kind == "row":
                M[k] = A[idx]
                rhs[k] = b[idx]
            elif kind == "lo":
                M[k, idx] = 1.0
                rhs[k] = 0.0
            else:
                M[k, idx] = 1.0
                rhs[k] = upper[idx]
        try:
            x = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.any(x < -1e-8) or np.any(x > upper + 1e-8):
            continue
        resid = A @ x - b
        for i, s in enumerate(senses):
            if s == "=" and abs(resid[i]) > 1e-7:
                ok = False
            elif s == "<=" and resid[i] > 1e-7:
                ok = False
            elif s == ">=" and resid[i] < -1e-7:
                ok = False
        if not ok:
            continue
        obj = float(c @ x)
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_x = x
    return best_x, best_obj


def bellman_ford(n_nodes_edges, source):
    """Single-source shortest distances on a directed edge list."""
    nodes, edges = n_nodes_edges
    dist = {v: math.inf for v in nodes}
    dist[source] = 0.0
    for _ in range(len(nodes)):
        changed = False
        for u, v, w in edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    return dist


def central_difference(f, x, h: float = 1e-6):
    return (f(x + h) - f(x - h)) / (2.0 * h)
