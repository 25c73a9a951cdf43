"""Equilibrium solver for the slot game.

The game's stacked negated payoff gradients form a strictly monotone operator
on the slot feasible set, so the shared-constraint equilibrium with equal
multiplier weights is exactly the solution of the corresponding variational
inequality.  That solution is computed with a two-projection extragradient
scheme: each iteration measures the projected residual, backtracks a probe
step until the operator at the probe correlates enough with the residual,
builds the separating halfspace through the probe point, and projects the
iterate onto feasible-set-and-halfspace.

``kkt_verify`` independently audits a candidate equilibrium by fitting one
common multiplier vector to the stationarity system and reporting how badly
stationarity, feasibility, dual signs and complementarity are violated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, IO, Sequence

import numpy as np

from pvjtcs.model import GameParams, PvGroup
from pvjtcs.projection import (
    FeasibleSet,
    Halfspace,
    _dual_scan,
    _intersection_core,
    project_feasible,
    project_intersection,
)

Operator = Callable[[np.ndarray], np.ndarray]


class LineSearchError(RuntimeError):
    """Backtracking produced no acceptable step; operator or projection bug."""


class SspmConvergenceError(RuntimeError):
    """Iteration cap exhausted before the residual dropped below epsilon."""

    def __init__(self, message: str, trace: "SspmTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class SspmTrace:
    """Per-iteration record of the extragradient run."""

    iterates: list = field(default_factory=list)          # strategy vectors
    residual_norms: list = field(default_factory=list)    # ||nu|| per iteration
    etas: list = field(default_factory=list)              # accepted step sizes
    zetas: list = field(default_factory=list)             # backtracking exponents
    utilities: list = field(default_factory=list)         # per-group payoffs
    projection_calls: list = field(default_factory=list)  # per-iteration count
    exit_checks: int = 0                                  # unit-step confirmations
    converged: bool = False

    def __len__(self) -> int:
        return len(self.residual_norms)


@dataclass
class KktReport:
    """Common-multiplier stationarity audit of a candidate equilibrium.

    ``lambda_bar`` stacks [charging-equality multiplier, demand multiplier,
    lower-box multipliers..., upper-box multipliers...].  Residuals are
    reported relative to the instance's gradient scale (``1 + max |du/dx|``)
    for stationarity/dual/complementarity and to each constraint's natural
    scale for feasibility, so the same tolerance is meaningful for groups of
    one vehicle and of a hundred.
    """

    lambda_bar: np.ndarray
    stationarity_residual: float
    complementarity_residual: float
    primal_violation: float
    dual_violation: float

    def worst(self) -> float:
        return max(
            self.stationarity_residual,
            self.complementarity_residual,
            self.primal_violation,
            self.dual_violation,
        )


def make_operator(
    groups: Sequence[PvGroup], p_t: float, params: GameParams
) -> Operator:
    """Vectorized equilibrium operator F = -(payoff gradients).

    Unlike the checked per-group gradient, this closure accepts points
    slightly outside the strategy box: the backtracking probe may step out,
    and the operator is smooth there anyway.
    """
    m = np.array([float(g.m) for g in groups])
    d = np.array([float(g.d) for g in groups])
    a1, a2 = params.alpha1, params.alpha2

    def F(x: np.ndarray) -> np.ndarray:
        return 2.0 * m * (m * x - d) + a1 * m / (2.0 - x) - a2 * p_t * m

    return F


def residual(
    x: np.ndarray, mu: float, F: Operator, fset: FeasibleSet
) -> np.ndarray:
    """Projected residual nu(x, mu) = x - P(x - mu * F(x)).

    Vanishes exactly at the variational-inequality solution.
    """
    if mu <= 0.0:
        raise ValueError(f"step mu must be positive, got {mu}")
    x = np.asarray(x, dtype=float)
    return x - project_feasible(x - mu * F(x), fset)


def line_search(
    x: np.ndarray,
    nu: np.ndarray,
    mu: float,
    F: Operator,
    params: GameParams,
    max_zeta: int = 100,
) -> tuple[int, float]:
    """Smallest exponent zeta with the probe acceptance condition.

    Accepts zeta when ``<F(x - gamma1^zeta * mu * nu), nu> >=
    (gamma2/mu) * ||nu||^2`` and returns ``(zeta, eta = gamma1^zeta * mu)``.
    """
    nu_sq = float(np.dot(nu, nu))
    if nu_sq == 0.0:
        raise ValueError("line search called with a zero residual")
    threshold = (params.gamma2 / mu) * nu_sq
    step = mu
    for zeta in range(max_zeta + 1):
        probe = x - step * nu
        if float(np.dot(F(probe), nu)) >= threshold:
            return zeta, step
        step *= params.gamma1
    raise LineSearchError(
        f"no acceptable step within {max_zeta} backtracks; "
        "operator may not be monotone on this instance"
    )


def sspm_solve(
    groups: Sequence[PvGroup],
    fset: FeasibleSet,
    p_t: float,
    params: GameParams,
    x0: Sequence[float] | None = None,
    max_iterations: int = 100_000,
) -> tuple[np.ndarray, SspmTrace]:
    """Solve the slot game to its normalized equilibrium.

    Starting from the projected per-group transportation optimum d/m (or a
    caller-supplied start), iterates the two-projection extragradient scheme
    until the projected residual norm drops below ``params.epsilon``.  The
    returned trace carries every iterate, residual, step size and payoff for
    inspection or CSV export.

    The loop works on plain floats: instances have a handful of groups, and
    ill-conditioned ones (group sizes spanning 1..100) genuinely need
    thousands of the cheap iterations, so per-call array overhead matters
    more than vectorization.
    """
    if any(g.m <= 0 for g in groups):
        raise ValueError("groups with m=0 must be excluded from the game")
    if len(groups) != len(fset.m) or any(
        float(g.m) != float(w) for g, w in zip(groups, fset.m)
    ):
        raise ValueError("feasible-set weights disagree with the group census")
    fset.check_feasible()

    n = len(groups)
    m = [float(g.m) for g in groups]
    d = [float(g.d) for g in groups]
    a1, a2, p = params.alpha1, params.alpha2, p_t
    gamma1, gamma2, gamma3 = params.gamma1, params.gamma2, params.gamma3
    S = fset.S

    def F(v: list[float]) -> list[float]:
        return [
            2.0 * m[i] * (m[i] * v[i] - d[i]) + a1 * m[i] / (2.0 - v[i]) - a2 * p * m[i]
            for i in range(n)
        ]

    if x0 is None:
        start = [min(max(d[i] / m[i], 0.0), 1.0) for i in range(n)]
    else:
        start = [float(v) for v in x0]
    x = _dual_scan(start, m, S)

    trace = SspmTrace()
    eta_prev = params.eta_init
    for _ in range(max_iterations):
        mu = min(gamma3 * eta_prev, 1.0)
        Fx = F(x)
        z = _dual_scan([x[i] - mu * Fx[i] for i in range(n)], m, S)
        nu = [x[i] - z[i] for i in range(n)]
        nu_sq = sum(v * v for v in nu)
        nu_norm = math.sqrt(nu_sq)

        trace.iterates.append(np.array(x))
        trace.residual_norms.append(nu_norm)
        trace.utilities.append(
            [
                -((m[i] * x[i] - d[i]) ** 2)
                + a1 * m[i] * math.log(2.0 - x[i])
                - a2 * p * m[i] * (1.0 - x[i])
                for i in range(n)
            ]
        )

        if nu_norm < params.epsilon:
            # The adaptive-step residual scales with mu, so a small mu can
            # fake convergence.  ||nu(x, mu)|| is nondecreasing in mu, hence
            # the unit-step residual both confirms geometric accuracy and
            # implies the adaptive test it replaces.
            if mu >= 1.0 or nu_norm == 0.0:
                confirmed_norm = nu_norm
                calls = 1
            else:
                z1 = _dual_scan([x[i] - Fx[i] for i in range(n)], m, S)
                confirmed_norm = math.sqrt(
                    sum((x[i] - z1[i]) ** 2 for i in range(n))
                )
                trace.exit_checks += 1
                calls = 2
            if confirmed_norm < params.epsilon:
                trace.projection_calls.append(calls)
                trace.etas.append(eta_prev)
                trace.zetas.append(0)
                trace.converged = True
                return np.array(x), trace

        # backtracking probe acceptance
        threshold = (gamma2 / mu) * nu_sq
        step = mu
        for zeta in range(101):
            probe = [x[i] - step * nu[i] for i in range(n)]
            Fp = F(probe)
            if sum(Fp[i] * nu[i] for i in range(n)) >= threshold:
                break
            step *= gamma1
        else:
            raise LineSearchError(
                "no acceptable step within 100 backtracks; "
                "operator may not be monotone on this instance"
            )
        eta = step

        y = [x[i] - eta * nu[i] for i in range(n)]
        gvec = F(y)
        c = sum(gvec[i] * y[i] for i in range(n))
        x = _intersection_core(x, m, S, gvec, c, max_rounds=200)

        trace.etas.append(eta)
        trace.zetas.append(zeta)
        trace.projection_calls.append(2)
        eta_prev = eta

    raise SspmConvergenceError(
        f"residual {trace.residual_norms[-1]:.3e} still above "
        f"epsilon={params.epsilon} after {max_iterations} iterations",
        trace,
    )


def kkt_verify(
    x: Sequence[float],
    groups: Sequence[PvGroup],
    fset: FeasibleSet,
    p_t: float,
    params: GameParams,
    boundary_tol: float = 1e-6,
) -> KktReport:
    """Fit one shared multiplier vector and measure the worst violation.

    With equal weights the equilibrium makes every interior group's
    per-vehicle marginal payoff equal to a common value; that value is fitted
    by least squares, boundary coordinates get box multipliers, and the
    report collects stationarity, primal, dual-sign and complementarity
    residuals.  A non-equilibrium point simply produces large numbers.
    """
    x = np.asarray(x, dtype=float)
    m = np.array([float(g.m) for g in groups])
    d = np.array([float(g.d) for g in groups])
    if x.shape != m.shape:
        raise ValueError("strategy vector length disagrees with the groups")

    grad = -make_operator(groups, p_t, params)(x)  # du_i/dx_i
    scale = 1.0 + float(np.max(np.abs(grad))) if len(grad) else 1.0

    lower = x <= boundary_tol
    upper = x >= 1.0 - boundary_tol
    interior = ~(lower | upper)

    # Interior stationarity rows read grad_i + omega * m_i = 0 where omega
    # combines the two shared multipliers (lam_eq * r + lam_demand).
    if np.any(interior):
        mi, gi = m[interior], grad[interior]
        omega = -float(np.dot(mi, gi)) / float(np.dot(mi, mi))
    else:
        los = [-g / w for g, w in zip(grad[upper], m[upper])]
        his = [-g / w for g, w in zip(grad[lower], m[lower])]
        lo = max(los) if los else -np.inf
        hi = min(his) if his else np.inf
        if np.isinf(lo) and np.isinf(hi):
            omega = 0.0
        elif np.isinf(lo):
            omega = hi
        elif np.isinf(hi):
            omega = lo
        else:
            omega = 0.5 * (lo + hi)

    # The demand constraint multiplier may always be folded into the free
    # equality multiplier, so complementarity is trivially satisfiable.
    lam_demand = 0.0
    lam_eq = omega / fset.r

    raw_lower = -(grad + omega * m)   # active where x_i = 0
    raw_upper = grad + omega * m      # active where x_i = 1
    lam_lower = np.where(lower, np.maximum(raw_lower, 0.0), 0.0)
    lam_upper = np.where(upper, np.maximum(raw_upper, 0.0), 0.0)
    dual_violation = 0.0
    if np.any(lower):
        dual_violation = max(dual_violation, float(np.max(-raw_lower[lower])) / scale)
    if np.any(upper):
        dual_violation = max(dual_violation, float(np.max(-raw_upper[upper])) / scale)
    dual_violation = max(dual_violation, 0.0)

    # Stationarity of player i: -grad_i - omega*m_i + lam_upper_i - lam_lower_i = 0.
    stationarity = -(grad + omega * m) + lam_upper - lam_lower
    stationarity_residual = float(np.max(np.abs(stationarity))) / scale

    charge_gap = fset.r * float(np.dot(m, 1.0 - x)) - fset.e_plus
    charge_scale = 1.0 + abs(fset.e_plus) + fset.r * float(np.sum(m))
    demand_gap = fset.d_total - float(np.dot(m, x))
    demand_scale = 1.0 + float(np.sum(m))
    box_gap = float(np.max(np.maximum(-x, x - 1.0), initial=0.0))
    primal_violation = max(
        abs(charge_gap) / charge_scale, max(demand_gap, 0.0) / demand_scale, box_gap
    )

    complementarity = max(
        abs(lam_demand * demand_gap) / scale,
        float(np.max(np.abs(lam_lower * x), initial=0.0)) / scale,
        float(np.max(np.abs(lam_upper * (x - 1.0)), initial=0.0)) / scale,
    )

    lambda_bar = np.concatenate(([lam_eq, lam_demand], lam_lower, lam_upper))
    return KktReport(
        lambda_bar=lambda_bar,
        stationarity_residual=stationarity_residual,
        complementarity_residual=complementarity,
        primal_violation=primal_violation,
        dual_violation=dual_violation,
    )


def write_trace_csv(trace: SspmTrace, stream: IO[str]) -> None:
    """Dump a solver trace: iteration, residual, eta, per-group x and payoff."""
    n_groups = len(trace.iterates[0]) if trace.iterates else 0
    writer = csv.writer(stream)
    writer.writerow(
        ["iteration", "residual", "eta"]
        + [f"x_{i}" for i in range(n_groups)]
        + [f"u_{i}" for i in range(n_groups)]
    )
    for k in range(len(trace)):
        writer.writerow(
            [k, repr(trace.residual_norms[k]), repr(trace.etas[k])]
            + [repr(v) for v in trace.iterates[k]]
            + [repr(v) for v in trace.utilities[k]]
        )
