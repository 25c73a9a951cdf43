"""Dense two-phase simplex for small linear programs.

Solves ``min c.x`` subject to rows ``A x {<=,=,>=} b`` and bounds
``0 <= x <= upper``.  Upper bounds become explicit rows, inequalities get
slacks, equalities and surplus rows get phase-1 artificials.  Bland's rule
(lowest eligible index in, lowest basic index on ratio ties) rules out
cycling; optimality is certified by the reduced costs at exit.

Sized for day-ahead fleet scheduling: tens of variables, dense tableaus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="
_TOL = 1e-9


class LpInfeasibleError(ValueError):
    """Phase 1 could not zero the artificials; carries the residual rows."""

    def __init__(self, message: str, residuals: dict[str, float]):
        super().__init__(message)
        self.residuals = residuals


class LpUnboundedError(ValueError):
    """The objective decreases without limit along a feasible ray."""


@dataclass
class LinearProgram:
    """``min c.x  s.t.  A x (senses) b,  0 <= x <= upper``."""

    c: np.ndarray
    A: np.ndarray
    senses: list[str]
    b: np.ndarray
    upper: np.ndarray
    var_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n_rows, n_vars = self.A.shape
        if len(self.c) != n_vars or len(self.upper) != n_vars:
            raise ValueError("objective/bounds length disagrees with A")
        if len(self.b) != n_rows or len(self.senses) != n_rows:
            raise ValueError("rhs/senses length disagrees with A")
        for s in self.senses:
            if s not in (LE, GE, EQ):
                raise ValueError(f"unknown row sense {s!r}")
        if not self.var_names:
            self.var_names = [f"x{j}" for j in range(n_vars)]
        if not self.row_names:
            self.row_names = [f"row{i}" for i in range(n_rows)]

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    iterations: int
    reduced_cost_violation: float


def _pivot(tab: np.ndarray, cost: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * tab[row]
    if cost[col] != 0.0:
        cost -= cost[col] * tab[row]


def _run_phase(
    tab: np.ndarray, cost: np.ndarray, basis: list[int], n_cols: int
) -> int:
    """Pivot until no reduced cost is negative; Bland's rule throughout."""
    iterations = 0
    while True:
        enter = -1
        for j in range(n_cols):
            if cost[j] < -_TOL:
                enter = j
                break
        if enter < 0:
            return iterations
        leave = -1
        best = np.inf
        for i in range(tab.shape[0]):
            a = tab[i, enter]
            if a > _TOL:
                ratio = tab[i, -1] / a
                if ratio < best - 1e-12 or (
                    abs(ratio - best) <= 1e-12
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            raise LpUnboundedError(
                f"column {enter} improves forever; objective unbounded below"
            )
        _pivot(tab, cost, leave, enter)
        basis[leave] = enter
        iterations += 1


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Optimal basic feasible solution of ``lp``.

    Raises :class:`LpInfeasibleError` with the per-row phase-1 residuals when
    no feasible point exists, :class:`LpUnboundedError` when the objective is
    unbounded below.
    """
    # Fold finite upper bounds in as explicit rows.
    A_rows = [lp.A]
    senses = list(lp.senses)
    b = list(lp.b)
    row_names = list(lp.row_names)
    for j in range(lp.n_vars):
        if np.isfinite(lp.upper[j]):
            row = np.zeros(lp.n_vars)
            row[j] = 1.0
            A_rows.append(row[None, :])
            senses.append(LE)
            b.append(float(lp.upper[j]))
            row_names.append(f"bound[{lp.var_names[j]}]")
    A = np.vstack(A_rows)
    b = np.array(b)

    # Normalize to b >= 0.
    for i in range(len(b)):
        if b[i] < 0.0:
            A[i] = -A[i]
            b[i] = -b[i]
            senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]

    m, n = A.shape
    slack_cols = [i for i, s in enumerate(senses) if s != EQ]
    art_rows = [i for i, s in enumerate(senses) if s != LE]
    n_slack = len(slack_cols)
    n_art = len(art_rows)
    n_total = n + n_slack + n_art

    tab = np.zeros((m, n_total + 1))
    tab[:, :n] = A
    tab[:, -1] = b
    basis = [-1] * m
    for k, i in enumerate(slack_cols):
        tab[i, n + k] = 1.0 if senses[i] == LE else -1.0
        if senses[i] == LE:
            basis[i] = n + k
    for k, i in enumerate(art_rows):
        tab[i, n + n_slack + k] = 1.0
        basis[i] = n + n_slack + k

    iterations = 0
    if n_art:
        cost1 = np.zeros(n_total + 1)
        cost1[n + n_slack : n_total] = 1.0
        for i in art_rows:  # price out the artificial basis
            cost1 -= tab[i]
        iterations += _run_phase(tab, cost1, basis, n_total)
        if -cost1[-1] > 1e-7:
            residuals = {
                row_names[i]: float(tab[i, -1])
                for i in range(m)
                if basis[i] >= n + n_slack and tab[i, -1] > 1e-9
            }
            raise LpInfeasibleError(
                "no feasible point; unmet rows: "
                + ", ".join(f"{name} (short {v:.6g})" for name, v in residuals.items()),
                residuals,
            )
        # Drive any degenerate artificials out of the basis.
        for i in range(m):
            if basis[i] >= n + n_slack:
                for j in range(n + n_slack):
                    if abs(tab[i, j]) > _TOL:
                        _pivot(tab, cost1, i, j)
                        basis[i] = j
                        break

    cost2 = np.zeros(n_total + 1)
    cost2[:n] = lp.c
    for i in range(m):
        if basis[i] < n and cost2[basis[i]] != 0.0:
            cost2 -= cost2[basis[i]] * tab[i]
    # artificials are no longer eligible to enter
    cost2[n + n_slack : n_total] = np.inf
    iterations += _run_phase(tab, cost2, basis, n + n_slack)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tab[i, -1]
    finite_rc = cost2[: n + n_slack]
    violation = float(max(0.0, -np.min(finite_rc))) if len(finite_rc) else 0.0
    return LpSolution(
        x=x,
        objective=float(lp.c @ x),
        iterations=iterations,
        reduced_cost_violation=violation,
    )
