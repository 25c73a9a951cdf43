"""Day-ahead charging demand: minimize the day's energy bill.

Given the consumed-energy profile of an unconstrained (infinite-energy) dry
run, the per-slot transportation counts and the price curve, pick how much
the fleet charges in every slot.  The program is linear: the fleet energy
follows the bookkeeping recursion, every slot keeps a reserve so the next
slot's driving and the trip to a station are always covered, the day must
not end below its starting energy (or a configured terminal target), slot
charging is capped by the vehicles not needed for transportation, and fleet
energy never exceeds total battery capacity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from pvjtcs.model import GameParams
from pvjtcs.simplex import EQ, GE, LinearProgram, LpInfeasibleError, solve_lp


class ChargingInfeasibleError(ValueError):
    """The reserve/terminal requirements cannot be met; explains why."""


@dataclass
class DayAheadInputs:
    """Inputs to the day-ahead program.

    ``consumed[t]`` is the fleet's driving energy in slot t from the
    infinite-energy dry run, ``demand_counts[t]`` the number of vehicles that
    run transported in slot t, ``prices[t]`` the electricity price, and
    ``e_init`` the fleet's total energy entering slot 0.  When
    ``terminal_reserve_kwh`` is set it replaces ``e_init`` as the end-of-day
    floor (multi-day chaining knob).
    """

    consumed: Sequence[float]
    demand_counts: Sequence[int]
    prices: Sequence[float]
    e_init: float
    params: GameParams
    terminal_reserve_kwh: float | None = None

    def __post_init__(self) -> None:
        self.consumed = [float(v) for v in self.consumed]
        self.demand_counts = [int(v) for v in self.demand_counts]
        self.prices = [float(p) for p in self.prices]
        T = len(self.consumed)
        if T == 0:
            raise ValueError("need at least one slot")
        if not len(self.demand_counts) == len(self.prices) == T:
            raise ValueError("consumed/demand_counts/prices must share length")
        if any(v < 0.0 for v in self.consumed):
            raise ValueError("consumed energy must be nonnegative")
        J = self.params.J
        if any(not 0 <= dc <= J for dc in self.demand_counts):
            raise ValueError(f"demand counts must lie in [0, J={J}]")
        if not 0.0 <= self.e_init <= J * self.params.c:
            raise ValueError("initial energy outside [0, fleet capacity]")

    @property
    def T(self) -> int:
        return len(self.consumed)


@dataclass
class ChargingPlan:
    """Per-slot charging demands with the implied fleet-energy trajectory."""

    e_plus: list[float]
    e_remaining: list[float]
    cost: float


def build_lp(inputs: DayAheadInputs) -> LinearProgram:
    """Assemble the day-ahead program.

    Variables are ``E+[t]`` for all T slots and ``Er[t]`` for t >= 1 (the
    slot-0 energy is data).  Rows: the energy recursion (equalities), the
    per-slot reserve floors, and the terminal floor; the charging caps and
    fleet capacity are variable bounds.
    """
    T = inputs.T
    par = inputs.params
    J, r, c, rho, e_min = par.J, par.r, par.c, par.rho, par.e_min
    n_rem = T - 1  # Er[1..T-1]
    n = T + n_rem

    def e_plus_col(t: int) -> int:
        return t

    def e_rem_col(t: int) -> int:
        return T + t - 1

    var_names = [f"E+[{t}]" for t in range(T)] + [f"Er[{t}]" for t in range(1, T)]
    upper = np.empty(n)
    for t in range(T):
        upper[e_plus_col(t)] = max(J - inputs.demand_counts[t], 0) * r
    for t in range(1, T):
        upper[e_rem_col(t)] = J * c

    rows, senses, rhs, row_names = [], [], [], []

    def add_row(coeffs: dict[int, float], sense: str, b: float, name: str) -> None:
        row = np.zeros(n)
        for j, v in coeffs.items():
            row[j] = v
        rows.append(row)
        senses.append(sense)
        rhs.append(b)
        row_names.append(name)

    # energy recursion: Er[t+1] = Er[t] - E-[t] + E+[t]
    for t in range(T - 1):
        coeffs = {e_rem_col(t + 1): 1.0, e_plus_col(t): -1.0}
        b = -inputs.consumed[t]
        if t == 0:
            b += inputs.e_init
        else:
            coeffs[e_rem_col(t)] = -1.0
        add_row(coeffs, EQ, b, f"recursion[{t}]")

    # reserve: Er[t] >= (1+rho) * max(E-[t], J*e_min)
    for t in range(1, T):
        floor = (1.0 + rho) * max(inputs.consumed[t], J * e_min)
        add_row({e_rem_col(t): 1.0}, GE, floor, f"reserve[{t}]")

    # terminal: Er[T-1] - E-[T-1] + E+[T-1] >= end-of-day floor
    terminal_floor = (
        inputs.e_init
        if inputs.terminal_reserve_kwh is None
        else inputs.terminal_reserve_kwh
    )
    coeffs = {e_plus_col(T - 1): 1.0}
    b = terminal_floor + inputs.consumed[T - 1]
    if T > 1:
        coeffs[e_rem_col(T - 1)] = 1.0
    else:
        b -= inputs.e_init
    add_row(coeffs, GE, b, "terminal")

    cost = np.zeros(n)
    for t in range(T):
        cost[e_plus_col(t)] = inputs.prices[t]
    return LinearProgram(
        c=cost,
        A=np.vstack(rows),
        senses=senses,
        b=np.array(rhs),
        upper=upper,
        var_names=var_names,
        row_names=row_names,
    )


def schedule_charging(inputs: DayAheadInputs) -> ChargingPlan:
    """Build, solve and repackage the day-ahead program.

    The returned trajectory is re-derived through the recursion from the
    optimal charging sequence, so the bookkeeping identity holds exactly; all
    constraint families are then verified within 1e-6.
    """
    lp = build_lp(inputs)
    try:
        sol = solve_lp(lp)
    except LpInfeasibleError as err:
        raise ChargingInfeasibleError(_diagnose(inputs, err)) from err

    T = inputs.T
    e_plus = [float(sol.x[t]) for t in range(T)]
    e_remaining = [inputs.e_init]
    for t in range(T - 1):
        e_remaining.append(e_remaining[t] - inputs.consumed[t] + e_plus[t])
    plan = ChargingPlan(
        e_plus=e_plus,
        e_remaining=e_remaining,
        cost=float(sum(p * e for p, e in zip(inputs.prices, e_plus))),
    )
    _verify(inputs, plan)
    return plan


def _verify(inputs: DayAheadInputs, plan: ChargingPlan, tol: float = 1e-6) -> None:
    par = inputs.params
    T = inputs.T
    for t in range(T):
        cap = max(par.J - inputs.demand_counts[t], 0) * par.r
        if not -tol <= plan.e_plus[t] <= cap + tol:
            raise AssertionError(f"charging cap violated in slot {t}")
        if not -tol <= plan.e_remaining[t] <= par.J * par.c + tol:
            raise AssertionError(f"fleet capacity violated in slot {t}")
    for t in range(1, T):
        floor = (1.0 + par.rho) * max(inputs.consumed[t], par.J * par.e_min)
        if plan.e_remaining[t] < floor - tol:
            raise AssertionError(f"reserve violated in slot {t}")
    terminal_floor = (
        inputs.e_init
        if inputs.terminal_reserve_kwh is None
        else inputs.terminal_reserve_kwh
    )
    end = plan.e_remaining[T - 1] - inputs.consumed[T - 1] + plan.e_plus[T - 1]
    if end < terminal_floor - tol:
        raise AssertionError("terminal energy floor violated")


def _diagnose(inputs: DayAheadInputs, err: LpInfeasibleError) -> str:
    par = inputs.params
    parts = []
    for name, short in err.residuals.items():
        if name.startswith("reserve["):
            t = int(name[len("reserve[") : -1])
            floor = (1.0 + par.rho) * max(inputs.consumed[t], par.J * par.e_min)
            parts.append(
                f"slot {t} needs {floor:.1f} kwh in reserve but charging caps "
                f"leave it {short:.1f} kwh short"
            )
        elif name == "terminal":
            parts.append(
                f"the end-of-day energy floor cannot be met (short {short:.1f} kwh)"
            )
        else:
            parts.append(f"{name} unmet by {short:.1f} kwh")
    detail = "; ".join(parts) if parts else str(err)
    return f"day-ahead charging plan infeasible: {detail}"


def write_plan_csv(
    plan: ChargingPlan,
    inputs: DayAheadInputs,
    stream: IO[str],
) -> None:
    """Dump slot, price, consumed, charged and remaining energy."""
    writer = csv.writer(stream)
    writer.writerow(["slot", "price", "E_minus", "E_plus", "E_remaining"])
    for t in range(inputs.T):
        writer.writerow(
            [
                t,
                repr(inputs.prices[t]),
                repr(inputs.consumed[t]),
                repr(plan.e_plus[t]),
                repr(plan.e_remaining[t]),
            ]
        )
