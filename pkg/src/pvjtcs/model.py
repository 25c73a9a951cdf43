"""Core quantities of the per-slot fleet game.

A city is split into regions; the unfully charged vehicles in one region form
a group whose scalar strategy ``x`` is the fraction of the group that drives
passengers this slot (the rest charges).  Each group's payoff trades off
meeting its transportation demand, satisfaction with the energy it banks, and
the charging fee at the current electricity price.  The stacked negated
gradients of the payoffs form the operator that the equilibrium solver works
on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

IDLE = "idle"
SERVING = "serving"
CHARGING = "charging"

_STATUSES = (IDLE, SERVING, CHARGING)


@dataclass
class GameParams:
    """Fleet, battery, solver and utility constants.

    Defaults mirror the simulation calibration used throughout: a 45 kwh
    battery charging 5.625 kwh per hour, 0.3 kwh/km consumption at 30 km/h,
    and the standard solver constants (alpha1=20, alpha2=5, gamma1=0.4,
    gamma2=0.5, gamma3=1.5, mu_init=eta_init=1, epsilon=1e-3, rho=0.2,
    e_min=3).
    """

    alpha1: float = 20.0        # weight of the charging-satisfaction term
    alpha2: float = 5.0         # weight of the charging-fee term
    gamma1: float = 0.4         # line-search backtracking base, in (0,1)
    gamma2: float = 0.5         # line-search acceptance threshold, in (0,1)
    gamma3: float = 1.5         # step amplifier between iterations, > 1
    mu_init: float = 1.0        # initial trial step
    eta_init: float = 1.0       # eta seed for the very first step update
    epsilon: float = 1e-3       # residual-norm stopping bound
    rho: float = 0.2            # energy reserve margin
    e_min: float = 3.0          # kwh needed to reach a charging station
    r: float = 5.625            # kwh charged by one vehicle in one slot
    c: float = 45.0             # battery capacity, kwh
    J: int = 500                # fleet size
    slot_hours: float = 1.0     # slot duration, hours
    speed: float = 30.0         # travel speed, km/h
    consume_rate: float = 0.3   # kwh consumed per km
    detour_max: float = 1.5     # max ratio of on-vehicle to direct distance
    seats: int = 16             # passenger capacity per vehicle

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma1 < 1.0:
            raise ValueError(f"gamma1 must lie in (0,1), got {self.gamma1}")
        if not 0.0 < self.gamma2 < 1.0:
            raise ValueError(f"gamma2 must lie in (0,1), got {self.gamma2}")
        if self.gamma3 <= 1.0:
            raise ValueError(f"gamma3 must exceed 1, got {self.gamma3}")
        if self.mu_init <= 0.0:
            raise ValueError(f"mu_init must be positive, got {self.mu_init}")
        if self.eta_init <= 0.0:
            raise ValueError(f"eta_init must be positive, got {self.eta_init}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.rho <= 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.alpha1 < 0.0 or self.alpha2 < 0.0:
            raise ValueError("alpha1 and alpha2 must be nonnegative")
        for name in ("e_min", "r", "c", "consume_rate"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if self.r > self.c:
            raise ValueError(f"per-slot charge r={self.r} exceeds capacity c={self.c}")
        if self.J < 0 or self.seats < 1:
            raise ValueError("J must be >= 0 and seats >= 1")
        if self.slot_hours <= 0.0 or self.speed <= 0.0:
            raise ValueError("slot_hours and speed must be positive")
        if self.detour_max < 1.0:
            raise ValueError(f"detour_max must be >= 1, got {self.detour_max}")

    @property
    def full_threshold(self) -> float:
        """Energy above which a vehicle counts as fully charged (c - r)."""
        return self.c - self.r

    @property
    def slot_consumption(self) -> float:
        """Worst-case energy a vehicle can burn in one slot, kwh."""
        return self.speed * self.slot_hours * self.consume_rate


@dataclass
class PvState:
    """One vehicle: where it is, how much energy remains, what it is doing."""

    id: int
    node: int
    energy: float
    status: str = IDLE

    def __post_init__(self) -> None:
        if self.status not in _STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.energy < 0.0:
            raise ValueError(f"PV {self.id} has negative energy {self.energy}")


@dataclass
class PvGroup:
    """Per-region census for one slot: the players of the slot game.

    ``a`` vehicles sit in the region, ``f`` of them fully charged, leaving
    ``m = a - f`` group members.  ``n`` vehicles transported in the dry run,
    so ``d = max(n - f, 0)`` members are demanded for transportation.  ``x``
    is the group's strategy: the fraction of members that will transport.
    """

    region: int
    m: int
    d: int
    a: int | None = None
    f: int = 0
    n: int = 0
    x: float = 0.0

    def __post_init__(self) -> None:
        if self.a is None:
            self.a = self.m + self.f
        if min(self.a, self.f, self.m, self.n, self.d) < 0:
            raise ValueError(f"group {self.region}: counts must be nonnegative")
        if self.m != self.a - self.f:
            raise ValueError(
                f"group {self.region}: m={self.m} != a-f={self.a - self.f}"
            )
        if not 0.0 <= self.x <= 1.0:
            raise ValueError(f"group {self.region}: x={self.x} outside [0,1]")


@dataclass
class PriceCurve:
    """Electricity price per slot, cents/kwh."""

    prices: Sequence[float]

    def __post_init__(self) -> None:
        self.prices = [float(p) for p in self.prices]
        for t, p in enumerate(self.prices):
            if p < 0.0:
                raise ValueError(f"negative price {p} at slot {t}")

    def __len__(self) -> int:
        return len(self.prices)

    def __getitem__(self, t: int) -> float:
        return self.prices[t]


@dataclass
class PricingModel:
    """Endogenous price rule p = alpha0 * (L/C0)^k0 over regional loads.

    ``loads[i][t]`` is region i's electricity load in slot t.  The simulator
    normally runs on a recorded exogenous :class:`PriceCurve` instead; this
    rule is kept for completeness and for experiments that close the
    price-load loop.
    """

    alpha0: float
    k0: float
    C0: float
    loads: Sequence[Sequence[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.alpha0 < 0.0:
            raise ValueError(f"alpha0 must be nonnegative, got {self.alpha0}")
        if self.k0 < 0.0:
            raise ValueError(f"k0 must be nonnegative, got {self.k0}")
        if self.C0 <= 0.0:
            raise ValueError(f"market capacity C0 must be positive, got {self.C0}")


def utility(group: PvGroup, x: float, p_t: float, params: GameParams) -> float:
    """Payoff of one group at strategy ``x`` under price ``p_t``.

    Three terms: a quadratic penalty for missing the transportation demand
    (m*x vehicles offered against d demanded), a logarithmic satisfaction
    reward for the fraction that charges, and the charging fee.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"strategy x={x} outside [0,1]")
    if group.m < 0:
        raise ValueError("group size m must be nonnegative")
    if p_t < 0.0:
        raise ValueError(f"price must be nonnegative, got {p_t}")
    m = float(group.m)
    d = float(group.d)
    return (
        -((m * x - d) ** 2)
        + params.alpha1 * m * math.log(2.0 - x)
        - params.alpha2 * p_t * m * (1.0 - x)
    )


def utility_gradient(group: PvGroup, x: float, p_t: float, params: GameParams) -> float:
    """d(utility)/dx: -2m(mx - d) - alpha1*m/(2 - x) + alpha2*p_t*m."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"strategy x={x} outside [0,1]")
    if group.m < 0:
        raise ValueError("group size m must be nonnegative")
    if p_t < 0.0:
        raise ValueError(f"price must be nonnegative, got {p_t}")
    m = float(group.m)
    d = float(group.d)
    return -2.0 * m * (m * x - d) - params.alpha1 * m / (2.0 - x) + params.alpha2 * p_t * m


def utility_curvature(group: PvGroup, x: float, params: GameParams) -> float:
    """Second derivative of the payoff; strictly negative whenever m > 0."""
    m = float(group.m)
    return -2.0 * m * m - params.alpha1 * m / (x - 2.0) ** 2


def pseudo_gradient(
    groups: Sequence[PvGroup],
    x: Sequence[float],
    p_t: float,
    params: GameParams,
) -> np.ndarray:
    """Stacked negated payoff gradients, one component per group.

    Each payoff depends only on its own coordinate, so this vector is also
    the negative gradient of the aggregate payoff sum: the game's
    equilibrium operator coincides with plain maximization machinery.
    """
    if len(x) != len(groups):
        raise ValueError(f"strategy vector has length {len(x)}, expected {len(groups)}")
    out = np.empty(len(groups))
    for i, (g, xi) in enumerate(zip(groups, x)):
        out[i] = -utility_gradient(g, float(xi), p_t, params)
    return out


def rtp_price(model: PricingModel, t: int) -> float:
    """Price in slot t from the endogenous rule: alpha0 * (L_t/C0)^k0."""
    if model.C0 == 0.0:
        raise ZeroDivisionError("market capacity C0 is zero")
    load_t = sum(region[t] for region in model.loads)
    return model.alpha0 * (load_t / model.C0) ** model.k0
