"""Plant, estimator, channel, and battery primitives.

All functions here operate on plain values and are used both by the
kernel builder (on grid nodes) and by the closed-loop simulator (on the
exact continuous state). They hold no mutable state and are safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum


class Action(IntEnum):
    IDLE = 0
    UPLINK = 1
    DOWNLINK = 2


class InadmissibleActionError(ValueError):
    """Raised when an action is taken in a state where it is not allowed."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the plant, channels, battery, and objective.

    ``p`` is the packet-drop probability shared by both channels; per-channel
    overrides ``p_up``/``p_down`` default to ``p``. ``harvest_probs[k]`` is
    the probability of harvesting ``k`` energy units per step, support
    ``{0, ..., L}``. The controller gain is fixed at ``K = -a`` so a delivered
    control zeroes the estimated state in one step.
    """

    a: float = 0.8
    sigma2: float = 1.0
    p: float = 0.2
    beta: float = 0.9
    B: int = 3
    harvest_probs: tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)
    p_up: float | None = None
    p_down: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"drop probability p={self.p} outside [0, 1]")
        for name in ("p_up", "p_down"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"discount beta={self.beta} outside (0, 1)")
        if self.sigma2 <= 0.0:
            raise ValueError(f"noise variance sigma2={self.sigma2} must be > 0")
        if int(self.B) != self.B or self.B < 1:
            raise ValueError(f"battery capacity B={self.B} must be an integer >= 1")
        probs = tuple(float(q) for q in self.harvest_probs)
        if any(q < 0.0 for q in probs):
            raise ValueError("harvest_probs entries must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"harvest_probs sums to {sum(probs)!r}, expected 1")
        object.__setattr__(self, "harvest_probs", probs)

    @property
    def K(self) -> float:
        return -self.a

    @property
    def drop_up(self) -> float:
        return self.p if self.p_up is None else self.p_up

    @property
    def drop_down(self) -> float:
        return self.p if self.p_down is None else self.p_down

    @property
    def L(self) -> int:
        return len(self.harvest_probs) - 1


@dataclass(frozen=True)
class State:
    """State of the scheduling problem: plant state, age of the controller's
    data packet, control-packet availability flag, and battery level."""

    x: float
    tau: int
    y: int
    b: int

    def validate(self, B: int) -> None:
        if self.tau < 0:
            raise ValueError(f"age tau={self.tau} must be >= 0")
        if self.y not in (0, 1):
            raise ValueError(f"flag y={self.y} must be 0 or 1")
        if not 0 <= self.b <= B:
            raise ValueError(f"battery b={self.b} outside [0, {B}]")


@dataclass
class EstimatorState:
    """Controller-side estimate of the plant state."""

    xhat: float = 0.0


def admissible_actions(y: int, b: int) -> set[Action]:
    """Actions available to the scheduler: Uplink needs energy, Downlink
    needs a control packet at the controller."""
    actions = {Action.IDLE}
    if b > 0:
        actions.add(Action.UPLINK)
    if y == 1:
        actions.add(Action.DOWNLINK)
    return actions


def battery_step(b: int, ell: int, u: Action, B: int) -> int:
    """Next battery level: harvest ``ell``, spend one unit on an uplink
    attempt, saturate at capacity ``B``."""
    if u == Action.UPLINK and b == 0:
        raise InadmissibleActionError("uplink attempted with an empty battery")
    return min(b + ell - (1 if u == Action.UPLINK else 0), B)


def tau_step(tau: int, u: Action, delivered: bool = False) -> int:
    """Age of the controller's data packet: resets to 1 on a successful
    uplink, otherwise increments."""
    if u == Action.UPLINK and delivered:
        return 1
    return tau + 1


def y_step(y: int, u: Action, delivered: bool = False) -> int:
    """Control-packet availability: consumed by a delivered downlink,
    created by a delivered uplink, otherwise unchanged."""
    if u == Action.DOWNLINK and y == 0:
        raise InadmissibleActionError("downlink attempted without a control packet")
    if u == Action.DOWNLINK and delivered:
        return 0
    if u == Action.UPLINK and delivered:
        return 1
    return y


def control_input(xhat: float, a: float, u: Action, delivered: bool = False) -> float:
    """Control applied by the actuator: ``-a * xhat`` when a downlink packet
    is delivered, zero otherwise."""
    if u == Action.DOWNLINK and delivered:
        return -a * xhat
    return 0.0


def plant_step(x: float, a: float, v: float, w: float) -> float:
    """One step of the linear plant ``x' = a x + v + w``."""
    return a * x + v + w


def estimator_step(xhat: float, x: float, a: float, u: Action, delivered: bool = False) -> float:
    """Controller's estimate update: refreshed from the delivered sensor
    packet (one-step-old sample), otherwise propagated through the plant gain."""
    if u == Action.UPLINK and delivered:
        return a * x
    return a * xhat


def eps_tau(tau: int, a: float, sigma2: float) -> float:
    """Variance of the accumulated noise sum after a delivered control at
    age ``tau``: Var[sum_{k=0}^{tau} a^k w]. Continuous in ``a`` through the
    |a| = 1 limit ``sigma2 * (tau + 1)``."""
    if tau < 0:
        raise ValueError(f"age tau={tau} must be >= 0")
    a2 = a * a
    if math.isclose(a2, 1.0, rel_tol=0.0, abs_tol=1e-15):
        return sigma2 * (tau + 1)
    return sigma2 * (1.0 - a2 ** (tau + 1)) / (1.0 - a2)
