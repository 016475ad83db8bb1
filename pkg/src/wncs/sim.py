"""Closed-loop Monte Carlo evaluation of scheduling policies on the exact
continuous-state system (no grid).

Randomness is organized as counter-based per-rollout streams derived from
(seed, rollout index), so estimates are independent of batching and
scheduling order. Rollouts are advanced in vectorized batches; the scalar
:func:`simulate_rollout` is the same engine run on a batch of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from wncs.model import Action, ModelParams
from wncs.policy import ThresholdPolicy


class PolicyFaultError(RuntimeError):
    """A policy returned an action that is inadmissible in its state."""


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings. ``horizon=None`` picks T so that beta^T <= 1e-6,
    quantifying the truncation of the infinite discounted sum. ``x0=None``
    draws the initial state from N(0, 1); the initial estimate is 0 and the
    initial age is 0."""

    n_rollouts: int = 100_000
    seed: int = 0
    horizon: int | None = None
    x0: float | None = None
    tau0: int = 0
    y0: int = 0
    b0: int | None = None

    def __post_init__(self):
        if self.n_rollouts < 1:
            raise ValueError(f"n_rollouts={self.n_rollouts} must be >= 1")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError(f"horizon={self.horizon} must be >= 1")

    def resolve_horizon(self, beta: float) -> int:
        if self.horizon is not None:
            return self.horizon
        return max(1, math.ceil(math.log(1e-6) / math.log(beta)))


@dataclass
class RolloutResult:
    discounted_cost: float
    action_counts: tuple[int, int, int]
    uplink_deliveries: int
    downlink_deliveries: int
    mean_age: float
    battery_min: int
    battery_max: int
    max_sq: float
    trace: list[tuple] | None = None


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class NeverActPolicy:
    name: str = "never_act"

    def act_batch(self, t, x, tau, y, b, rand):
        return np.zeros(x.shape, dtype=np.int64)


@dataclass(frozen=True)
class PeriodicPolicy:
    """Alternates attempts over a period of k steps: uplink (battery
    permitting) on even phases, downlink (packet permitting) on odd ones."""

    k: int = 2
    name: str = "periodic"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"period k={self.k} must be >= 1")
        object.__setattr__(self, "name", f"periodic({self.k})")

    def act_batch(self, t, x, tau, y, b, rand):
        u = np.zeros(x.shape, dtype=np.int64)
        phase = t % self.k
        if phase % 2 == 0:
            u[b > 0] = int(Action.UPLINK)
        else:
            u[y == 1] = int(Action.DOWNLINK)
        return u


@dataclass(frozen=True)
class GreedyUplinkPolicy:
    name: str = "greedy_uplink"

    def act_batch(self, t, x, tau, y, b, rand):
        u = np.zeros(x.shape, dtype=np.int64)
        u[(y == 0) & (b > 0)] = int(Action.UPLINK)
        u[y == 1] = int(Action.DOWNLINK)
        return u


@dataclass(frozen=True)
class RandomAdmissiblePolicy:
    """Uniform over the admissible set, consuming one uniform per step from
    the rollout's stream."""

    name: str = "random_admissible"

    def act_batch(self, t, x, tau, y, b, rand):
        n_adm = 1 + (b > 0).astype(np.int64) + (y == 1).astype(np.int64)
        idx = np.minimum((rand * n_adm).astype(np.int64), n_adm - 1)
        u = np.zeros(x.shape, dtype=np.int64)
        # index 1 is Uplink when available, otherwise Downlink
        u[(idx == 1) & (b > 0)] = int(Action.UPLINK)
        u[(idx == 1) & (b == 0)] = int(Action.DOWNLINK)
        u[idx == 2] = int(Action.DOWNLINK)
        return u


@dataclass(frozen=True)
class ThresholdRulePolicy:
    """Vectorized unfolded threshold rule: downlink iff y = 1 and |x| exceeds
    x*(tau, b); below it, the greedy Idle/Uplink choice at the nearest folded
    node."""

    thresholds: np.ndarray  # (tau_max + 1, B + 1), +inf where never downlink
    below: np.ndarray  # (tau_max + 1, 2, B + 1, n_nodes)
    dx: float
    tau_max: int
    name: str = "optimal"

    @classmethod
    def from_threshold_policy(cls, tp: ThresholdPolicy, name: str = "optimal"):
        n_tau, B1, n = tp.tau_max + 1, tp.B + 1, tp.x_nodes.size
        thr = np.full((n_tau, B1), np.inf)
        for (tau, b), v in tp.thresholds.items():
            thr[tau, b] = v
        below = np.zeros((n_tau, 2, B1, n), dtype=np.int64)
        for (tau, y, b), arr in tp.below_rule.items():
            below[tau, y, b, :] = arr
        return cls(thresholds=thr, below=below, dx=tp.dx, tau_max=tp.tau_max, name=name)

    def act_batch(self, t, x, tau, y, b, rand):
        tau_c = np.minimum(tau, self.tau_max)
        ax = np.abs(x)
        node = np.minimum(
            np.rint(ax / self.dx).astype(np.int64), self.below.shape[-1] - 1
        )
        u = self.below[tau_c, y, b, node]
        dn = (y == 1) & (ax >= self.thresholds[tau_c, b])
        return np.where(dn, int(Action.DOWNLINK), u)


def baseline_policy(kind: str):
    """Factory for benchmark policies; accepts ``periodic(k)`` with an
    explicit period."""
    kind = kind.strip()
    if kind == "never_act":
        return NeverActPolicy()
    if kind == "greedy_uplink":
        return GreedyUplinkPolicy()
    if kind == "random_admissible":
        return RandomAdmissiblePolicy()
    if kind == "periodic":
        return PeriodicPolicy()
    if kind.startswith("periodic(") and kind.endswith(")"):
        return PeriodicPolicy(k=int(kind[len("periodic(") : -1]))
    raise ValueError(
        f"unknown baseline {kind!r}; valid: never_act, periodic(k), "
        "greedy_uplink, random_admissible"
    )


# ---------------------------------------------------------------------------
# rollout engine


def _rollout_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _draw_inputs(stream: np.random.Generator, config: SimConfig, params: ModelParams, T: int):
    x0 = config.x0 if config.x0 is not None else float(stream.normal(0.0, 1.0))
    w = stream.normal(0.0, math.sqrt(params.sigma2), T)
    chan = stream.random(T)
    harv = stream.random(T)
    pol = stream.random(T)
    return x0, w, chan, harv, pol


def _run_batch(
    policy,
    params: ModelParams,
    config: SimConfig,
    T: int,
    x0: np.ndarray,
    w: np.ndarray,
    chan: np.ndarray,
    harv: np.ndarray,
    pol: np.ndarray,
    collect_trace: bool = False,
):
    """Advance a batch of rollouts in lockstep. Arrays are (n,) or (n, T)."""
    n = x0.size
    B = params.B
    a = params.a
    q_up, q_down = params.drop_up, params.drop_down
    cum = np.cumsum(params.harvest_probs)
    L = params.L

    x = x0.astype(float).copy()
    xhat = np.zeros(n)
    tau = np.full(n, config.tau0, dtype=np.int64)
    y = np.full(n, config.y0, dtype=np.int64)
    b = np.full(n, B if config.b0 is None else config.b0, dtype=np.int64)

    cost = np.zeros(n)
    counts = np.zeros((n, 3), dtype=np.int64)
    up_deliv = np.zeros(n, dtype=np.int64)
    dn_deliv = np.zeros(n, dtype=np.int64)
    age_sum = np.zeros(n, dtype=np.int64)
    b_min = b.copy()
    b_max = b.copy()
    max_sq = x * x
    disc = 1.0
    trace: list[tuple] | None = [] if collect_trace else None

    for t in range(T):
        u = np.asarray(policy.act_batch(t, x, tau, y, b, pol[:, t]), dtype=np.int64)
        bad = ((u == int(Action.UPLINK)) & (b == 0)) | ((u == int(Action.DOWNLINK)) & (y == 0))
        if bad.any():
            i = int(np.argmax(bad))
            raise PolicyFaultError(
                f"inadmissible action u={int(u[i])} at t={t}, state "
                f"(x={x[i]:.6g}, tau={int(tau[i])}, y={int(y[i])}, b={int(b[i])})"
            )
        step_cost = disc * x * x
        cost += step_cost

        up = u == int(Action.UPLINK)
        dn = u == int(Action.DOWNLINK)
        delivered = np.zeros(n, dtype=bool)
        delivered[up] = chan[up, t] < (1.0 - q_up)
        delivered[dn] = chan[dn, t] < (1.0 - q_down)

        if collect_trace:
            for i in range(n):
                trace.append(
                    (i, t, float(x[i]), float(xhat[i]), int(tau[i]), int(y[i]),
                     int(b[i]), int(u[i]), bool(delivered[i]), float(step_cost[i]))
                )

        v = np.where(dn & delivered, -a * xhat, 0.0)
        x_next = a * x + v + w[:, t]
        xhat = np.where(up & delivered, a * x, a * xhat)
        tau = np.where(up & delivered, 1, tau + 1)
        y = np.where(dn & delivered, 0, np.where(up & delivered, 1, y))
        ell = np.minimum(np.searchsorted(cum, harv[:, t], side="right"), L)
        b = np.minimum(b + ell - up.astype(np.int64), B)

        x = x_next
        disc *= params.beta
        np.maximum(max_sq, x * x, out=max_sq)
        np.minimum(b_min, b, out=b_min)
        np.maximum(b_max, b, out=b_max)
        counts[np.arange(n), u] += 1
        up_deliv += (up & delivered).astype(np.int64)
        dn_deliv += (dn & delivered).astype(np.int64)
        age_sum += tau

    return {
        "cost": cost,
        "counts": counts,
        "uplink_deliveries": up_deliv,
        "downlink_deliveries": dn_deliv,
        "mean_age": age_sum / T,
        "battery_min": b_min,
        "battery_max": b_max,
        "max_sq": max_sq,
        "trace": trace,
    }


def simulate_rollout(
    policy,
    params: ModelParams,
    config: SimConfig,
    stream: np.random.Generator,
    collect_trace: bool = False,
) -> RolloutResult:
    """Simulate one rollout of the exact continuous-state closed loop."""
    T = config.resolve_horizon(params.beta)
    x0, w, chan, harv, pol = _draw_inputs(stream, config, params, T)
    out = _run_batch(
        policy,
        params,
        config,
        T,
        np.array([x0]),
        w[None, :],
        chan[None, :],
        harv[None, :],
        pol[None, :],
        collect_trace=collect_trace,
    )
    return RolloutResult(
        discounted_cost=float(out["cost"][0]),
        action_counts=tuple(int(c) for c in out["counts"][0]),
        uplink_deliveries=int(out["uplink_deliveries"][0]),
        downlink_deliveries=int(out["downlink_deliveries"][0]),
        mean_age=float(out["mean_age"][0]),
        battery_min=int(out["battery_min"][0]),
        battery_max=int(out["battery_max"][0]),
        max_sq=float(out["max_sq"][0]),
        trace=out["trace"],
    )


def estimate_cost(
    policy,
    params: ModelParams,
    config: SimConfig,
    chunk_size: int = 10_000,
) -> tuple[float, float, dict]:
    """Average ``config.n_rollouts`` independent rollouts.

    Returns (mean, standard error, diagnostics). The per-rollout streams and
    the ordered reduction make the result independent of ``chunk_size``.
    """
    T = config.resolve_horizon(params.beta)
    n = config.n_rollouts
    costs = np.empty(n)
    counts = np.zeros(3, dtype=np.int64)
    up_d = 0
    dn_d = 0
    age_acc = 0.0
    max_sq = 0.0
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        m = stop - start
        x0 = np.empty(m)
        w = np.empty((m, T))
        chan = np.empty((m, T))
        harv = np.empty((m, T))
        pol = np.empty((m, T))
        for j in range(m):
            stream = _rollout_stream(config.seed, start + j)
            x0[j], w[j], chan[j], harv[j], pol[j] = _draw_inputs(
                stream, config, params, T
            )
        out = _run_batch(policy, params, config, T, x0, w, chan, harv, pol)
        costs[start:stop] = out["cost"]
        counts += out["counts"].sum(axis=0)
        up_d += int(out["uplink_deliveries"].sum())
        dn_d += int(out["downlink_deliveries"].sum())
        age_acc += float(out["mean_age"].sum())
        max_sq = max(max_sq, float(out["max_sq"].max()))
    mean = float(np.mean(costs))
    se = float(np.std(costs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    trunc_bound = params.beta**T * max_sq / (1.0 - params.beta)
    total = counts.sum()
    diagnostics = {
        "horizon": T,
        "n_rollouts": n,
        "seed": config.seed,
        "truncation_bound": trunc_bound,
        "idle_frac": float(counts[0] / total),
        "uplink_frac": float(counts[1] / total),
        "downlink_frac": float(counts[2] / total),
        "uplink_deliveries_per_rollout": up_d / n,
        "downlink_deliveries_per_rollout": dn_d / n,
        "mean_age": age_acc / n,
        "max_sq": max_sq,
    }
    return mean, se, diagnostics


def never_act_analytic_cost(params: ModelParams, T: int, x0_var: float = 1.0) -> float:
    """Truncated analytic discounted cost of the all-idle policy:
    sum over t < T of beta^t * (a^{2t} Var[x0] + sigma^2 (1 - a^{2t}) / (1 - a^2))."""
    a2 = params.a**2
    total = 0.0
    for t in range(T):
        if math.isclose(a2, 1.0, rel_tol=0.0, abs_tol=1e-15):
            var_t = x0_var + params.sigma2 * t
        else:
            var_t = a2**t * x0_var + params.sigma2 * (1.0 - a2**t) / (1.0 - a2)
        total += params.beta**t * var_t
    return total
