"""Value iteration on the discretized MDP, plus a finite-horizon oracle.

Backups are synchronous (double buffered): the n+1 iterate is computed from
the n iterate everywhere, matching the textbook recursion exactly so the
finite-horizon oracle reproduces value iteration bit for bit.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from wncs.kernel import Kernel
from wncs.model import ModelParams


class ShapeMismatchError(ValueError):
    """Raised when a value array does not match the kernel's grid."""


@dataclass
class ValueTable:
    """Solved (or partially iterated) value function.

    ``V`` has shape (n_x, n_tyb); ``Q`` has shape (n_x, n_tyb, 3) with +inf
    at inadmissible actions; ``policy`` is the greedy action (lowest index
    wins ties).
    """

    kernel: Kernel
    V: np.ndarray
    Q: np.ndarray
    policy: np.ndarray
    iteration_count: int
    final_residual: float

    def value(self, i_x: int, tau: int, y: int, b: int) -> float:
        return float(self.V[i_x, self.kernel.tyb_index(tau, y, b)])

    def q_value(self, i_x: int, tau: int, y: int, b: int, u: int) -> float:
        return float(self.Q[i_x, self.kernel.tyb_index(tau, y, b), u])

    def action(self, i_x: int, tau: int, y: int, b: int) -> int:
        return int(self.policy[i_x, self.kernel.tyb_index(tau, y, b)])

    def rows(self):
        """Yield (x, tau, y, b, V, Q_idle, Q_uplink, Q_downlink, action)."""
        for tau, y, b in self.kernel.tyb_states():
            col = self.kernel.tyb_index(tau, y, b)
            for i, x in enumerate(self.kernel.grid.x_nodes):
                yield (
                    float(x),
                    tau,
                    y,
                    b,
                    float(self.V[i, col]),
                    float(self.Q[i, col, 0]),
                    float(self.Q[i, col, 1]),
                    float(self.Q[i, col, 2]),
                    int(self.policy[i, col]),
                )


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    final_residual: float
    tol: float
    residual_history: list[float] = field(default_factory=list)
    contraction_estimates: list[float] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "tol": self.tol,
            "residual_history": self.residual_history,
            "contraction_estimates": self.contraction_estimates,
            "wall_time": self.wall_time,
        }


def bellman_backup(
    V: np.ndarray, kernel: Kernel, params: ModelParams
) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous backup: Q = x^2 + beta * (branch-weighted expected V),
    new V = min over admissible actions."""
    n_x, n_tyb = kernel.grid.n_x, kernel.n_tyb
    if V.shape != (n_x, n_tyb):
        raise ShapeMismatchError(f"V has shape {V.shape}, expected {(n_x, n_tyb)}")
    x2 = kernel.grid.x_nodes**2
    Q = np.full((n_x, n_tyb, 3), np.inf)
    memo: dict[tuple[int, int], np.ndarray] = {}
    for (tau, y, b, u), brs in kernel.branches.items():
        col = kernel.tyb_index(tau, y, b)
        acc = np.zeros(n_x)
        for br in brs:
            key = (br.matrix_id, kernel.tyb_index(br.tau_next, br.y_next, br.b_next))
            hit = memo.get(key)
            if hit is None:
                hit = memo[key] = kernel.matrices[br.matrix_id] @ V[:, key[1]]
            acc = acc + br.weight * hit
        Q[:, col, u] = x2 + params.beta * acc
    return Q.min(axis=2), Q


def value_iteration(
    kernel: Kernel,
    params: ModelParams,
    tol: float = 1e-6,
    max_iter: int = 400,
) -> tuple[ValueTable, SolveReport]:
    """Iterate synchronous backups from V0 = 0 until the sup-norm update
    drops below ``tol``.

    Non-convergence within ``max_iter`` is reported, not raised. Divergent
    residual growth over 50 consecutive iterations aborts with a diagnostic
    (the finite-cost assumption fails for the given parameters).
    """
    if tol <= 0:
        raise ValueError(f"tol={tol} must be > 0")
    if max_iter < 0:
        raise ValueError(f"max_iter={max_iter} must be >= 0")
    if params.beta * params.a**2 >= 1.0:
        warnings.warn(
            f"beta * a^2 = {params.beta * params.a ** 2:.3g} >= 1: the discounted cost "
            "may be infinite; watching residuals for divergence",
            RuntimeWarning,
            stacklevel=2,
        )
    t0 = time.perf_counter()
    V = np.zeros((kernel.grid.n_x, kernel.n_tyb))
    Q = np.full((kernel.grid.n_x, kernel.n_tyb, 3), np.inf)
    history: list[float] = []
    converged = False
    growth_streak = 0
    for _ in range(max_iter):
        V_new, Q = bellman_backup(V, kernel, params)
        residual = float(np.max(np.abs(V_new - V)))
        V = V_new
        if history and residual > history[-1]:
            growth_streak += 1
            if growth_streak >= 50:
                raise RuntimeError(
                    "value iteration diverging: residual grew for 50 consecutive "
                    f"iterations (last residual {residual:.6g}); the finite-cost "
                    "assumption likely fails for these parameters"
                )
        else:
            growth_streak = 0
        history.append(residual)
        if residual < tol:
            converged = True
            break
    wall = time.perf_counter() - t0
    contraction = [
        history[i] / history[i - 1] for i in range(1, len(history)) if history[i - 1] > 0
    ]
    policy = np.argmin(Q, axis=2)
    table = ValueTable(
        kernel=kernel,
        V=V,
        Q=Q,
        policy=policy,
        iteration_count=len(history),
        final_residual=history[-1] if history else float("inf"),
    )
    report = SolveReport(
        converged=converged,
        iterations=len(history),
        final_residual=table.final_residual,
        tol=tol,
        residual_history=history,
        contraction_estimates=contraction,
        wall_time=wall,
    )
    return table, report


def finite_horizon_dp(kernel: Kernel, params: ModelParams, horizon: int) -> ValueTable:
    """Oracle: the horizon-N iterate computed by a plain recursion, written
    independently of :func:`value_iteration` (no memoization, no reporting)."""
    if horizon < 0:
        raise ValueError(f"horizon={horizon} must be >= 0")
    n_x, n_tyb = kernel.grid.n_x, kernel.n_tyb
    x2 = kernel.grid.x_nodes**2
    V = np.zeros((n_x, n_tyb))
    Q = np.full((n_x, n_tyb, 3), np.inf)
    residual = float("inf")
    for _ in range(horizon):
        Q = np.full((n_x, n_tyb, 3), np.inf)
        for (tau, y, b, u), brs in kernel.branches.items():
            col = kernel.tyb_index(tau, y, b)
            acc = np.zeros(n_x)
            for br in brs:
                nxt = kernel.tyb_index(br.tau_next, br.y_next, br.b_next)
                acc = acc + br.weight * (kernel.matrices[br.matrix_id] @ V[:, nxt])
            Q[:, col, u] = x2 + params.beta * acc
        V_next = Q.min(axis=2)
        residual = float(np.max(np.abs(V_next - V)))
        V = V_next
    return ValueTable(
        kernel=kernel,
        V=V,
        Q=Q,
        policy=np.argmin(Q, axis=2),
        iteration_count=horizon,
        final_residual=residual,
    )


CSV_COLUMNS = ["x", "tau", "y", "b", "V", "Q_idle", "Q_uplink", "Q_downlink", "action"]


def write_value_csv(table: ValueTable, path, header_lines: list[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in table.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def value_table_payload(table: ValueTable) -> dict:
    """JSON-ready dump of a solved table (arrays flat, row-major)."""
    return {
        "grid": table.kernel.grid.meta() | {"x_nodes": table.kernel.grid.x_nodes.tolist()},
        "shape": {"n_x": table.kernel.grid.n_x, "n_tyb": table.kernel.n_tyb},
        "V": table.V.ravel(order="C").tolist(),
        "Q": np.where(np.isinf(table.Q), None, table.Q).ravel(order="C").tolist(),
        "policy": table.policy.ravel(order="C").astype(int).tolist(),
        "iteration_count": table.iteration_count,
        "final_residual": table.final_residual,
    }


def value_table_from_payload(payload: dict, kernel: Kernel) -> ValueTable:
    n_x, n_tyb = payload["shape"]["n_x"], payload["shape"]["n_tyb"]
    if (n_x, n_tyb) != (kernel.grid.n_x, kernel.n_tyb):
        raise ShapeMismatchError(
            f"artifact shape {(n_x, n_tyb)} does not match kernel {(kernel.grid.n_x, kernel.n_tyb)}"
        )
    V = np.asarray(payload["V"], dtype=float).reshape(n_x, n_tyb)
    Q = np.asarray(
        [np.inf if q is None else q for q in payload["Q"]], dtype=float
    ).reshape(n_x, n_tyb, 3)
    policy = np.asarray(payload["policy"], dtype=int).reshape(n_x, n_tyb)
    return ValueTable(
        kernel=kernel,
        V=V,
        Q=Q,
        policy=policy,
        iteration_count=payload["iteration_count"],
        final_residual=payload["final_residual"],
    )
