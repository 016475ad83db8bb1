"""State-space grids and discretized transition kernels.

The continuous plant state is truncated to a uniform grid. Transition
densities are discretized by midpoint quadrature (density times spacing),
tail mass beyond the grid is lumped onto the boundary nodes, and every row
is renormalized to exact row-stochasticity so value iteration contracts at
rate beta.

A kernel is stored as a branch factorization: per (tau, y, b, action) a
list of weighted branches, each carrying the probability of its discrete
(tau+, y+, b+) outcome and a row-stochastic matrix over plant-state nodes.
All Gaussian rows for a given source grid share one matrix; the post-control
reset rows depend only on tau, so the whole kernel references at most
``tau_max + 2`` distinct matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from wncs.model import Action, ModelParams, admissible_actions, eps_tau


class GridConfigError(ValueError):
    """Raised for invalid grid construction parameters."""


@dataclass(frozen=True)
class Grid:
    """Uniform plant-state grid, either symmetric on [-x_max, x_max] or
    folded onto [0, x_max]."""

    x_nodes: np.ndarray
    dx: float
    x_max: float
    tau_max: int
    folded: bool

    @property
    def n_x(self) -> int:
        return self.x_nodes.size

    @property
    def n_tau(self) -> int:
        return self.tau_max + 1

    def tau_next(self, tau: int) -> int:
        return min(tau + 1, self.tau_max)

    def nearest_index(self, x: float) -> int:
        lo = float(self.x_nodes[0])
        return int(np.clip(round((x - lo) / self.dx), 0, self.n_x - 1))

    def meta(self) -> dict:
        return {
            "n_x": self.n_x,
            "dx": self.dx,
            "x_max": self.x_max,
            "tau_max": self.tau_max,
            "folded": self.folded,
        }


def build_grid(
    params: ModelParams,
    x_max_multiplier: float = 5.0,
    n_nodes: int = 201,
    tau_max: int = 25,
    folded: bool = False,
) -> Grid:
    """Build the plant-state grid.

    The half-width is ``x_max_multiplier`` standard deviations of the widest
    post-control noise sum over ages up to ``tau_max``. ``n_nodes`` counts the
    symmetric grid; a folded grid keeps the ``ceil(n_nodes / 2)`` non-negative
    nodes. ``n_nodes`` must be odd (so 0 is a node) and at least 31.
    """
    if n_nodes < 31 or n_nodes % 2 == 0:
        raise GridConfigError(f"n_nodes={n_nodes} must be odd and >= 31")
    if x_max_multiplier <= 0:
        raise GridConfigError(f"x_max_multiplier={x_max_multiplier} must be > 0")
    if tau_max < 2:
        raise GridConfigError(f"tau_max={tau_max} must be >= 2")

    widest = max(eps_tau(t, params.a, params.sigma2) for t in range(tau_max + 1))
    x_max = x_max_multiplier * math.sqrt(widest)
    m = (n_nodes - 1) // 2
    dx = x_max / m
    positive = dx * np.arange(1, m + 1)
    positive[-1] = x_max
    if folded:
        nodes = np.concatenate(([0.0], positive))
    else:
        # exact sign symmetry: negative nodes are bitwise negations
        nodes = np.concatenate((-positive[::-1], [0.0], positive))
    nodes.setflags(write=False)
    return Grid(x_nodes=nodes, dx=dx, x_max=x_max, tau_max=tau_max, folded=folded)


def _cell_weights(centered: np.ndarray, variance: float) -> np.ndarray:
    # midpoint rule: normalized density times spacing; caller adds tails
    return np.exp(-(centered**2) / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)


def gaussian_row(center: float, variance: float, grid: Grid) -> np.ndarray:
    """Discretize N(center, variance) onto a symmetric grid.

    Midpoint quadrature per node cell; mass beyond the outermost cell edges
    is added to the boundary nodes; the row is renormalized to sum to 1.
    """
    if variance <= 0.0:
        raise ValueError(f"variance={variance} must be > 0")
    if grid.folded:
        raise ValueError("gaussian_row requires a symmetric grid; use folded_gaussian_row")
    x = grid.x_nodes
    sd = math.sqrt(variance)
    row = _cell_weights(x - center, variance) * grid.dx
    row[0] += ndtr((x[0] - grid.dx / 2.0 - center) / sd)
    row[-1] += 1.0 - ndtr((x[-1] + grid.dx / 2.0 - center) / sd)
    return row / row.sum()


def folded_gaussian_row(center_abs: float, variance: float, grid: Grid) -> np.ndarray:
    """Discretize the folded density N(x; c, v) + N(-x; c, v) onto [0, x_max].

    Constructed as the exact fold of :func:`gaussian_row`: node 0 carries a
    single (half) weight, the boundary node absorbs both tails.
    """
    if variance <= 0.0:
        raise ValueError(f"variance={variance} must be > 0")
    if not grid.folded:
        raise ValueError("folded_gaussian_row requires a folded grid")
    if center_abs < 0.0:
        raise ValueError(f"center_abs={center_abs} must be >= 0")
    x = grid.x_nodes
    sd = math.sqrt(variance)
    row = (_cell_weights(x - center_abs, variance) + _cell_weights(-x - center_abs, variance)) * grid.dx
    row[0] = _cell_weights(np.array([-center_abs]), variance)[0] * grid.dx
    row[-1] += ndtr((-x[-1] - grid.dx / 2.0 - center_abs) / sd)
    row[-1] += 1.0 - ndtr((x[-1] + grid.dx / 2.0 - center_abs) / sd)
    return row / row.sum()


def psi(v: np.ndarray | float, z: float) -> np.ndarray | float:
    """Unnormalized Gaussian kernel exp(-v^2 / (2 z))."""
    return np.exp(-(np.asarray(v, dtype=float) ** 2) / (2.0 * z))


def varphi(v: np.ndarray | float, s: float, z: float) -> np.ndarray | float:
    """Folding kernel psi(v - s, z) + psi(v + s, z); even in ``s``."""
    v = np.asarray(v, dtype=float)
    return psi(v - s, z) + psi(v + s, z)


@dataclass(frozen=True)
class Branch:
    """One weighted outcome of a (state, action) pair: the probability of
    the discrete (tau+, y+, b+) branch and the plant-state transition matrix
    (by index into the kernel's shared matrix list)."""

    weight: float
    tau_next: int
    y_next: int
    b_next: int
    matrix_id: int


@dataclass
class Kernel:
    """Discretized transition operator of the scheduling MDP."""

    grid: Grid
    params: ModelParams
    matrices: list[np.ndarray]
    branches: dict[tuple[int, int, int, int], list[Branch]]

    @property
    def n_tyb(self) -> int:
        return self.grid.n_tau * 2 * (self.params.B + 1)

    def tyb_index(self, tau: int, y: int, b: int) -> int:
        return (tau * 2 + y) * (self.params.B + 1) + b

    def tyb_states(self):
        for tau in range(self.grid.n_tau):
            for y in (0, 1):
                for b in range(self.params.B + 1):
                    yield tau, y, b


def build_kernel(params: ModelParams, grid: Grid) -> Kernel:
    """Materialize the branch-factorized kernel on ``grid``.

    Idle and uplink attempts (and downlink drops) move the plant through the
    open-loop Gaussian; a delivered downlink resets the plant to the
    accumulated noise sum with variance eps_tau(tau), independent of the
    source node.
    """
    n = grid.n_x
    if grid.folded:
        drift = np.vstack(
            [folded_gaussian_row(abs(params.a * xi), params.sigma2, grid) for xi in grid.x_nodes]
        )
        reset_rows = [
            folded_gaussian_row(0.0, eps_tau(t, params.a, params.sigma2), grid)
            for t in range(grid.n_tau)
        ]
    else:
        drift = np.vstack(
            [gaussian_row(params.a * xi, params.sigma2, grid) for xi in grid.x_nodes]
        )
        reset_rows = [
            gaussian_row(0.0, eps_tau(t, params.a, params.sigma2), grid)
            for t in range(grid.n_tau)
        ]

    matrices: list[np.ndarray] = [drift]
    for row in reset_rows:
        matrices.append(np.tile(row, (n, 1)))
    DRIFT = 0

    def reset_id(tau: int) -> int:
        return 1 + tau

    B = params.B
    q_up, q_down = params.drop_up, params.drop_down
    harvest = [(ell, w) for ell, w in enumerate(params.harvest_probs) if w > 0.0]

    branches: dict[tuple[int, int, int, int], list[Branch]] = {}
    for tau in range(grid.n_tau):
        tnext = grid.tau_next(tau)
        for y in (0, 1):
            for b in range(B + 1):
                for u in sorted(admissible_actions(y, b)):
                    out: list[Branch] = []
                    if u == Action.IDLE:
                        for ell, w in harvest:
                            out.append(Branch(w, tnext, y, min(b + ell, B), DRIFT))
                    elif u == Action.UPLINK:
                        for ell, w in harvest:
                            b_up = min(b + ell - 1, B)
                            if q_up > 0.0:
                                out.append(Branch(w * q_up, tnext, y, b_up, DRIFT))
                            if q_up < 1.0:
                                out.append(Branch(w * (1.0 - q_up), 1, 1, b_up, DRIFT))
                    else:
                        for ell, w in harvest:
                            b_dn = min(b + ell, B)
                            if q_down > 0.0:
                                out.append(Branch(w * q_down, tnext, 1, b_dn, DRIFT))
                            if q_down < 1.0:
                                out.append(
                                    Branch(w * (1.0 - q_down), tnext, 0, b_dn, reset_id(tau))
                                )
                    branches[(tau, y, b, int(u))] = out
    return Kernel(grid=grid, params=params, matrices=matrices, branches=branches)


def save_kernel(kernel: Kernel, path) -> None:
    """Write the kernel as a self-describing JSON artifact: header with grid,
    parameters, and build decisions, plus flat row-major probability arrays."""
    payload = {
        "schema_version": 1,
        "kind": "kernel",
        "grid": kernel.grid.meta() | {"x_nodes": kernel.grid.x_nodes.tolist()},
        "params": {
            "a": kernel.params.a,
            "sigma2": kernel.params.sigma2,
            "p": kernel.params.p,
            "p_up": kernel.params.p_up,
            "p_down": kernel.params.p_down,
            "beta": kernel.params.beta,
            "B": kernel.params.B,
            "harvest_probs": list(kernel.params.harvest_probs),
        },
        "build_decisions": {
            "quadrature": "midpoint, tail mass lumped on boundary nodes, rows renormalized",
            "age_truncation": "tau increments saturate at tau_max",
            "normalization": "proper Gaussian densities",
        },
        "matrices": [m.ravel(order="C").tolist() for m in kernel.matrices],
        "branches": [
            {
                "tau": k[0],
                "y": k[1],
                "b": k[2],
                "action": k[3],
                "out": [
                    [br.weight, br.tau_next, br.y_next, br.b_next, br.matrix_id]
                    for br in v
                ],
            }
            for k, v in kernel.branches.items()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_kernel(path) -> Kernel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    g = payload["grid"]
    nodes = np.asarray(g["x_nodes"], dtype=float)
    nodes.setflags(write=False)
    grid = Grid(
        x_nodes=nodes,
        dx=g["dx"],
        x_max=g["x_max"],
        tau_max=g["tau_max"],
        folded=g["folded"],
    )
    pp = payload["params"]
    params = ModelParams(
        a=pp["a"],
        sigma2=pp["sigma2"],
        p=pp["p"],
        beta=pp["beta"],
        B=pp["B"],
        harvest_probs=tuple(pp["harvest_probs"]),
        p_up=pp.get("p_up"),
        p_down=pp.get("p_down"),
    )
    n = grid.n_x
    matrices = [np.asarray(m, dtype=float).reshape(n, n) for m in payload["matrices"]]
    branches = {
        (e["tau"], e["y"], e["b"], e["action"]): [
            Branch(w, tn, yn, bn, mid) for w, tn, yn, bn, mid in e["out"]
        ]
        for e in payload["branches"]
    }
    return Kernel(grid=grid, params=params, matrices=matrices, branches=branches)
