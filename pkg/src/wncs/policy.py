"""Threshold-policy extraction and numerical verification of the structural
results: evenness in x, monotonicity in x and battery level, the up-set
(threshold) form of the downlink region, and kernel dominance.

All verifiers are read-only over solved tables; tolerances default to ten
times the value-iteration tolerance so residual noise is not flagged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from wncs.kernel import Kernel
from wncs.model import Action
from wncs.solver import ValueTable


class UpsetViolationError(ValueError):
    """Greedy actions along x are not [non-Downlink..., Downlink...]."""

    def __init__(self, violations):
        self.violations = violations
        detail = ", ".join(
            f"(tau={t}, b={b}) at node {i}" for t, b, i in violations[:8]
        )
        super().__init__(f"downlink region is not an up-set in x: {detail}")


@dataclass
class ThresholdPolicy:
    """Threshold surface x*(tau, b) plus the Idle/Uplink rule used below the
    threshold (or when no control packet is available).

    ``below_rule[(tau, y, b)]`` is the greedy non-downlink action per folded
    x-node; ``thresholds`` maps (tau, b) to the first node where Downlink is
    greedy (+inf when Downlink is never chosen).
    """

    thresholds: dict[tuple[int, int], float]
    refined_thresholds: dict[tuple[int, int], float]
    below_rule: dict[tuple[int, int, int], np.ndarray]
    x_nodes: np.ndarray
    dx: float
    tau_max: int
    B: int
    grid_ref: dict = field(default_factory=dict)

    def decide(self, x: float, tau: int, y: int, b: int) -> int:
        """Full-line decision rule: downlink iff y = 1 and |x| >= x*(tau, b),
        otherwise the recorded Idle/Uplink choice at the nearest folded node."""
        tau_c = min(tau, self.tau_max)
        ax = abs(x)
        if y == 1 and ax >= self.thresholds[(tau_c, b)]:
            return int(Action.DOWNLINK)
        i = int(np.clip(round(ax / self.dx), 0, self.x_nodes.size - 1))
        return int(self.below_rule[(tau_c, y, b)][i])


def extract_thresholds(table: ValueTable) -> ThresholdPolicy:
    """Scan the greedy policy of a folded solve and read off x*(tau, b).

    Raises :class:`UpsetViolationError` (listing the violating nodes) if any
    downlink region is not an interval [x*, x_max].
    """
    kernel = table.kernel
    grid = kernel.grid
    if not grid.folded:
        raise ValueError("extract_thresholds expects a table solved on a folded grid")
    B = kernel.params.B
    thresholds: dict[tuple[int, int], float] = {}
    refined: dict[tuple[int, int], float] = {}
    below: dict[tuple[int, int, int], np.ndarray] = {}
    violations: list[tuple[int, int, int]] = []
    for tau in range(grid.n_tau):
        for b in range(B + 1):
            col = kernel.tyb_index(tau, 1, b)
            actions = table.policy[:, col]
            is_dn = actions == int(Action.DOWNLINK)
            if is_dn.any():
                first = int(np.argmax(is_dn))
                if not is_dn[first:].all():
                    bad = first + int(np.argmin(is_dn[first:]))
                    violations.append((tau, b, bad))
                    continue
                thresholds[(tau, b)] = float(grid.x_nodes[first])
                refined[(tau, b)] = _refine_crossing(table, tau, b, first)
            else:
                thresholds[(tau, b)] = math.inf
                refined[(tau, b)] = math.inf
            # below the threshold the greedy action is Idle/Uplink; at and
            # above it, fall back to the better of the two for unfolding
            q01 = table.Q[:, col, :2]
            nd = np.where(is_dn, np.argmin(q01, axis=1), actions)
            below[(tau, 1, b)] = nd.astype(int)
            below[(tau, 0, b)] = table.policy[:, kernel.tyb_index(tau, 0, b)].astype(int)
    if violations:
        raise UpsetViolationError(violations)
    return ThresholdPolicy(
        thresholds=thresholds,
        refined_thresholds=refined,
        below_rule=below,
        x_nodes=grid.x_nodes.copy(),
        dx=grid.dx,
        tau_max=grid.tau_max,
        B=B,
        grid_ref=grid.meta(),
    )


def _refine_crossing(table: ValueTable, tau: int, b: int, first: int) -> float:
    """Sub-grid threshold: linear interpolation of the zero crossing of
    Q(.;2) - min(Q(.;0), Q(.;1)) between the node before the flip and the
    flip node."""
    grid = table.kernel.grid
    if first == 0:
        return float(grid.x_nodes[0])
    col = table.kernel.tyb_index(tau, 1, b)
    gap = table.Q[:, col, 2] - np.minimum(table.Q[:, col, 0], table.Q[:, col, 1])
    g0, g1 = gap[first - 1], gap[first]
    if not np.isfinite(g0) or not np.isfinite(g1) or g0 == g1:
        return float(grid.x_nodes[first])
    t = g0 / (g0 - g1)
    t = min(max(t, 0.0), 1.0)
    return float(grid.x_nodes[first - 1] + t * grid.dx)


def unfold_policy(folded: ThresholdPolicy):
    """Decision rule on the full real line: act at (x, ...) as the folded
    policy acts at (|x|, ...)."""

    def rule(x: float, tau: int, y: int, b: int) -> int:
        return folded.decide(x, tau, y, b)

    return rule


@dataclass
class StructureReport:
    """Aggregated results of the structural verifiers."""

    tolerance: float
    evenness_max_dev: float | None = None
    evenness_action_mismatches: int | None = None
    monotone_x_violations: int = 0
    monotone_x_worst: float = 0.0
    monotone_b_violations: int = 0
    monotone_b_worst: float = 0.0
    upset_violations: int = 0
    c1_violations: int = 0
    c1_worst: float = 0.0
    c2_violations: int = 0
    dominance_violations: int = 0
    dominance_worst: float = 0.0
    passes: dict[str, bool] = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> dict:
        out = {
            k: v
            for k, v in self.__dict__.items()
            if k != "passes" and v is not None
        }
        out["passes"] = dict(self.passes)
        out["all_pass"] = self.all_pass
        return out


def verify_evenness(table_orig: ValueTable, report: StructureReport) -> StructureReport:
    """Check V(x) = V(-x) and matching greedy actions at mirror nodes of a
    symmetric-grid solve."""
    grid = table_orig.kernel.grid
    if grid.folded:
        raise ValueError("verify_evenness expects a symmetric-grid table")
    V = table_orig.V
    pol = table_orig.policy
    dev = float(np.max(np.abs(V - V[::-1, :])))
    mismatches = int(np.count_nonzero(pol != pol[::-1, :]))
    report.evenness_max_dev = dev
    report.evenness_action_mismatches = mismatches
    report.passes["evenness"] = dev <= report.tolerance and mismatches == 0
    return report


def verify_monotonicity(
    table_fold: ValueTable, report: StructureReport
) -> StructureReport:
    """Check V non-decreasing in x (per (tau, y, b)) and non-increasing in
    battery level (per (x, tau, y)) on a folded solve."""
    kernel = table_fold.kernel
    grid = kernel.grid
    if not grid.folded:
        raise ValueError("verify_monotonicity expects a folded-grid table")
    tol = report.tolerance
    V = table_fold.V
    dx_viol = 0
    dx_worst = 0.0
    db_viol = 0
    db_worst = 0.0
    for tau, y, b in kernel.tyb_states():
        col = kernel.tyb_index(tau, y, b)
        drops = V[:-1, col] - V[1:, col]
        bad = drops > tol
        dx_viol += int(np.count_nonzero(bad))
        if bad.any():
            dx_worst = max(dx_worst, float(drops[bad].max()))
        if b < kernel.params.B:
            rises = V[:, kernel.tyb_index(tau, y, b + 1)] - V[:, col]
            badb = rises > tol
            db_viol += int(np.count_nonzero(badb))
            if badb.any():
                db_worst = max(db_worst, float(rises[badb].max()))
    report.monotone_x_violations = dx_viol
    report.monotone_x_worst = dx_worst
    report.monotone_b_violations = db_viol
    report.monotone_b_worst = db_worst
    report.passes["monotone_x"] = dx_viol == 0
    report.passes["monotone_b"] = db_viol == 0
    return report


def verify_threshold_structure(
    table_fold: ValueTable, report: StructureReport
) -> StructureReport:
    """Numerical counterparts of the two conditions that make the optimal
    downlink rule a threshold in x: Q(.;2) - Q(.;1) non-increasing in x (with
    y = 1, b > 0), and the sign of Q(.;2) - Q(.;0) persisting once
    non-positive. Also counts up-set violations of the greedy downlink
    region."""
    kernel = table_fold.kernel
    grid = kernel.grid
    if not grid.folded:
        raise ValueError("verify_threshold_structure expects a folded-grid table")
    tol = report.tolerance
    c1_viol = 0
    c1_worst = 0.0
    c2_viol = 0
    upset = 0
    for tau in range(grid.n_tau):
        for b in range(kernel.params.B + 1):
            col = kernel.tyb_index(tau, 1, b)
            q0 = table_fold.Q[:, col, 0]
            q2 = table_fold.Q[:, col, 2]
            if b > 0:
                g = q2 - table_fold.Q[:, col, 1]
                rises = g[1:] - g[:-1]
                bad = rises > tol
                c1_viol += int(np.count_nonzero(bad))
                if bad.any():
                    c1_worst = max(c1_worst, float(rises[bad].max()))
            h = q2 - q0
            nonpos_seen = False
            for v in h:
                if nonpos_seen and v > tol:
                    c2_viol += 1
                if v <= 0.0:
                    nonpos_seen = True
            is_dn = table_fold.policy[:, col] == int(Action.DOWNLINK)
            if is_dn.any():
                first = int(np.argmax(is_dn))
                upset += int(np.count_nonzero(~is_dn[first:]))
    report.c1_violations = c1_viol
    report.c1_worst = c1_worst
    report.c2_violations = c2_viol
    report.upset_violations = upset
    report.passes["threshold_c1"] = c1_viol == 0
    report.passes["threshold_c2"] = c2_viol == 0
    report.passes["upset"] = upset == 0
    return report


def verify_kernel_dominance(
    kernel: Kernel, V: np.ndarray, report: StructureReport
) -> StructureReport:
    """Check that for a non-decreasing V on the folded grid, the expected
    next value under every drift branch is non-decreasing in the source node
    (delivered-downlink branches reset the state and are exempt)."""
    if not kernel.grid.folded:
        raise ValueError("verify_kernel_dominance expects a folded kernel")
    tol = report.tolerance
    viol = 0
    worst = 0.0
    checked: set[tuple[int, int]] = set()
    for brs in kernel.branches.values():
        for br in brs:
            if br.matrix_id != 0:
                continue  # reset rows are source-independent by construction
            key = (br.matrix_id, kernel.tyb_index(br.tau_next, br.y_next, br.b_next))
            if key in checked:
                continue
            checked.add(key)
            expect = kernel.matrices[br.matrix_id] @ V[:, key[1]]
            drops = expect[:-1] - expect[1:]
            bad = drops > tol
            viol += int(np.count_nonzero(bad))
            if bad.any():
                worst = max(worst, float(drops[bad].max()))
    report.dominance_violations = viol
    report.dominance_worst = worst
    report.passes["dominance"] = viol == 0
    return report


THRESHOLD_CSV_COLUMNS = ["tau", "b", "x_star", "refined_x_star"]


def write_threshold_csv(policy: ThresholdPolicy, path, header_lines=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(THRESHOLD_CSV_COLUMNS)
        for (tau, b), x_star in sorted(policy.thresholds.items()):
            writer.writerow([tau, b, repr(x_star), repr(policy.refined_thresholds[(tau, b)])])


def threshold_policy_payload(policy: ThresholdPolicy) -> dict:
    return {
        "grid": policy.grid_ref,
        "x_nodes": policy.x_nodes.tolist(),
        "dx": policy.dx,
        "tau_max": policy.tau_max,
        "B": policy.B,
        "thresholds": [
            {"tau": t, "b": b, "x_star": None if math.isinf(v) else v,
             "refined_x_star": None if math.isinf(policy.refined_thresholds[(t, b)])
             else policy.refined_thresholds[(t, b)]}
            for (t, b), v in sorted(policy.thresholds.items())
        ],
        "below_rule": [
            {"tau": t, "y": y, "b": b, "actions": arr.tolist()}
            for (t, y, b), arr in sorted(policy.below_rule.items())
        ],
    }


def threshold_policy_from_payload(payload: dict) -> ThresholdPolicy:
    thresholds = {}
    refined = {}
    for e in payload["thresholds"]:
        key = (e["tau"], e["b"])
        thresholds[key] = math.inf if e["x_star"] is None else float(e["x_star"])
        refined[key] = (
            math.inf if e["refined_x_star"] is None else float(e["refined_x_star"])
        )
    below = {
        (e["tau"], e["y"], e["b"]): np.asarray(e["actions"], dtype=int)
        for e in payload["below_rule"]
    }
    return ThresholdPolicy(
        thresholds=thresholds,
        refined_thresholds=refined,
        below_rule=below,
        x_nodes=np.asarray(payload["x_nodes"], dtype=float),
        dx=float(payload["dx"]),
        tau_max=int(payload["tau_max"]),
        B=int(payload["B"]),
        grid_ref=payload.get("grid", {}),
    )
