"""``wncs`` command line: solve / verify / simulate / sweep.

Exit codes: 0 success, 1 usage or configuration error, 2 solver
non-convergence, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from wncs import artifacts
from wncs.config import ConfigError, RunConfig, apply_overrides, config_from_dict, load_config
from wncs.kernel import build_grid, build_kernel
from wncs.model import ModelParams
from wncs.policy import (
    StructureReport,
    UpsetViolationError,
    extract_thresholds,
    threshold_policy_from_payload,
    threshold_policy_payload,
    verify_evenness,
    verify_kernel_dominance,
    verify_monotonicity,
    verify_threshold_structure,
    write_threshold_csv,
)
from wncs.sim import (
    SimConfig,
    ThresholdRulePolicy,
    _rollout_stream,
    baseline_policy,
    estimate_cost,
    simulate_rollout,
)
from wncs.solver import (
    value_iteration,
    value_table_from_payload,
    value_table_payload,
    write_value_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_VERIFY_FAILED = 3

SWEEP_AXES = ("p", "beta", "B", "a", "sigma2")


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(
        config,
        tol=getattr(args, "tol", None),
        max_iter=getattr(args, "max_iter", None),
        grid_nodes=getattr(args, "grid_nodes", None),
        tau_max=getattr(args, "tau_max", None),
        x_max_mult=getattr(args, "x_max_mult", None),
        seed=getattr(args, "seed", None),
        n_rollouts=getattr(args, "n_rollouts", None),
        horizon=getattr(args, "horizon", None),
    )


def _solve_one(config: RunConfig, folded: bool):
    grid = build_grid(
        config.model,
        x_max_multiplier=config.grid.x_max_mult,
        n_nodes=config.grid.n_nodes,
        tau_max=config.grid.tau_max,
        folded=folded,
    )
    kernel = build_kernel(config.model, grid)
    table, report = value_iteration(
        kernel, config.model, tol=config.solver.tol, max_iter=config.solver.max_iter
    )
    return kernel, table, report


def cmd_solve(args) -> int:
    config = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config.to_dict()

    kernel, table, report = _solve_one(config, folded=True)
    header = artifacts.csv_header_lines("value_table", cfg)
    write_value_csv(table, out / "value_table.csv", header)
    artifacts.write_json_artifact(
        out / "value_table.json", "value_table", value_table_payload(table), cfg
    )
    artifacts.write_json_artifact(
        out / "solve_report.json", "solve_report", report.to_dict(), cfg
    )
    try:
        policy = extract_thresholds(table)
    except UpsetViolationError as exc:
        print(f"threshold extraction failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    write_threshold_csv(
        policy, out / "thresholds.csv", artifacts.csv_header_lines("thresholds", cfg)
    )
    artifacts.write_json_artifact(
        out / "thresholds.json", "thresholds", threshold_policy_payload(policy), cfg
    )
    if args.symmetric:
        _, table_sym, report_sym = _solve_one(config, folded=False)
        write_value_csv(
            table_sym,
            out / "value_table_symmetric.csv",
            artifacts.csv_header_lines("value_table_symmetric", cfg),
        )
        artifacts.write_json_artifact(
            out / "value_table_symmetric.json",
            "value_table_symmetric",
            value_table_payload(table_sym),
            cfg,
        )
        if not report_sym.converged:
            return EXIT_NO_CONVERGENCE
    if not report.converged:
        print(
            f"value iteration did not converge: residual {report.final_residual:.3g} "
            f"after {report.iterations} iterations (tol {report.tol:g})",
            file=sys.stderr,
        )
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _load_table(path: Path, expected_kind: str, config: RunConfig):
    doc = artifacts.read_json_artifact(path, expected_kind)
    if doc["config_hash"] != artifacts.config_hash(config.to_dict()):
        raise ConfigError(
            f"{path}: artifact config hash does not match the supplied config"
        )
    folded = doc["grid"]["folded"]
    grid = build_grid(
        config.model,
        x_max_multiplier=config.grid.x_max_mult,
        n_nodes=config.grid.n_nodes,
        tau_max=config.grid.tau_max,
        folded=folded,
    )
    kernel = build_kernel(config.model, grid)
    return kernel, value_table_from_payload(doc, kernel)


def cmd_verify(args) -> int:
    config = _resolve_config(args)
    table_path = Path(args.table)
    if not table_path.exists():
        print(f"value-table artifact not found: {table_path}", file=sys.stderr)
        return EXIT_USAGE
    kernel, table = _load_table(table_path, "value_table", config)
    if not kernel.grid.folded:
        print("verify expects a folded value_table artifact", file=sys.stderr)
        return EXIT_USAGE
    tol = 10.0 * config.solver.tol
    report = StructureReport(tolerance=tol)
    verify_monotonicity(table, report)
    verify_threshold_structure(table, report)
    verify_kernel_dominance(kernel, table.V, report)
    if args.symmetric_table:
        sym_path = Path(args.symmetric_table)
        if not sym_path.exists():
            print(f"symmetric artifact not found: {sym_path}", file=sys.stderr)
            return EXIT_USAGE
        _, table_sym = _load_table(sym_path, "value_table_symmetric", config)
        verify_evenness(table_sym, report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts.write_json_artifact(
        out / "structure_report.json", "structure_report", report.to_dict(), config.to_dict()
    )
    for name, ok in sorted(report.passes.items()):
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if report.all_pass else EXIT_VERIFY_FAILED


def _load_policy(path: Path):
    if path.suffix == ".csv":
        sibling = path.with_suffix(".json")
        if not sibling.exists():
            raise ConfigError(
                f"{path}: threshold CSV has no accompanying JSON artifact "
                f"({sibling.name}) carrying the below-threshold rule"
            )
        path = sibling
    doc = artifacts.read_json_artifact(path, "thresholds")
    return ThresholdRulePolicy.from_threshold_policy(
        threshold_policy_from_payload(doc), name="optimal"
    )


RESULT_COLUMNS = [
    "policy", "mean", "se", "n_rollouts", "horizon", "seed", "truncation_bound",
    "idle_frac", "uplink_frac", "downlink_frac", "mean_age",
]

TRACE_COLUMNS = ["rollout", "t", "x", "xhat", "tau", "y", "b", "u", "delivered", "cost"]


def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    policies = []
    if args.policy:
        policy_path = Path(args.policy)
        if not policy_path.exists():
            print(f"policy artifact not found: {policy_path}", file=sys.stderr)
            return EXIT_USAGE
        policies.append(_load_policy(policy_path))
    for name in (args.baselines.split(",") if args.baselines else []):
        policies.append(baseline_policy(name))
    if not policies:
        print("nothing to simulate: pass --policy and/or --baselines", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config.to_dict()
    rows = []
    results_json = []
    for policy in policies:
        mean, se, diag = estimate_cost(policy, config.model, config.sim)
        rows.append(
            [
                policy.name, repr(mean), repr(se), diag["n_rollouts"], diag["horizon"],
                diag["seed"], repr(diag["truncation_bound"]), repr(diag["idle_frac"]),
                repr(diag["uplink_frac"]), repr(diag["downlink_frac"]),
                repr(diag["mean_age"]),
            ]
        )
        results_json.append({"policy": policy.name, "mean": mean, "se": se, **diag})
        if args.trace:
            _write_trace(out / f"trace_{policy.name}.csv", policy, config, cfg)
    with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
        for line in artifacts.csv_header_lines("results", cfg):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        writer.writerows(rows)
    artifacts.write_json_artifact(
        out / "results.json", "results", {"results": results_json}, cfg
    )
    return EXIT_OK


def _write_trace(path: Path, policy, config: RunConfig, cfg: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in artifacts.csv_header_lines("trace", cfg):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for i in range(config.sim.n_rollouts):
            result = simulate_rollout(
                policy,
                config.model,
                config.sim,
                _rollout_stream(config.sim.seed, i),
                collect_trace=True,
            )
            for (_, t, x, xhat, tau, y, b, u, delivered, cost) in result.trace:
                writer.writerow(
                    [i, t, repr(x), repr(xhat), tau, y, b, u, int(delivered), repr(cost)]
                )


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    if args.axis not in SWEEP_AXES:
        print(f"invalid axis {args.axis!r}; valid: {', '.join(SWEEP_AXES)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        values = [
            int(v) if args.axis == "B" else float(v) for v in args.values.split(",")
        ]
    except ValueError:
        print(f"could not parse --values {args.values!r}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = config.to_dict()
    rows = []
    any_unconverged = False
    for value in values:
        d = config.to_dict()
        d["model"][args.axis] = value
        try:
            swept = config_from_dict(d)
        except ConfigError as exc:
            print(f"invalid sweep value {args.axis}={value}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        _, table, report = _solve_one(swept, folded=True)
        if not report.converged:
            any_unconverged = True
        policy = extract_thresholds(table)
        for (tau, b), x_star in sorted(policy.thresholds.items()):
            rows.append(
                [
                    args.axis, value, tau, b, repr(x_star),
                    repr(policy.refined_thresholds[(tau, b)]),
                ]
            )
    with open(out / "sweep_thresholds.csv", "w", encoding="utf-8", newline="") as fh:
        for line in artifacts.csv_header_lines("sweep_thresholds", base):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "tau", "b", "x_star", "refined_x_star"])
        writer.writerows(rows)
    return EXIT_NO_CONVERGENCE if any_unconverged else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wncs",
        description=(
            "Solve, verify, and simulate the uplink/downlink scheduling problem. "
            "Defaults (overridable via --config and flags): a=0.8, sigma2=1, p=0.2, "
            "beta=0.9, B=3, uniform harvest on {0,1,2}; grid 201 nodes, tau_max=25, "
            "x_max_mult=5; tol=1e-6, max_iter=400."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--grid-nodes", dest="grid_nodes", type=int)
        p.add_argument("--tau-max", dest="tau_max", type=int)
        p.add_argument("--x-max-mult", dest="x_max_mult", type=float)

    p_solve = sub.add_parser("solve", help="value iteration + threshold extraction")
    common(p_solve)
    p_solve.add_argument(
        "--symmetric", action="store_true",
        help="also solve the symmetric-grid problem (enables evenness checks)",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="structural checks on a solved table")
    common(p_verify)
    p_verify.add_argument("--table", required=True, help="value_table.json artifact")
    p_verify.add_argument(
        "--symmetric-table", dest="symmetric_table",
        help="value_table_symmetric.json artifact for the evenness check",
    )
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="Monte Carlo policy evaluation")
    common(p_sim)
    p_sim.add_argument("--policy", help="thresholds.json (or .csv) artifact")
    p_sim.add_argument("--baselines", help="comma list: never_act,periodic(k),greedy_uplink,random_admissible")
    p_sim.add_argument("--n-rollouts", dest="n_rollouts", type=int)
    p_sim.add_argument("--horizon", type=int)
    p_sim.add_argument("--trace", action="store_true", help="dump per-rollout traces")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="solve across a parameter axis")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
