"""Tests for value iteration: convergence, contraction rate, the independent
finite-horizon oracle, admissibility of the greedy policy, serialization."""

import csv
import math

import numpy as np
import pytest

from wncs.kernel import build_grid, build_kernel
from wncs.model import Action, ModelParams, admissible_actions
from wncs.solver import (
    CSV_COLUMNS,
    ShapeMismatchError,
    bellman_backup,
    finite_horizon_dp,
    value_iteration,
    value_table_from_payload,
    value_table_payload,
    write_value_csv,
)


class TestBellmanBackup:
    def test_shape_mismatch_rejected(self, small_kernels, params):
        kf, _ = small_kernels
        with pytest.raises(ShapeMismatchError):
            bellman_backup(np.zeros((3, 3)), kf, params)

    def test_first_backup_is_stage_cost(self, small_kernels, params):
        kf, _ = small_kernels
        V0 = np.zeros((kf.grid.n_x, kf.n_tyb))
        V1, Q = bellman_backup(V0, kf, params)
        x2 = kf.grid.x_nodes**2
        assert np.allclose(V1, x2[:, None])
        # inadmissible actions carry +inf
        col = kf.tyb_index(0, 0, 0)
        assert np.isinf(Q[:, col, int(Action.UPLINK)]).all()
        assert np.isinf(Q[:, col, int(Action.DOWNLINK)]).all()

    def test_iterates_nondecreasing_in_horizon(self, small_kernels, params):
        """Costs are non-negative and V0 = 0, so the finite-horizon values
        increase with the horizon."""
        kf, _ = small_kernels
        V = np.zeros((kf.grid.n_x, kf.n_tyb))
        for _ in range(5):
            V_next, _ = bellman_backup(V, kf, params)
            assert (V_next >= V - 1e-12).all()
            V = V_next


class TestValueIteration:
    def test_converges_on_small_instance(self, small_folded_solve):
        table, report = small_folded_solve
        assert report.converged
        assert report.final_residual < 1e-8
        assert report.iterations <= 400

    def test_contraction_at_discount_rate(self, small_folded_solve, params):
        _, report = small_folded_solve
        ratios = report.contraction_estimates[5:]
        assert ratios, "expected contraction estimates after warm-up"
        assert max(ratios) <= params.beta + 0.01

    def test_not_converged_reported_not_raised(self, small_kernels, params):
        kf, _ = small_kernels
        table, report = value_iteration(kf, params, tol=1e-8, max_iter=1)
        assert not report.converged
        assert report.iterations == 1
        assert table.final_residual > 1e-8

    def test_invalid_arguments(self, small_kernels, params):
        kf, _ = small_kernels
        with pytest.raises(ValueError):
            value_iteration(kf, params, tol=0.0)
        with pytest.raises(ValueError):
            value_iteration(kf, params, max_iter=-1)

    def test_expanding_cost_warns(self):
        p = ModelParams(a=1.2, beta=0.8)  # beta * a^2 > 1
        grid = build_grid(p, n_nodes=31, tau_max=3, folded=True)
        k = build_kernel(p, grid)
        with pytest.warns(RuntimeWarning):
            value_iteration(k, p, tol=1e-6, max_iter=2)

    def test_greedy_policy_is_admissible(self, small_folded_solve):
        table, _ = small_folded_solve
        kernel = table.kernel
        for tau, y, b in kernel.tyb_states():
            col = kernel.tyb_index(tau, y, b)
            allowed = {int(u) for u in admissible_actions(y, b)}
            assert set(np.unique(table.policy[:, col])) <= allowed

    def test_value_positive_and_bounded(self, small_folded_solve, params):
        table, _ = small_folded_solve
        assert (table.V >= 0.0).all()
        # crude upper bound: cost of never acting from the largest state
        x_max = table.kernel.grid.x_max
        bound = (x_max**2 + params.sigma2 / (1 - params.a**2)) / (1 - params.beta)
        assert table.V.max() <= bound

    def test_accessors_consistent(self, small_folded_solve):
        table, _ = small_folded_solve
        k = table.kernel
        assert table.value(0, 2, 1, 3) == table.V[0, k.tyb_index(2, 1, 3)]
        assert table.q_value(5, 2, 1, 3, 0) == table.Q[5, k.tyb_index(2, 1, 3), 0]
        assert table.action(5, 2, 1, 3) == table.policy[5, k.tyb_index(2, 1, 3)]


class TestFiniteHorizonOracle:
    @pytest.mark.parametrize("horizon", [1, 3, 10])
    def test_bitwise_match_with_value_iteration(self, small_kernels, params, horizon):
        """The independently written recursion reproduces the main solver's
        N-th iterate bit for bit."""
        kf, _ = small_kernels
        vi_table, _ = value_iteration(kf, params, tol=1e-300, max_iter=horizon)
        dp_table = finite_horizon_dp(kf, params, horizon)
        assert np.array_equal(vi_table.V, dp_table.V)
        finite = np.isfinite(dp_table.Q)
        assert np.array_equal(finite, np.isfinite(vi_table.Q))
        assert np.array_equal(vi_table.Q[finite], dp_table.Q[finite])
        assert np.array_equal(vi_table.policy, dp_table.policy)

    def test_horizon_zero_is_zero(self, small_kernels, params):
        kf, _ = small_kernels
        table = finite_horizon_dp(kf, params, 0)
        assert not table.V.any()

    def test_negative_horizon_rejected(self, small_kernels, params):
        kf, _ = small_kernels
        with pytest.raises(ValueError):
            finite_horizon_dp(kf, params, -1)


class TestSerialization:
    def test_payload_round_trip(self, small_folded_solve):
        table, _ = small_folded_solve
        payload = value_table_payload(table)
        back = value_table_from_payload(payload, table.kernel)
        assert np.array_equal(back.V, table.V)
        finite = np.isfinite(table.Q)
        assert np.array_equal(np.isfinite(back.Q), finite)
        assert np.array_equal(back.Q[finite], table.Q[finite])
        assert np.array_equal(back.policy, table.policy)

    def test_payload_shape_checked(self, small_folded_solve, small_symmetric_solve):
        table, _ = small_folded_solve
        other, _ = small_symmetric_solve
        payload = value_table_payload(table)
        with pytest.raises(ShapeMismatchError):
            value_table_from_payload(payload, other.kernel)

    def test_csv_round_trip_values(self, small_folded_solve, tmp_path):
        table, _ = small_folded_solve
        path = tmp_path / "values.csv"
        write_value_csv(table, path, header_lines=["kind=value_table"])
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        rows = list(csv.reader(lines))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) - 1 == table.kernel.grid.n_x * table.kernel.n_tyb
        # repr round-trips floats exactly
        first = rows[1]
        assert float(first[4]) == table.V[0, 0]
