"""Tests for grids and discretized transition kernels: quadrature accuracy,
exact row-stochasticity, fold consistency, branch bookkeeping, round-trip."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wncs.kernel import (
    Grid,
    GridConfigError,
    build_grid,
    build_kernel,
    folded_gaussian_row,
    gaussian_row,
    load_kernel,
    psi,
    save_kernel,
    varphi,
)
from wncs.model import Action, ModelParams, admissible_actions, eps_tau


class TestBuildGrid:
    def test_symmetric_grid_shape_and_symmetry(self, params):
        g = build_grid(params, n_nodes=41, tau_max=6)
        assert g.n_x == 41
        assert g.x_nodes[20] == 0.0
        # bitwise sign symmetry
        assert np.array_equal(g.x_nodes, -g.x_nodes[::-1])
        assert g.x_nodes[-1] == g.x_max

    def test_folded_grid_is_nonnegative_half(self, params):
        gs = build_grid(params, n_nodes=41, tau_max=6)
        gf = build_grid(params, n_nodes=41, tau_max=6, folded=True)
        assert gf.n_x == 21
        assert np.array_equal(gf.x_nodes, gs.x_nodes[20:])

    def test_half_width_covers_widest_reset(self, params):
        g = build_grid(params, x_max_multiplier=5.0, n_nodes=41, tau_max=6)
        widest = max(eps_tau(t, params.a, params.sigma2) for t in range(7))
        assert g.x_max == pytest.approx(5.0 * math.sqrt(widest))

    def test_tau_next_saturates(self, params):
        g = build_grid(params, n_nodes=41, tau_max=6)
        assert g.tau_next(3) == 4
        assert g.tau_next(6) == 6

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_nodes": 40},
            {"n_nodes": 21},
            {"x_max_multiplier": 0.0},
            {"tau_max": 1},
        ],
    )
    def test_invalid_grid_params(self, params, kwargs):
        with pytest.raises(GridConfigError):
            build_grid(params, **{"n_nodes": 41, "tau_max": 6, **kwargs})

    def test_nearest_index(self, params):
        g = build_grid(params, n_nodes=41, tau_max=6)
        for i in (0, 7, 20, 40):
            assert g.nearest_index(float(g.x_nodes[i])) == i
        assert g.nearest_index(1e9) == 40
        assert g.nearest_index(-1e9) == 0


class TestGaussianRows:
    def test_row_is_stochastic_and_nonnegative(self, params):
        g = build_grid(params, n_nodes=41, tau_max=6)
        for c in (-3.0, 0.0, 0.7, g.x_max + 2.0):
            row = gaussian_row(c, 1.3, g)
            assert row.min() >= 0.0
            assert row.sum() == pytest.approx(1.0, abs=1e-14)

    def test_mean_matches_center_in_interior(self, params):
        g = build_grid(params, n_nodes=201, tau_max=6)
        for c in (-1.0, 0.0, 0.8):
            row = gaussian_row(c, 1.0, g)
            assert float(row @ g.x_nodes) == pytest.approx(c, abs=1e-3)

    def test_variance_matches_in_interior(self, params):
        g = build_grid(params, n_nodes=201, tau_max=6)
        row = gaussian_row(0.0, 1.0, g)
        assert float(row @ g.x_nodes**2) == pytest.approx(1.0, rel=2e-3)

    def test_tail_mass_lumped_on_boundary(self, params):
        g = build_grid(params, n_nodes=41, tau_max=6)
        row = gaussian_row(g.x_max + 5.0, 1.0, g)
        assert row[-1] > 0.9  # nearly all mass beyond the grid goes to the edge

    def test_folded_row_is_exact_fold_of_symmetric_row(self, params):
        gs = build_grid(params, n_nodes=41, tau_max=6)
        gf = build_grid(params, n_nodes=41, tau_max=6, folded=True)
        m = 20
        for c in (0.0, 0.9, 2.4):
            sym = gaussian_row(c, 1.3, gs) + gaussian_row(-c, 1.3, gs)
            sym /= sym.sum()
            fold = folded_gaussian_row(c, 1.3, gf)
            expected = np.empty(21)
            expected[0] = sym[m]
            expected[1:] = sym[m + 1 :] + sym[m - 1 :: -1]
            assert np.allclose(fold, expected, atol=1e-14)

    def test_folded_row_stochastic(self, params):
        gf = build_grid(params, n_nodes=41, tau_max=6, folded=True)
        for c in (0.0, 1.0, 5.0):
            row = folded_gaussian_row(c, 0.7, gf)
            assert row.min() >= 0.0
            assert row.sum() == pytest.approx(1.0, abs=1e-14)

    def test_grid_kind_enforced(self, params):
        gs = build_grid(params, n_nodes=41, tau_max=6)
        gf = build_grid(params, n_nodes=41, tau_max=6, folded=True)
        with pytest.raises(ValueError):
            gaussian_row(0.0, 1.0, gf)
        with pytest.raises(ValueError):
            folded_gaussian_row(0.0, 1.0, gs)
        with pytest.raises(ValueError):
            gaussian_row(0.0, 0.0, gs)

    def test_psi_varphi_identities(self):
        v = np.linspace(-2, 2, 9)
        assert np.allclose(psi(v, 2.0), np.exp(-(v**2) / 4.0))
        # varphi is even in the shift
        assert np.allclose(varphi(v, 1.3, 2.0), varphi(v, -1.3, 2.0))
        assert np.allclose(varphi(v, 0.0, 2.0), 2.0 * psi(v, 2.0))


@st.composite
def random_params(draw):
    probs = draw(
        st.lists(st.floats(0.01, 1.0), min_size=2, max_size=4).map(
            lambda ws: tuple(w / sum(ws) for w in ws)
        )
    )
    return ModelParams(
        a=draw(st.floats(-1.2, 1.2).filter(lambda v: abs(v) > 1e-3)),
        sigma2=draw(st.floats(0.1, 4.0)),
        p=draw(st.floats(0.0, 1.0)),
        beta=draw(st.floats(0.05, 0.95)),
        B=draw(st.integers(1, 4)),
        harvest_probs=probs,
    )


class TestBuildKernel:
    @given(p=random_params(), folded=st.booleans())
    @settings(max_examples=20, deadline=None)
    def test_rows_stochastic_under_random_params(self, p, folded):
        grid = build_grid(p, n_nodes=31, tau_max=3, folded=folded)
        k = build_kernel(p, grid)
        for m in k.matrices:
            assert m.min() >= 0.0
            assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)

    @given(p=random_params())
    @settings(max_examples=20, deadline=None)
    def test_branch_weights_sum_to_one(self, p):
        grid = build_grid(p, n_nodes=31, tau_max=3, folded=True)
        k = build_kernel(p, grid)
        for (tau, y, b, u), brs in k.branches.items():
            assert u in {int(a) for a in admissible_actions(y, b)}
            assert sum(br.weight for br in brs) == pytest.approx(1.0, abs=1e-12)

    def test_branches_exist_exactly_for_admissible_actions(self, small_kernels):
        kf, _ = small_kernels
        keys = set(kf.branches)
        expected = {
            (tau, y, b, int(u))
            for tau, y, b in kf.tyb_states()
            for u in admissible_actions(y, b)
        }
        assert keys == expected

    def test_age_saturation_and_uplink_reset(self, small_kernels):
        kf, _ = small_kernels
        tau_max = kf.grid.tau_max
        for br in kf.branches[(tau_max, 0, 2, int(Action.IDLE))]:
            assert br.tau_next == tau_max
        for br in kf.branches[(3, 0, 2, int(Action.UPLINK))]:
            if br.y_next == 1:  # delivered
                assert br.tau_next == 1
            else:
                assert br.tau_next == 4

    def test_battery_accounting(self, small_kernels):
        kf, _ = small_kernels
        B = kf.params.B
        for (tau, y, b, u), brs in kf.branches.items():
            for br in brs:
                assert 0 <= br.b_next <= B
                if u == int(Action.UPLINK):
                    assert br.b_next <= min(b - 1 + kf.params.L, B)
                else:
                    assert br.b_next >= min(b, B)

    def test_delivered_downlink_uses_reset_matrix(self, small_kernels):
        kf, _ = small_kernels
        for (tau, y, b, u), brs in kf.branches.items():
            for br in brs:
                if u == int(Action.DOWNLINK) and br.y_next == 0:
                    assert br.matrix_id == 1 + tau
                else:
                    assert br.matrix_id == 0

    def test_reset_row_second_moment_matches_eps_tau(self, params):
        grid = build_grid(params, n_nodes=201, tau_max=6, folded=True)
        k = build_kernel(params, grid)
        for tau in range(4):
            row = k.matrices[1 + tau][0]
            second = float(row @ grid.x_nodes**2)
            assert second == pytest.approx(
                eps_tau(tau, params.a, params.sigma2), rel=5e-3
            )

    def test_near_zero_noise_concentrates_at_drifted_node(self):
        p = ModelParams(a=0.5, sigma2=1e-6)
        grid = build_grid(p, n_nodes=41, tau_max=3)
        k = build_kernel(p, grid)
        i = 30
        target = grid.nearest_index(p.a * float(grid.x_nodes[i]))
        assert k.matrices[0][i].argmax() == target
        half = int(4 * math.sqrt(p.sigma2) / grid.dx) + 1  # four standard deviations
        window = k.matrices[0][i, max(target - half, 0) : target + half + 1]
        assert window.sum() > 0.99

    def test_save_load_round_trip(self, small_kernels, tmp_path):
        kf, _ = small_kernels
        path = tmp_path / "kernel.json"
        save_kernel(kf, path)
        back = load_kernel(path)
        assert back.params == kf.params
        assert back.grid.folded == kf.grid.folded
        assert np.array_equal(back.grid.x_nodes, kf.grid.x_nodes)
        assert len(back.matrices) == len(kf.matrices)
        for m1, m2 in zip(back.matrices, kf.matrices):
            assert np.array_equal(m1, m2)
        assert back.branches == kf.branches
