"""Shared fixtures: small instances for unit tests, the canonical instance
(solved once per session) for acceptance and policy tests."""

from __future__ import annotations

import pytest

from wncs.kernel import build_grid, build_kernel
from wncs.model import ModelParams
from wncs.solver import value_iteration


CANONICAL = ModelParams(
    a=0.8, sigma2=1.0, p=0.2, beta=0.9, B=3, harvest_probs=(1 / 3, 1 / 3, 1 / 3)
)


@pytest.fixture(scope="session")
def params() -> ModelParams:
    return CANONICAL


@pytest.fixture(scope="session")
def small_kernels(params):
    """Folded and symmetric kernels on a coarse grid (fast unit-test target)."""
    gf = build_grid(params, n_nodes=41, tau_max=6, folded=True)
    gs = build_grid(params, n_nodes=41, tau_max=6, folded=False)
    return build_kernel(params, gf), build_kernel(params, gs)


@pytest.fixture(scope="session")
def small_folded_solve(params, small_kernels):
    kf, _ = small_kernels
    table, report = value_iteration(kf, params, tol=1e-8, max_iter=400)
    assert report.converged
    return table, report


@pytest.fixture(scope="session")
def small_symmetric_solve(params, small_kernels):
    _, ks = small_kernels
    table, report = value_iteration(ks, params, tol=1e-8, max_iter=400)
    assert report.converged
    return table, report


@pytest.fixture(scope="session")
def canonical_folded_solve(params):
    """Canonical instance: 201 symmetric nodes, tau_max=25, folded grid.

    Solved at tol=1e-8 so two independent solves agree well below the 1e-5
    comparison tolerances used by the structural checks.
    """
    grid = build_grid(params, x_max_multiplier=5.0, n_nodes=201, tau_max=25, folded=True)
    kernel = build_kernel(params, grid)
    table, report = value_iteration(kernel, params, tol=1e-8, max_iter=400)
    assert report.converged
    return kernel, table, report


@pytest.fixture(scope="session")
def canonical_symmetric_solve(params):
    grid = build_grid(params, x_max_multiplier=5.0, n_nodes=201, tau_max=25, folded=False)
    kernel = build_kernel(params, grid)
    table, report = value_iteration(kernel, params, tol=1e-8, max_iter=400)
    assert report.converged
    return kernel, table, report
