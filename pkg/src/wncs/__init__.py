"""Scheduling of uplink/downlink transmissions in a wireless networked
control system with an energy-harvesting sensor.

Subpackage layout:
    model    -- plant, estimator, channel, and battery primitives
    kernel   -- state-space grids and discretized transition kernels
    solver   -- value iteration and the finite-horizon oracle
    policy   -- threshold extraction and structural verification
    sim      -- closed-loop Monte Carlo evaluation
    cli      -- the ``wncs`` command-line entry point
"""

from wncs.model import Action, ModelParams, State

__all__ = ["Action", "ModelParams", "State"]

__version__ = "0.1.0"
