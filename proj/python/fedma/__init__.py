"""Buffered asynchronous federated learning simulator.

Thin convenience layer over the compiled core: configs and results
cross the boundary as JSON, exposed here as plain dicts.
"""

import json as _json

from ._core import (
    calibrate_gamma,
    clip,
    least_squares_min_norm,
    momentum_matrix,
)
from . import _core as _c

__all__ = [
    "calibrate_gamma",
    "clip",
    "default_config",
    "diagnostics",
    "least_squares_min_norm",
    "momentum_matrix",
    "run_simulation",
    "simulate_staleness",
    "solve_ma_weights",
]


def default_config():
    return _json.loads(_c.default_config())


def run_simulation(config):
    return _json.loads(_c.run_simulation(_json.dumps(config)))


def simulate_staleness(config):
    return _c.simulate_staleness(_json.dumps(config))


def diagnostics(config):
    return _json.loads(_c.diagnostics(_json.dumps(config)))


def solve_ma_weights(config, t):
    return _c.solve_ma_weights(_json.dumps(config), t)
