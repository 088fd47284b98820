"""Finite-volume solver for scalar conservation laws on the periodic torus
with compactly supported multiplicative stochastic forcing.

Modules:
  mesh         uniform torus grids, quadrature, refinement
  flux         flux functions and monotone face fluxes
  noise        mode expansions, counter-based sampling, bridges
  scheme       split deterministic/stochastic time stepping
  kinetic      kinetic face fluxes, entropy fluxes, dissipation measures
  diagnostics  energy ledgers, weak-BV sums, moment bounds
  harness      convergence studies and Monte Carlo ensembles
  cli          command-line driver
"""

from .flux import FluxFunction, MonotoneFaceFlux, make_flux, validate_flux
from .mesh import TorusGrid, build_grid, cell_average
from .noise import ModeSpec, NoiseModel, build_cell_table
from .scheme import (BlowUpError, CFLError, State, TimeGrid, Trajectory,
                     cfl_time_grid, init_state, run)

__all__ = [
    "BlowUpError", "CFLError", "FluxFunction", "ModeSpec", "MonotoneFaceFlux",
    "NoiseModel", "State", "TimeGrid", "TorusGrid", "Trajectory",
    "build_cell_table", "build_grid", "cell_average", "cfl_time_grid",
    "init_state", "make_flux", "run", "validate_flux",
]

__version__ = "0.1.0"
