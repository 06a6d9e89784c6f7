"""Finite-volume solver for scalar conservation laws with Dirac-measure data.

The solution is a nonnegative measure: cell averages for the regular part
plus point masses that sit on cell interfaces and decay at rates fixed by
the flux values visible from each side.
"""

__version__ = "0.1.0"

from .evolution import SolverConfig, Trajectory, run, run_synchronized, step
from .flux import FluxModel, builtin
from .riemann import solve_modified_riemann, solve_standard_riemann
from .state import Atom, Grid, MeasureState, from_config, total_mass

__all__ = [
    "__version__",
    "Atom",
    "FluxModel",
    "Grid",
    "MeasureState",
    "SolverConfig",
    "Trajectory",
    "builtin",
    "from_config",
    "run",
    "run_synchronized",
    "solve_modified_riemann",
    "solve_standard_riemann",
    "step",
    "total_mass",
]
