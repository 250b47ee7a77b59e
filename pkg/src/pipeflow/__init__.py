"""Unsteady mixed free-surface/pressurized flow in closed circular pipes.

A finite-volume solver library plus a scenario-driven CLI.  The public
surface re-exports the main building blocks:

- ``geometry``: circular-section maps and the discretised pipe,
- ``flowstate``: the unified pressure law, celerity, head, entropy, friction,
- ``riemann``: interface solvers (linearized fan and transition points),
- ``wellbalance``: classical vs exactly well-balanced linearization areas,
- ``solver``: CFL-driven explicit time loop and steady-state construction.
"""

from .flowstate import (
    FREE_SURFACE,
    PRESSURIZED,
    CellState,
    FlowRegime,
    PhysicalConstants,
)
from .geometry import CellGeometry, PipeGeometry
from .solver import (
    BoundaryCondition,
    Hydrograph,
    SimulationConfig,
    SimulationState,
    build_steady_state,
    run,
)
from .wellbalance import AtildeStrategy

__version__ = "0.1.0"

__all__ = [
    "FREE_SURFACE",
    "PRESSURIZED",
    "CellState",
    "FlowRegime",
    "PhysicalConstants",
    "CellGeometry",
    "PipeGeometry",
    "BoundaryCondition",
    "Hydrograph",
    "SimulationConfig",
    "SimulationState",
    "build_steady_state",
    "run",
    "AtildeStrategy",
    "__version__",
]
