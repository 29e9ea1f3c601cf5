"""Streamline-reduced Navier-Stokes velocity fields with Hermite-interpolated geometry."""

from .batch import BatchJob, ExecutionStrategy, WorkItem, measure_speedup, solve_batch, verify_determinism
from .geometry import (
    PolylineSample,
    RotationEvolution,
    StreamlineCurve,
    check_tangent_alignment,
    make_helix,
    make_lobe,
    make_tooth,
    rotate_snapshot,
)
from .hermite import (
    HermiteSpline,
    assemble_block_matrix,
    batch_interpolate,
    block_matvec,
    density_number,
    hermite_segment,
    spline_derivative,
    spline_eval,
)
from .ode import (
    FluidProperties,
    InitialConditions,
    InverseMapConvention,
    PressureModel,
    SolverConfig,
    build_ode,
    chain_solve,
    gear_pump_ode,
    halve_step_order_check,
    integrate,
)

__version__ = "0.1.0"
