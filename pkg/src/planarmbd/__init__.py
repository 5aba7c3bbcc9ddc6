"""Planar rigid multibody dynamics with tangent-space Newmark integration.

The package simulates planar mechanisms described by bodies with
(x, y, theta) coordinates, revolute joints and force elements. Implicit
integration is available both in the classical augmented index-3 form and
on a per-step tangent chart of the constraint manifold, which restores the
linear stability behavior of the unconstrained integrator and satisfies
position, velocity and acceleration constraints simultaneously.
"""

from .errors import AssemblyError, SingularMassError, StepDivergenceError
from .integrators import (
    CENTRAL_DIFFERENCE,
    CLASSICAL_INDEX3,
    FOX_GOODWIN,
    METHODS,
    NEWMARK_MINIMAL,
    TANGENT_NEWMARK,
    TRAPEZOIDAL,
    TUNED,
    MinimalSystem,
    NewmarkParams,
    StepConfig,
    StepRecord,
    Trajectory,
    consistent_minimal_state,
    newmark_kinematics,
    simulate,
    step_central_difference,
    step_classical_index3,
    step_newmark_minimal,
    step_tangent_newmark,
)
from .linsolve import (
    max_generalized_frequency,
    min_norm_solve,
    multi_min_norm_solve,
    null_space_basis,
)
from .model import (
    GROUND,
    AppliedTorque,
    Body,
    Gravity,
    LinearSpringDamper,
    MultibodyModel,
    RevoluteJoint,
    SystemState,
    TorsionalSpringDamper,
    assemble_position,
    consistent_initial_state,
    constraint_jacobian,
    constraints,
    force_vector,
    jacobian_ddot,
    jacobian_dot,
    linearize_equilibrium,
    mass_matrix,
    mechanical_energy,
    recover_multipliers,
)
from .stability import (
    StabilityReport,
    newmark_dt_limit,
    reduced_frequency,
    sdof_amplification_matrix,
    spectral_radius,
    trajectory_frequency_timeline,
)
from .tangent import (
    TangentFrame,
    build_tangent_frame,
    project_state,
    reconstruct_acceleration,
    reconstruct_position,
    reconstruct_velocity,
    reduce_equilibrium,
    rotate_basis,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
