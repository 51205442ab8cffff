"""trajqed: jump-type quantum trajectories for engineered cavity-QED reservoirs.

Two complementary experiment families are covered: a beam of three-level
atoms crossing a cavity in two resonant stages (the atoms act as a
monitored thermal bath for the field) and a stationary three-level atom
whose decay is channelled through a very lossy two-mode cavity (the
field acts as a monitored bath for the atom).  A generalised
unravelling layer mixes jump and no-jump channels with arbitrary
unitaries, so the same average dynamics can be monitored in many
different conditional ways.
"""

__version__ = "0.1.0"

from ._kernels import backend_name
from .qstate import (
    DensityMatrix,
    HilbertLayout,
    OperatorMatrix,
    StateVector,
    annihilation_op,
    basis_state,
    expectation,
    fock_state,
    identity_op,
    number_op,
    partial_trace,
    tensor_product,
    trace_distance,
    transition_op,
)
from .liouville import LindbladModel, dissipator, integrate, lindblad_rhs
from .unraveller import (
    ChannelSet,
    EnsembleResult,
    TrajectoryRecord,
    build_jump_channels,
    derive_seed,
    ensemble_average,
    expand_jump_mixing,
    mix_channels,
    trajectory_step,
)
from .atom_reservoir import (
    SchemeAParams,
    detection_kraus,
    engineered_rates,
    jc_stage_propagator,
    quadrature_rotation,
    repeated_interaction_run,
    rotation_gi,
    stage_propagators,
    thermal_flux_ratio,
)
from .purcell_reservoir import (
    SchemeBParams,
    detector_basis,
    effective_jump_channels,
    effective_model,
    effective_rates,
    full_model,
    reduced_compare,
)
from .entanglement import concurrence, protection_run
