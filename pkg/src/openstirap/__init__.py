"""Open-system STIRAP in the generalized Bloch representation.

Submodules
----------
bloch        Gell-Mann basis and Bloch-vector conversions.
liouvillian  Lindblad models and their affine Bloch generators.
stirap       Three-level pulses, Hamiltonian and loss cases.
appendix     Printed closed-form generators and their audit.
spectral     Eigen-analysis, steady states and exceptional points.
propagator   Bloch and density-matrix time integration.
experiments  Scenario runners behind the command-line interface.
"""

from .bloch import (
    BlochValidationError,
    GellMannBasis,
    InvalidDimensionError,
    from_bloch,
    gellmann_basis,
    physicality,
    purity,
    structure_constants,
    to_bloch,
)
from .liouvillian import (
    InvalidRateError,
    LindbladModel,
    LiouvillianAffine,
    compile_affine,
    superoperator_apply,
)
from .propagator import (
    IntegratorConfig,
    StiffnessError,
    Trajectory,
    evolve_bloch,
    evolve_density,
    observables,
    random_pure_state,
)
from .spectral import (
    eigendecompose,
    ep_scan,
    liouvillian_gap,
    steady_state,
    track_branches,
)
from .stirap import (
    ConstantCouplings,
    PulseSchedule,
    StirapGenerator,
    adiabatic_frame,
    dark_bloch,
    dark_state,
    hamiltonian,
    stirap_model,
)

__version__ = "0.1.0"
