"""nlobs: design, certify and simulate state observers for nonlinear systems
whose nonlinearity admits a one-sided Lipschitz constant and a quadratic
inner bound.

The hot kernels (symmetric eigenvalues, fixed-step integration) run in a
compiled extension when available and in a bit-identical pure-Python twin
otherwise; `nlobs._kernels.BACKEND` says which one is active.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .certificates import (
    CertificateReport,
    Inequality,
    check_corollary1,
    check_theorem1,
    conservative_lipschitz_margin,
    construct_P,
    corollary1_block_margins,
    lyapunov_certificate,
    xi_value,
)
from .linalg import (
    SymmetricSpectrum,
    is_negative_definite,
    kernel_projector,
    log_norm2,
    right_pseudo_inverse,
    spectral_norm,
    sym_spectrum,
)
from .regularity import (
    QibReport,
    RegularityEstimate,
    SamplePlan,
    Witness,
    estimate_lipschitz,
    estimate_osl,
    estimate_regularity,
    implied_lipschitz_bound,
    qib_estimate,
    qib_region_radius,
    verify_qib,
)
from .simulate import (
    ErrorMetrics,
    LinearPolynomialField,
    SimulationTrace,
    error_metrics,
    integrate,
    plant_field,
    simulate_observer,
    write_csv,
)
from .synthesis import (
    FeasibilityWindow,
    IdentityPReport,
    ObserverDesign,
    check_weighted_osl_lmi,
    design_observer,
    feasibility_window,
    identity_P_analysis,
    max_admissible_rho,
    min_gain,
)
from .systems import (
    DynamicalSystem,
    Nonlinearity,
    PolyTerm,
    Region,
    builtin,
    eval_phi,
    eval_phi_batch,
    jacobian,
    parse_system,
    register_builtin,
    serialize_system,
)

__all__ = [name for name in dir() if not name.startswith("_")]
