"""Phase-space simulation of Gaussian-branched cat states.

Hybrid qubit-oscillator systems whose Hamiltonian is at most quadratic in the
mode quadratures, with coefficients diagonal in the qubit ``sigma_z`` basis,
keep every block ``rho_JK`` of the joint density matrix Gaussian.  The state
is then fully described by per-block covariances, means and log-amplitudes,
which this package evolves (closed forms or Riccati integration), measures
(qubit POVMs, general-dyne detections) and cross-checks against a brute-force
Fock-space master-equation oracle.
"""

from .dynamics import (
    IntegratorConfig,
    Trajectory,
    closed_form_linear_open,
    closed_form_linear_unitary,
    closed_form_trajectory,
    diagonal_closed_form,
    integrate,
    rhs_open,
)
from .errors import ConfigError, EngineIncompatibility, GCSError, NumericalFailure, RegressionFailure
from .measurement import (
    CVMixture,
    GeneralDyne,
    QubitPOVM,
    computational_povm,
    expectation_product,
    general_dyne,
    generaldyne_density,
    generaldyne_post_qrdm,
    heterodyne,
    homodyne_cov,
    joint_measurement_density,
    negativity_two_qubit,
    pauli_povm,
    postselect_success_probability,
    qubit_measure,
    sample_outcomes,
)
from .model import (
    HybridModel,
    B_from_noise,
    ladder_noise_to_canonical,
    loss_B,
    noise_from_B,
    noise_from_bath_coupling,
    resolve_branch,
)
from .phase_space import (
    BranchQuantities,
    GaussianState,
    GCSState,
    branch_labels,
    eval_branched_char,
    eval_branched_wigner,
    modes_reduced_moments,
    product_state,
    qrdm,
    symplectic_form,
    validate_state,
)
from .regressions import regression_eval
from .scenarios import ScenarioConfig, run_scenario, scenario_dispersive, scenario_stern_gerlach

__version__ = "0.1.0"
