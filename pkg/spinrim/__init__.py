from spinrim.network import (
    Controller,
    HamiltonianSS,
    SpinNetwork,
    Topology,
    build_hamiltonian,
    transfer_targets
)
from spinrim.liouville import LiouvilleSystem, hermitian_basis
from spinrim.dephasing import DephasingSet, StrengthGrid, generate_set
from spinrim.dynamics import (
    ErrorGrid,
    compute_error_grid,
    fidelity_error,
    perturbed_error
)
from spinrim.sensitivity import SensitivityRecord, sensitivity_record
from spinrim.rim import RimCurve, rim1_curve, theorem1_check
from spinrim.stats import kendall_tau, tau_significance
from spinrim.optimizer import (
    Algorithm,
    ControllerSet,
    OptimizationConfig,
    synthesize_set
)
