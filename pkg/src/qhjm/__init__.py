"""Quantum-assisted principal-component reduction for multi-factor
forward-rate Monte Carlo.

The package pairs a gate-level statevector simulator (with trajectory
depolarizing noise and controlled-unitary synthesis) with a classical
forward-rate engine: covariance factors extracted either by a dense
eigensolver or by the iterative phase-estimation pipeline feed the same
curve evolution and bond pricing machinery.
"""

__version__ = "0.1.0"

from .circuits import Circuit, GateOp, inverse_qft, inverse_qft_ops
from .errors import (
    AmbiguityError,
    DegenerateProjectionError,
    NumericalError,
    QhjmError,
    ValidationError,
)
from .hjm import (
    CovarianceMatrix,
    ForwardCurve,
    HjmConfig,
    PathResult,
    VolatilityFactorSet,
    bond_price,
    drift,
    estimate_covariance,
    evolve,
    extract_factors,
    flat_curve,
    martingale_check,
    quantum_extract_factors,
    read_history_csv,
)
from .linalg import (
    SpectralDecomposition,
    eigh,
    expm_unitary,
    normalize_to_density,
)
from .qpca import (
    AmbiguityReport,
    IterationTrace,
    QpcaConfig,
    QpcaResult,
    build_qpca_circuit,
    check_ambiguity,
    extract_leading_component,
    nearest_bitstring,
    qpca_iterate,
    qpe_refine,
    recover_phases,
)
from .simulator import (
    NoiseModel,
    ShotHistogram,
    basis_state,
    fidelity,
    project_register,
    run_circuit,
    run_trajectories,
    sample_shots,
)
from .synthesis import (
    decompose_controlled_unitary,
    entangling_count,
    synthesize_circuit,
)

__all__ = [name for name in dir() if not name.startswith("_")]
