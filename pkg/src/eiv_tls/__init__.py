"""Total least squares for errors-in-variables regression with a known, possibly singular, error covariance."""
from .errors import (
    DimensionMismatch,
    EivTlsError,
    GapTooSmall,
    Incompatible,
    InfiniteEigenvalue,
    InvalidSpec,
    NoSolution,
    NonFinite,
    NonGeneric,
    NotPsd,
    PreconditionViolated,
    RankDeficient,
    SingularN,
)
from .harness import (
    ErrorLaw,
    ModelSpec,
    RegressorLaw,
    SimulationReport,
    brute_force_tls,
    check_perturbation_lemma,
    check_sin_bound,
    example21_spec,
    generate_dataset,
    run_consistency,
)
from .linalg import DEFAULT_TOL, ToleranceConfig, numerical_rank, pinv, projector
from .pencil import PencilDiagonalization, pencil_definite, simultaneous_diagonalize, variational_residual
from .subspace import SubspaceAngles, canonical_sines, max_sine, xhat_error_bound
from .tls import (
    ErrorCovariance,
    ObservationSet,
    TlsSolution,
    classical_tls_oracle,
    criterion_frobenius,
    criterion_spectral,
    estimate,
    minimal_correction,
    rayleigh_functional,
)

__version__ = "0.1.0"
