"""Koopman-invariant subspace identification by principal-vector pruning."""

from .dictionary import Dictionary, Observable, monomials, precondition
from .errors import (
    DegenerateData,
    DimensionMismatch,
    KoopmanPruneError,
    NegativeRadicand,
    NotOrthonormal,
    OracleMismatch,
    RankDeficient,
    RankDeficientUpdate,
    ZeroFunction,
)
from .koopman import (
    KoopmanMatrices,
    LiftedData,
    PrincipalArguments,
    edmd,
    invariance_proximity,
    lift,
    principal_arguments,
    worst_case_edmd_error,
)
from .linalg import (
    CompactSVD,
    SymmetricEigUpdateState,
    ThinQR,
    compact_svd,
    incremental_qr,
    principal_angles,
    rank_one_eig_update,
    thin_qr,
)
from .model import LiftedModel, PredictionTrace, build_model, choose_dimension, predict, tradeoff_scan
from .pruning import (
    PruneConfig,
    PruneReport,
    SubspaceState,
    eigenfunction_distance,
    fast_recompute,
    hybrid_prune,
    mpv_prune,
    naive_recompute,
    prune,
    spv_prune,
)
from .systems import (
    ExperimentConfig,
    SnapshotSet,
    SystemSpec,
    generate_data,
    generate_snapshots,
    step_benchmark2d,
    step_van_der_pol,
)

__version__ = "0.1.0"
