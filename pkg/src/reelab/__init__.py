"""Relative-entropy distances to convex sets of free quantum states.

A dense-matrix toolbox for finite-dimensional quantum systems: entropic
functionals with extended-value conventions, free-set models (separable,
partition-separable, positive partial transpose, finite hulls) with
linear-minimization oracles, a conditional-gradient solver for the distance
``inf_sigma D(rho || sigma)`` with certified brackets, and a harness that
measures the distance along converging state sequences and compares observed
convergence against the sufficient conditions the construction realizes.
"""

from .channels import (
    QuantumOperation,
    identity_operation,
    local_projection_operation,
    local_unitary_operation,
    random_isometry_channel,
    unitary_operation,
)
from .entropy import (
    BOTH_INFINITE,
    MISMATCH,
    MutualInformationResult,
    cross_entropy,
    eta,
    factorization_residual,
    mutual_information,
    relative_entropy,
    relative_entropy_via_expansion,
    von_neumann_entropy,
)
from .errors import (
    DegenerateOperationError,
    FreeConeViolationError,
    NumericalConsistencyError,
    OracleConvergenceError,
    SamplingCapError,
    SupportViolationError,
)
from .freesets import (
    ConvexHull,
    FreeSetModel,
    FullySeparable,
    GroupedLayout,
    LmoResult,
    OracleConfig,
    PiSeparable,
    Ppt,
    ProductPureState,
    closest_product_state,
    group_layout,
    lmo,
    necessary_membership_check,
    sample_free_state,
)
from .operators import (
    DensityOperator,
    HermitianOperator,
    Partition,
    PartitionSet,
    PositiveOperator,
    SystemLayout,
    finest_partition,
    frechet_log,
    hs_inner,
    partial_trace,
    partial_transpose,
    permute_factors,
    spectral_apply,
    support_projector,
    tensor,
    trace_norm,
)
from .sequences import (
    ConvergenceReport,
    HarnessConfig,
    MarginalReport,
    ModelReport,
    Provenance,
    SequenceRow,
    StateSequence,
    WitnessConditionReport,
    WitnessSequence,
    check_witness_condition,
    compute_burn_in,
    gen_constant,
    gen_dominated,
    gen_lsc_gap,
    gen_mixture,
    gen_pushforward,
    lsc_gap_weights,
    marginal_product_witness,
    marginal_reports,
    model_label,
    predict_clauses,
    revalidate_sequence,
    run_continuity_harness,
)
from .solver import SolverConfig, SolverResult, free_distance, relent_gradient
from .states import (
    bell_state,
    dm,
    ket,
    maximally_entangled_ket,
    maximally_mixed,
    random_density,
    random_faithful_density,
    random_product_pure,
    random_pure_ket,
    random_unitary,
)
from .verify import VerifySummary, run_identity_suites

__version__ = "0.1.0"
