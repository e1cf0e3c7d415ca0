"""Integer-valued, invariant-preserving differentially private noise.

Constraint sets over histogram coordinates compile (via Smith normal form)
to an integer lattice of noise vectors that leave every constrained margin
untouched.  Laplace- and Gaussian-style targets on that lattice are sampled
with a seedable Metropolis chain, and lagged-coupling diagnostics estimate
how converged the chain is.
"""

__version__ = "0.1.0"

from .constraints import (
    ConstraintSet,
    Histogram,
    budget_compose,
    equivalent,
    full_rank_reduce,
    incidence_matrix,
    margins,
    partition_constraints,
    table_margin_constraints,
)
from .coupling import (
    MeetingTimeSample,
    TvBoundCurve,
    psrf,
    sample_meeting_time,
    sample_meeting_times,
    tv_bound_curve,
)
from .errors import (
    ConfigInvalid,
    EmptyLattice,
    InsufficientChains,
    LatticeDpError,
    MeetingTimeout,
    NegativePopulation,
    NotUnimodular,
    ParameterDomain,
    ParseError,
    RankDeficient,
    RejectionLimit,
)
from .intlinalg import (
    IntMatrix,
    LatticeBasis,
    SmithDecomposition,
    gram_determinant,
    lattice_basis,
    smith_normal_form,
    unimodular_inverse,
)
from .mechanism import (
    MechanismContext,
    MechanismSpec,
    Release,
    build_target,
    compile_constraints,
    noise_replicates,
    privatize,
)
from .noise import (
    DoubleGeometric,
    NoiseKind,
    NoiseTarget,
    calibration_constant,
    gaussian_sigma,
    log_target,
    sample_double_geometric,
    tail_constant_K,
    unit_ball_volume,
)
from .sampler import (
    ChainConfig,
    ChainContext,
    ChainState,
    ProposalSpec,
    metropolis_step,
    propose_jump,
    run_chain,
)
