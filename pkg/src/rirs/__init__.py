"""Rearrangement-invariant function spaces, risk measures and their tail behaviour."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapacityError,
    ConsistencyError,
    DomainError,
    EvaluationError,
    PreconditionError,
    RirsError,
    SpecError,
    StructureError,
)
from .measure import (  # noqa: E402
    Partition,
    StepVariable,
    common_refinement,
    comonotone_coupling,
    conditional_expectation,
    decreasing_rearrangement,
    lift_partition,
    place_equidistributed_copy,
    quantile,
    random_rearrangement,
    signed_decreasing_rearrangement,
)
from .orlicz import OrliczFunction  # noqa: E402
from .analytic import AnalyticRearrangement, DisjointSum, SignedVariable, integrate_g, truncate  # noqa: E402
from .norms import (  # noqa: E402
    NormSpec,
    appendix_b_norm,
    appendix_b_terms,
    hardy_littlewood_sup,
    heart_membership,
    l1_constant,
    lp_norm,
    luxemburg_norm,
)
from .order import distance_certificate, distance_to_oc_part, example21_rho, tail_norm_profile  # noqa: E402
from .risk import (  # noqa: E402
    Distortion,
    RiskMeasureSpec,
    coherence_suite,
    counterexample_rho,
    discretization_profile,
    distortion_rho,
    expected_shortfall,
    geometric_discretization,
    phi_sup,
)
from .fatou import FatouProbeReport, fatou_probe_lemma31, fatou_probe_truncation  # noqa: E402
from .aocea import (  # noqa: E402
    AoceaCertificate,
    aocea_orlicz_certificate,
    aocea_search_appendix_b,
    verify_appendix_b_chain,
)
from .averaging import blockwise_equidistributed_average, paired_swap_average  # noqa: E402
from .duality import DualGapReport, biconjugate, conjugate, dual_gap_sweep, proper_witness  # noqa: E402
