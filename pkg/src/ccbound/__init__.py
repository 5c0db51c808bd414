"""Lower bounds for coded caching via labeled directed in-trees.

The package derives inequalities ``alpha * R* + beta * M >= L`` from
labeled trees, assembles the best known lower bound on the optimal
delivery rate, estimates saturation numbers (the least file count that
maxes out such an inequality), and verifies the multiplicative gap of at
most four between the achievable rate and the bound.
"""

from .bounds import (
    CdbFamilyParams,
    GapReport,
    SearchConfig,
    achievable_rate,
    cdb_bound,
    cdb_family_parameters,
    cutset_bound,
    gap,
    han_bound,
    m_grid_with_corners,
    proposed_bound,
    proposed_inequality,
    uncoded_rate,
    verify_gap_le_4,
)
from .errors import (
    CodedCachingError,
    InfeasibleError,
    InputError,
    InvalidInstanceError,
    MalformedTreeError,
    SaturationError,
    SaturationNotFoundError,
    SearchLimitError,
)
from .labeling import (
    LabelingResult,
    PsiTable,
    augment_with_new_file,
    directional_recovery,
    inequality_of,
    permute_users,
    psi_table,
    rec,
    run_labeling,
)
from .model import (
    CacheSize,
    DemandVector,
    Inequality,
    Node,
    ProblemInstance,
    RatePoint,
    SystemParams,
    Tree,
    TreeBuilder,
    instance_from_json,
    instance_to_json,
    is_normalized,
    meeting_point,
    normalize_in_degree,
    topological_order,
    validate,
)
from .saturation import (
    BruteForceLimits,
    SaturationEstimate,
    build_saturating_instance,
    nsat_exact_bruteforce,
    nsat_upper_analytic,
    nsat_upper_best,
    nsat_upper_construction,
    nsat_upper_recursive,
    reuse_files,
)
from .variants import (
    MultiRequestGapReport,
    MultiRequestParams,
    d2d_bound,
    multirequest_achievable,
    multirequest_gap_verify,
    multirequest_inequality,
    multirequest_lower_bound,
)

__version__ = "0.1.0"
