"""Pointwise-Lipschitz selections of convex-valued correspondences over
sampled metric spaces, and positively homogeneous right inverses of linear
surjections built from them."""

from .bartle_graves import (
    RightInverse,
    build_right_inverse,
    evaluate_right_inverse,
    openness_constant,
    sphere_sample,
    verify_right_inverse,
)
from .convex import AffineFlat, Ball, ConvexBody, Polytope
from .correspondence import (
    Correspondence,
    LinearSurjection,
    LowerPtlipCheck,
    check_lower_ptlip,
    inverse_image_correspondence,
    local_strong_selection,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateRadiusError,
    IdentifierError,
    InvariantViolationError,
    LipselectError,
    ParameterError,
    PreconditionError,
    RankDeficiencyError,
    RateError,
    ResolutionError,
    SchemaError,
    ShapeError,
)
from .iteration import (
    IterationConfig,
    LimitSelection,
    RoundRecord,
    Selection,
    SelectionSequence,
    blend_round,
    bump_weight,
    compute_delta,
    limit_selection,
    run_iteration,
    verify_round_properties,
    verify_sequence,
)
from .lipschitz import (
    PlipProfile,
    SphereTable,
    cantor_function,
    cantor_plateaus,
    default_radii,
    global_lipschitz_upgrade_check,
    homogeneous_extension,
    open_closed_consistency,
    plip_profile,
    verify_homogeneous_plip,
)
from .metric import (
    SampledMetricSpace,
    SeparationHierarchy,
    ball_points,
    build_separation_hierarchy,
    covering_radius,
    distance,
    greedy_maximal_separation,
)

__version__ = "0.1.0"
