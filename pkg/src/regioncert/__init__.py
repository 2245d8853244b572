"""Robustness certification of ReLU classifiers via linear-region geometry."""

from .certify import (
    CERTIFIED_LB,
    DEGENERATE,
    EXACT,
    MISCLASSIFIED,
    Certificate,
    DegeneratePointError,
    NeighborBudget,
    certified_robust_error,
    certify_point,
    explore_neighbors,
    region_distances,
)
from .geometry import (
    AllInfeasibleError,
    Box,
    BoxDistance,
    DeadPlaneError,
    box_constrained_distance,
    dual_exponent,
    hyperplane_projection,
    min_box_distance_over_planes,
    point_hyperplane_distance,
    vector_norm,
)
from .network import (
    DEGENERACY_TOL,
    ActivationPattern,
    AffineMap,
    ForwardTrace,
    Hyperplane,
    Network,
    activation_pattern,
    affine_apply,
    affine_coefficients,
    decision_hyperplanes,
    forward,
    forward_batch,
    predict,
    predict_batch,
    random_network,
    region_hyperplanes,
)
from .oracle import (
    NoAdversarialFoundError,
    OracleResult,
    enumerate_patterns_oracle,
    grid_oracle,
)
from .attack import (
    AttackConfig,
    AttackResult,
    empirical_robust_error,
    input_gradient,
    min_perturbation_upper_bound,
    pgd_attack,
)
from .mmr import (
    MMRConfig,
    TrainConfig,
    boundary_distances,
    classification_error,
    cross_entropy,
    flatten_params,
    kmmr_penalty,
    mmr_penalty,
    network_from_flat,
    objective,
    objective_gradient,
    signed_decision_distances,
    train,
)
from .data import (
    IdxFormatError,
    gen_digits,
    gen_synthetic,
    load_idx,
    save_idx_images,
    save_idx_labels,
)
from .modelio import (
    ModelFormatError,
    load_model,
    load_model_with_metadata,
    save_model,
)
from .plotting import pattern_raster, plot_regions, write_ppm
from .results import ResultRow, read_results, summarize, write_results

__version__ = "0.1.0"
