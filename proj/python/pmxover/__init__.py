"""Pattern-mixture general linear model for paired 2x2 crossover data."""

from ._pmxover import (  # noqa: F401
    GroupEffects,
    GroupingScheme,
    InferenceResult,
    ModelFit,
    PairRecord,
    PmxError,
    Proportions,
    assign_group,
    classify,
    delta_variance,
    design_matrix,
    fit,
    interaction_contrast,
    mask_of,
    monotone_within_subject,
    parse_csv,
    pooled_means,
    selection_matrix,
    simulate_dataset,
    wald_p,
)

__all__ = [
    "GroupEffects",
    "GroupingScheme",
    "InferenceResult",
    "ModelFit",
    "PairRecord",
    "PmxError",
    "Proportions",
    "assign_group",
    "classify",
    "delta_variance",
    "design_matrix",
    "fit",
    "interaction_contrast",
    "mask_of",
    "monotone_within_subject",
    "parse_csv",
    "pooled_means",
    "selection_matrix",
    "simulate_dataset",
    "wald_p",
]
