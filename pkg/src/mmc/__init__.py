"""Mixtures of low-rank matrices: models, sampling patterns, completion,
alternating recovery, and an experiment harness.

The data model lives in `mmc.model`; synthetic problem generation in
`mmc.synth`; identifiability checks for sampling patterns in `mmc.patterns`;
single-matrix low-rank completion in `mmc.lrmc`; the alternating mixture
solver in `mmc.ammc`; and experiment drivers (phase grids, rate campaigns,
the built-in ambiguity example, image mixing) in `mmc.harness`.
"""

from .ammc import (
    AmmcOptions,
    AmmcResult,
    ClusterState,
    ClusterStepResult,
    CompleteStepResult,
    cluster_step,
    complete_step,
    erase,
    estimate_coefficient,
    run_ammc,
    verify_mixture,
)
from .harness import (
    CampaignResult,
    MatchResult,
    MixTrialResult,
    MixedImages,
    PhaseGrid,
    SuiteReport,
    TrialRecord,
    SUCCESS_THRESHOLD,
    classification_error,
    counterexample_instance,
    desk_phase_preset,
    full_phase_preset,
    match_and_score,
    mix_images,
    read_grid_csv,
    read_pgm,
    read_trial_log,
    run_counterexample_suite,
    run_mix_trial,
    run_phase_grid,
    run_rate_bound_campaign,
    write_grid_csv,
    write_pgm,
    write_trial_log,
)
from .lrmc import (
    CompletionResult,
    LrmcOptions,
    complete_lowrank,
    leading_subspace,
    truncate_rank,
)
from .model import (
    NA_TOKEN,
    AssignmentMasks,
    LowRankFactorization,
    MixtureProblem,
    ObservedMixture,
    as_mask,
    as_matrix,
    column_restrict,
    masks_union,
    read_assignment,
    read_mask,
    read_matrix,
    read_observed,
    write_assignment,
    write_mask,
    write_matrix,
    write_observed,
)
from .patterns import (
    PatternReport,
    RateBound,
    check_pattern_exhaustive,
    check_pattern_flow,
    min_column_samples,
    min_observation_rate,
    search_partition,
    verify_partition,
    violates,
)
from .seeding import derive_seed, substream
from .synth import (
    SynthConfig,
    generate_mixture,
    max_perturbation,
    perturb_subspaces,
    sample_fixed_m,
    subspace_distance,
)

__version__ = "0.1.0"

__all__ = [
    "AmmcOptions",
    "AmmcResult",
    "AssignmentMasks",
    "CampaignResult",
    "ClusterState",
    "ClusterStepResult",
    "CompleteStepResult",
    "CompletionResult",
    "LowRankFactorization",
    "LrmcOptions",
    "MatchResult",
    "MixTrialResult",
    "MixedImages",
    "MixtureProblem",
    "NA_TOKEN",
    "ObservedMixture",
    "PatternReport",
    "PhaseGrid",
    "RateBound",
    "SUCCESS_THRESHOLD",
    "SuiteReport",
    "SynthConfig",
    "TrialRecord",
    "as_mask",
    "as_matrix",
    "check_pattern_exhaustive",
    "check_pattern_flow",
    "classification_error",
    "cluster_step",
    "column_restrict",
    "complete_lowrank",
    "complete_step",
    "counterexample_instance",
    "derive_seed",
    "desk_phase_preset",
    "erase",
    "estimate_coefficient",
    "full_phase_preset",
    "generate_mixture",
    "leading_subspace",
    "masks_union",
    "match_and_score",
    "max_perturbation",
    "min_column_samples",
    "min_observation_rate",
    "mix_images",
    "perturb_subspaces",
    "read_assignment",
    "read_grid_csv",
    "read_mask",
    "read_matrix",
    "read_observed",
    "read_pgm",
    "read_trial_log",
    "run_ammc",
    "run_counterexample_suite",
    "run_mix_trial",
    "run_phase_grid",
    "run_rate_bound_campaign",
    "sample_fixed_m",
    "search_partition",
    "subspace_distance",
    "substream",
    "truncate_rank",
    "verify_mixture",
    "verify_partition",
    "violates",
    "write_assignment",
    "write_grid_csv",
    "write_mask",
    "write_matrix",
    "write_observed",
    "write_pgm",
    "write_trial_log",
]
