"""Simulation lab for repeated three-district search congestion games
played through a shared information display.

The package covers the full experiment loop: deducing decision scenarios
from origin-destination trips, fitting the flow-to-pickups payoff model,
simulating hypothetical-outcome displays, running staged level-k data
collection with simulated agents, scoring against level-specific and
system outcomes, and reporting welfare/distribution-shift analytics. A
session service exposes the same machinery to human participants over
HTTP.
"""

from .core import (
    ActionSet,
    COLLINEAR_ACTION_SET,
    DEFAULT_ACTION_SET,
    District,
    FlowDistribution,
    LevelSplit,
    MixtureBelief,
    endowed_mixture,
    largest_remainder_round,
    level_counts,
    poisson_split,
    truncate_and_rescale,
)
from .counterfactual import (
    CounterfactualModel,
    DisplayPayload,
    DistrictFit,
    HypotheticalOutcomeSet,
    fit,
    load_model,
    pickup_probability,
    predict_pickups,
    save_model,
    simulate_hypothetical_outcomes,
    summarize_display,
)
from .harness import (
    AgentBehavior,
    CELLS,
    ExperimentConfig,
    TreatmentCell,
    build_artifacts,
    config_from_json,
    config_hash,
    config_to_json,
    load_run,
    run_experiment,
    run_replication,
    variant_config,
)
from .metrics import (
    GroundMetric,
    anticipation_error,
    best_response,
    distribution_shift,
    emd,
    transport_oracle,
    welfare_ratio,
)
from .outcomes import (
    FeedbackPayload,
    LevelOutcome,
    StagingViolationError,
    SystemOutcomeSet,
    level_specific_outcome,
    make_feedback,
    score_decision,
    system_outcome,
)
from .pipeline import (
    DecisionScenario,
    ScenarioSet,
    TripRecord,
    build_scenario,
    build_search_dyads,
    build_trace_dyads,
    deduce_decision,
    identify_candidates,
    ingest,
    load_scenarios,
    save_scenarios,
    select_target_days,
    stratify_trips,
)
from .synthetic import DayProfile, SyntheticSpec, generate_synthetic
from .welfare import WelfareOptimum, grid_search_max_pickups, max_welfare

__all__ = [name for name in dir() if not name.startswith("_")]
