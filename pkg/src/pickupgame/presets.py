"""Ready-made desk-scale experiment configurations.

The calibrated corpus pins per-day flow and pickup profiles so the
derived quantities are known by construction: the displayed pickup
probability peaks in the west district on thirteen scored trials and in
the north district on the two others, while the level-2 best response is
the east district on every trial once the level-1 crowd is accounted
for. Conversion curves are power laws chosen so those argmax margins are
wide enough (>= 0.05 in probability) to survive model fitting and
Monte-Carlo noise.
"""

from __future__ import annotations

import math
from datetime import date

from .harness import AgentBehavior, ExperimentConfig
from .seeds import derive_rng
from .synthetic import DayProfile, SyntheticSpec, target_days

CONVERSION = (1.914, 3.14, 3.79)
CONVERSION_EXPONENT = (0.75, 0.55, 0.55)

# scored-trial flow profiles in main presentation order; entry 0 is the
# practice day. Trials 4 and 9 flood the west district so the north
# district tops the display.
TRIAL_FLOWS = (
    (300, 160, 140),
    (300, 158, 140),
    (290, 170, 150),
    (310, 150, 145),
    (600, 70, 180),
    (280, 165, 155),
    (320, 160, 130),
    (305, 148, 147),
    (295, 172, 133),
    (620, 65, 170),
    (315, 155, 150),
    (285, 162, 151),
    (300, 166, 144),
    (330, 150, 138),
    (290, 155, 153),
    (308, 152, 148),
)

NORTH_DISPLAY_TRIALS = (4, 9)

TRAINING_FLOW_RANGES = ((250, 650), (45, 200), (100, 250))


def _expected_pickups(flow: int, district: int) -> int:
    raw = CONVERSION[district] * flow ** CONVERSION_EXPONENT[district]
    return max(1, min(flow, round(raw)))


def trial_profile(flows: tuple[int, int, int]) -> DayProfile:
    return DayProfile(
        flows=flows,
        pickups=tuple(_expected_pickups(f, d) for d, f in enumerate(flows)),
    )


def calibrated_spec(
    artifact_seed: int = 0,
    n_training_days: int = 45,
    warmup_days: int = 8,
    prior_mix: float = 0.1,
) -> SyntheticSpec:
    """Synthetic corpus: stochastic training days plus the pinned trials."""
    profiles: list[DayProfile] = []
    for i in range(n_training_days):
        rng = derive_rng(artifact_seed, "training-profile", i)
        flows = tuple(
            int(rng.integers(lo, hi + 1)) for lo, hi in TRAINING_FLOW_RANGES
        )
        pickups = []
        for d, f in enumerate(flows):
            noise = math.exp(float(rng.normal(0.0, 0.02)))
            raw = CONVERSION[d] * f ** CONVERSION_EXPONENT[d] * noise
            pickups.append(max(1, min(f, round(raw))))
        profiles.append(DayProfile(flows=flows, pickups=tuple(pickups)))
    profiles.extend(trial_profile(f) for f in TRIAL_FLOWS)
    return SyntheticSpec(
        n_days=n_training_days + len(TRIAL_FLOWS),
        base_flow=600,
        seed=derive_rng(artifact_seed, "corpus").integers(0, 2**31).item(),
        skew=(0.5, 0.26, 0.24),
        warmup_days=warmup_days,
        conversion=CONVERSION,
        conversion_exponent=CONVERSION_EXPONENT,
        pickup_noise=0.02,
        prior_mix=prior_mix,
        start=date(2014, 1, 6),
        day_profiles=tuple(profiles),
    )


def desk_config(
    seed: int = 0,
    artifact_seed: int = 0,
    roster_scale: float = 0.1,
    display_frames: int = 300,
    outcome_replicates: int = 400,
    system_replicates: int = 200,
    behavior: AgentBehavior | None = None,
    n_training_days: int = 45,
    metric_preset: str = "action_set",
) -> ExperimentConfig:
    """Calibrated desk-scale config; trial days are the last 16 corpus days."""
    spec = calibrated_spec(artifact_seed, n_training_days=n_training_days)
    days = target_days(spec)
    trial_days = tuple(d.isoformat() for d in days[-len(TRIAL_FLOWS) :])
    return ExperimentConfig(
        trial_days=trial_days,
        synthetic=spec,
        roster_scale=roster_scale,
        behavior=behavior or AgentBehavior(),
        display_frames=display_frames,
        outcome_replicates=outcome_replicates,
        system_replicates=system_replicates,
        metric_preset=metric_preset,
        artifact_seed=artifact_seed,
        seed=seed,
    )


RATIONAL_BEHAVIOR = AgentBehavior(
    noise_temperature=0.0,
    learning_rate_full=0.0,
    learning_rate_bandit=0.0,
    endowment_failure_rate=0.0,
    frames_observed=10,
)
