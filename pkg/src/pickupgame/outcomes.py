"""Staged scoring: level-specific outcomes, rewards, and system outcomes.

Level-1 play is scored against the non-strategic deduced flow (the basis
of the display). Level-2 play is scored against a Monte-Carlo mixture:
each replicate samples level-0 decisions from candidate search priors and
level-1 decisions from the frozen pool of collected level-1 responses, in
the endowed proportions. The same staging applies to system outcomes,
which combine all three levels per the true split. Requesting any of this
before the pools it needs exist is a staging violation, never a fallback.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .core import (
    FlowDistribution,
    LevelSplit,
    MixtureBelief,
    largest_remainder_round,
    level_counts,
)
from .counterfactual import (
    CounterfactualModel,
    DisplayPayload,
    pickup_probability,
    predict_pickups,
)
from .pipeline import DecisionScenario
from .seeds import derive_rng

Structure = Literal["bandit", "full"]
ScoringMechanism = Literal["bernoulli", "capacity_lottery"]

TRIAL_BONUS = 0.2


class StagingViolationError(RuntimeError):
    """A level-2 or system computation ran before its input pool exists."""


@dataclass(frozen=True)
class LevelOutcome:
    level: int
    expected_flow: FlowDistribution
    pickup_probabilities: tuple[float, ...]
    source: Literal["l0_data", "l0_plus_l1_mixture"]


def _sample_candidate_decisions(
    cum_weights: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``count`` decisions from uniformly resampled candidates."""
    n_candidates, n_bins = cum_weights.shape
    picks = rng.integers(0, n_candidates, count)
    u = rng.random(count)
    return np.minimum(
        (u[:, None] > cum_weights[picks]).sum(axis=1), n_bins - 1
    )


def level_specific_outcome(
    level: int,
    scenario: DecisionScenario,
    model: CounterfactualModel,
    belief: MixtureBelief | None = None,
    l1_pool: Sequence[int] | None = None,
    n_replicates: int = 1000,
    seed: int = 0,
    total: int | None = None,
) -> LevelOutcome:
    """The outcome a level is scored against.

    Level 1 is deterministic: the scenario's deduced flow. Level 2
    averages ``n_replicates`` resampled mixtures of level-0 decisions
    (from candidate priors) and level-1 decisions (from the pool, with
    replacement), split per the endowed belief.
    """
    n_bins = len(scenario.deduced_flow.counts)
    if total is None:
        total = scenario.total_drivers
    if level == 1:
        flow = scenario.deduced_flow
        if total != scenario.total_drivers:
            flow = FlowDistribution(
                tuple(
                    float(c)
                    for c in largest_remainder_round(
                        flow.scaled_to(total).counts, total
                    )
                )
            )
        return LevelOutcome(
            level=1,
            expected_flow=flow,
            pickup_probabilities=pickup_probability(model, flow.counts),
            source="l0_data",
        )
    if level != 2:
        raise ValueError("level-specific outcomes exist for levels 1 and 2")
    if belief is None:
        raise ValueError("a level-2 outcome needs the endowed mixture")
    if not l1_pool:
        raise StagingViolationError(
            "staging violation: level-2 outcomes need the frozen level-1 pool"
        )
    mix = belief.normalized()
    n0, n1 = largest_remainder_round((mix[0] * total, mix[1] * total), total)
    cum = np.cumsum(scenario.decision_weight_matrix(), axis=1)
    cum[:, -1] = 1.0
    pool = np.asarray(l1_pool, dtype=int)
    acc = np.zeros(n_bins)
    for r in range(n_replicates):
        rng = derive_rng(seed, "l2rep", r)
        flow = np.zeros(n_bins)
        if n0:
            flow += np.bincount(
                _sample_candidate_decisions(cum, n0, rng), minlength=n_bins
            )
        if n1:
            flow += np.bincount(
                pool[rng.integers(0, len(pool), n1)], minlength=n_bins
            )
        acc += flow
    expected = FlowDistribution(tuple(acc / n_replicates))
    return LevelOutcome(
        level=2,
        expected_flow=expected,
        pickup_probabilities=pickup_probability(model, expected.counts),
        source="l0_plus_l1_mixture",
    )


def score_decision(
    chosen_index: int,
    outcome: LevelOutcome,
    rng: np.random.Generator,
) -> tuple[bool, float]:
    """Bernoulli pickup at the chosen district's outcome probability."""
    p = outcome.pickup_probabilities[chosen_index]
    got = bool(rng.random() < p)
    return got, TRIAL_BONUS if got else 0.0


def score_cohort(
    chosen_indices: Sequence[int],
    outcome: LevelOutcome,
    rng: np.random.Generator,
    mechanism: ScoringMechanism = "bernoulli",
) -> list[tuple[bool, float]]:
    """Score many agents against one outcome.

    ``bernoulli`` draws independently per agent. ``capacity_lottery``
    draws exactly the district's expected pickups as winners without
    replacement among the drivers present, so capacity binds jointly.
    """
    if mechanism == "bernoulli":
        return [score_decision(i, outcome, rng) for i in chosen_indices]
    results: list[tuple[bool, float] | None] = [None] * len(chosen_indices)
    flow = outcome.expected_flow.counts
    for d in range(len(flow)):
        agents = [k for k, c in enumerate(chosen_indices) if c == d]
        if not agents:
            continue
        slots = max(int(round(flow[d])), len(agents))
        winners_total = int(
            round(outcome.pickup_probabilities[d] * flow[d])
        )
        winners_total = min(winners_total, slots)
        agent_wins = rng.hypergeometric(
            winners_total, slots - winners_total, len(agents)
        ) if slots else 0
        chosen = rng.choice(len(agents), size=int(agent_wins), replace=False)
        lucky = {agents[int(i)] for i in chosen}
        for k in agents:
            got = k in lucky
            results[k] = (got, TRIAL_BONUS if got else 0.0)
    return [r for r in results]


@dataclass(frozen=True)
class FeedbackPayload:
    """What the participant sees after a trial.

    Bandit payloads carry only the result fields; full payloads add the
    displayed prediction, the realized level-specific outcome, the
    anticipation, and signed per-district errors (realized minus
    displayed, realized minus anticipated; negative means the display or
    the participant over-estimated).
    """

    structure: Structure
    got_pickup: bool
    reward_delta: float
    displayed_flows: tuple[float, ...] | None = None
    displayed_probabilities: tuple[float, ...] | None = None
    realized_flows: tuple[float, ...] | None = None
    realized_probabilities: tuple[float, ...] | None = None
    anticipated_flows: tuple[float, ...] | None = None
    prediction_error: tuple[float, ...] | None = None
    anticipation_gap: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        flow_fields = (
            self.displayed_flows,
            self.realized_flows,
            self.anticipated_flows,
            self.prediction_error,
            self.anticipation_gap,
        )
        if self.structure == "bandit" and any(f is not None for f in flow_fields):
            raise ValueError("bandit feedback must not carry flow information")


def make_feedback(
    structure: Structure,
    got_pickup: bool,
    reward_delta: float,
    displayed: DisplayPayload | None = None,
    outcome: LevelOutcome | None = None,
    anticipated: FlowDistribution | None = None,
) -> FeedbackPayload:
    if structure == "bandit":
        return FeedbackPayload(
            structure="bandit", got_pickup=got_pickup, reward_delta=reward_delta
        )
    if displayed is None or outcome is None or anticipated is None:
        raise ValueError("full feedback needs display, outcome, and anticipation")
    realized = outcome.expected_flow.counts
    return FeedbackPayload(
        structure="full",
        got_pickup=got_pickup,
        reward_delta=reward_delta,
        displayed_flows=displayed.static_flows,
        displayed_probabilities=displayed.static_probabilities,
        realized_flows=realized,
        realized_probabilities=outcome.pickup_probabilities,
        anticipated_flows=anticipated.counts,
        prediction_error=tuple(
            r - d for r, d in zip(realized, displayed.static_flows)
        ),
        anticipation_gap=tuple(
            r - a for r, a in zip(realized, anticipated.counts)
        ),
    )


@dataclass(frozen=True)
class SystemReplicate:
    flow: tuple[int, ...]
    pickups: tuple[int, ...]


@dataclass(frozen=True)
class SystemOutcomeSet:
    replicates: tuple[SystemReplicate, ...]
    level_counts: tuple[int, ...]

    def realized_flows(self) -> list[FlowDistribution]:
        return [FlowDistribution(tuple(float(f) for f in r.flow)) for r in self.replicates]

    def total_pickups(self) -> list[float]:
        return [float(sum(r.pickups)) for r in self.replicates]


def system_outcome(
    scenario: DecisionScenario,
    split: LevelSplit,
    l1_pool: Sequence[int],
    l2_pool: Sequence[int],
    model: CounterfactualModel,
    n_replicates: int = 500,
    seed: int = 0,
) -> SystemOutcomeSet:
    """Mixture-of-all-levels outcomes, replicated.

    Each replicate draws the level composition's worth of decisions
    (level 0 from candidate priors, levels 1 and 2 resampled with
    replacement from their pools), aggregates the flow, and realizes
    pickups as the model's rounded mean prediction clamped to the flow.
    """
    if not l1_pool or not l2_pool:
        raise StagingViolationError(
            "staging violation: system outcomes need frozen level-1 and level-2 pools"
        )
    counts = level_counts(split, scenario.total_drivers)
    n_bins = len(scenario.deduced_flow.counts)
    cum = np.cumsum(scenario.decision_weight_matrix(), axis=1)
    cum[:, -1] = 1.0
    pools = (np.asarray(l1_pool, dtype=int), np.asarray(l2_pool, dtype=int))
    replicates = []
    for r in range(n_replicates):
        rng = derive_rng(seed, "sysrep", r)
        flow = np.zeros(n_bins, dtype=int)
        if counts[0]:
            flow += np.bincount(
                _sample_candidate_decisions(cum, counts[0], rng), minlength=n_bins
            )
        for lvl, pool in zip((1, 2), pools):
            if counts[lvl]:
                flow += np.bincount(
                    pool[rng.integers(0, len(pool), counts[lvl])],
                    minlength=n_bins,
                )
        picks = predict_pickups(model, flow.tolist())
        realized = tuple(
            int(min(round(p), f)) for p, f in zip(picks, flow.tolist())
        )
        replicates.append(
            SystemReplicate(flow=tuple(int(f) for f in flow), pickups=realized)
        )
    return SystemOutcomeSet(replicates=tuple(replicates), level_counts=counts)


def pool_hash(pool_by_trial: Sequence[Sequence[int]]) -> str:
    """Stable digest of a frozen response pool."""
    doc = json.dumps([list(map(int, p)) for p in pool_by_trial], sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()
