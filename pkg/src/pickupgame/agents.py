"""Simulated level-k decision policies.

Agents stand in for human participants: they read the display through a
perception model (verbatim for static point estimates, a finite-sample
frame average for animated displays), value each district by the pickup
probability the payoff model assigns under their believed competitor
flow, and choose by argmax or softmax depending on their noise
temperature.

A level-1 agent believes competitors are exactly the displayed
non-strategic flow. A level-2 agent splits competitors between that flow
and level-1 imitators who all pile onto the display's best district, per
the endowed mixture. Feedback updates are deliberately minimal: full
feedback smooths the agent's competitor-flow belief toward what was
realized; bandit feedback only nudges the chosen district's value
estimate toward the observed success.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from .core import ActionSet, FlowDistribution, MixtureBelief, largest_remainder_round
from .counterfactual import CounterfactualModel, DisplayPayload, pickup_probability

PerceptionKind = Literal["exact_static", "sampled_frames"]

BASE_PAY = 2.0


@dataclass(frozen=True)
class PerceptionModel:
    kind: PerceptionKind
    frames_observed: int = 10

    def __post_init__(self) -> None:
        if self.frames_observed < 1:
            raise ValueError("frames_observed must be >= 1")


@dataclass(frozen=True)
class Perceived:
    flows: tuple[float, ...]
    probabilities: tuple[float, ...]


def perceive(
    payload: DisplayPayload,
    model: PerceptionModel,
    rng: np.random.Generator | None = None,
) -> Perceived:
    """What the agent takes away from the display."""
    if model.kind == "exact_static":
        if payload.kind != "static":
            raise ValueError("perception/display mismatch: expected a static payload")
        return Perceived(payload.static_flows, payload.static_probabilities)
    if payload.kind != "hops" or not payload.frames:
        raise ValueError("perception/display mismatch: expected an animated payload")
    if rng is None:
        raise ValueError("sampled_frames perception needs an rng")
    picks = rng.integers(0, len(payload.frames), model.frames_observed)
    flows = np.zeros(len(payload.static_flows))
    probs = np.zeros(len(payload.static_flows))
    for i in picks:
        frame = payload.frames[int(i)]
        flows += np.asarray(frame.flow, dtype=float)
        probs += np.asarray(frame.probabilities)
    k = float(model.frames_observed)
    return Perceived(tuple(flows / k), tuple(probs / k))


@dataclass(frozen=True)
class AgentState:
    """Immutable agent snapshot; updates return a new state."""

    id: str
    level: int
    perception: PerceptionModel
    belief: MixtureBelief | None = None
    effective_level: int | None = None
    flow_belief: tuple[float, ...] | None = None
    value_nudge: tuple[float, ...] = (0.0, 0.0, 0.0)
    noise_temperature: float = 0.0
    learning_rate: float = 0.0
    crowd_model: Literal["argmax", "softmax"] = "argmax"
    crowd_temperature: float = 0.2
    cumulative_reward: float = BASE_PAY

    def __post_init__(self) -> None:
        if self.level not in (1, 2):
            raise ValueError("simulated agents are level 1 or 2")
        if self.level == 2 and self.belief is None:
            raise ValueError("level-2 agents need an endowed mixture belief")
        if self.noise_temperature < 0:
            raise ValueError("noise temperature must be >= 0")
        if not (0.0 <= self.learning_rate <= 1.0):
            raise ValueError("learning rate must be in [0, 1]")
        if self.effective_level is None:
            object.__setattr__(self, "effective_level", self.level)


@dataclass(frozen=True)
class Decision:
    chosen: str
    chosen_index: int
    anticipated_flow: FlowDistribution
    values: tuple[float, ...]


def _argmax_by_ca(values: Sequence[float], action_set: ActionSet) -> int:
    best = max(values)
    tied = [i for i, v in enumerate(values) if v >= best - 1e-12]
    return min(tied, key=lambda i: action_set.community_areas[i])


def _imitator_shares(state: AgentState, perceived: Perceived, action_set: ActionSet):
    """How a level-2 agent thinks the display-following crowd splits up:
    all on the display's best district, or softmax-spread around it."""
    n = len(perceived.probabilities)
    if state.crowd_model == "argmax" or state.crowd_temperature <= 0:
        best = _argmax_by_ca(perceived.probabilities, action_set)
        return tuple(1.0 if d == best else 0.0 for d in range(n))
    logits = np.asarray(perceived.probabilities) / state.crowd_temperature
    weights = np.exp(logits - logits.max())
    return tuple(weights / weights.sum())


def believed_competitor_flow(
    state: AgentState,
    perceived: Perceived,
    competitor_count: float,
    action_set: ActionSet,
) -> tuple[float, ...]:
    """The flow the agent expects from everyone else, scaled to the
    declared competitor count."""
    if state.flow_belief is not None:
        total = sum(state.flow_belief)
        return tuple(f * competitor_count / total for f in state.flow_belief)
    perceived_total = sum(perceived.flows)
    scaled = tuple(f * competitor_count / perceived_total for f in perceived.flows)
    if state.effective_level == 1:
        return scaled
    mix = state.belief.normalized()
    imitators = _imitator_shares(state, perceived, action_set)
    return tuple(
        mix[0] * scaled[d] + mix[1] * competitor_count * imitators[d]
        for d in range(len(scaled))
    )


def decide(
    state: AgentState,
    perceived: Perceived,
    competitor_count: int,
    action_set: ActionSet,
    model: CounterfactualModel,
    rng: np.random.Generator | None = None,
) -> Decision:
    """Pick a district and anticipate the competitor flow.

    Values are pickup probabilities under the believed competitor flow
    plus any bandit-learned nudges; temperature 0 takes the argmax, higher
    temperatures sample a softmax. The anticipated flow is the believed
    flow rounded to integers that sum exactly to the competitor count.
    """
    believed = believed_competitor_flow(
        state, perceived, float(competitor_count), action_set
    )
    probs = pickup_probability(model, believed)
    values = tuple(p + n for p, n in zip(probs, state.value_nudge))
    if state.noise_temperature == 0.0:
        idx = _argmax_by_ca(values, action_set)
    else:
        if rng is None:
            raise ValueError("softmax choice needs an rng")
        logits = np.asarray(values) / state.noise_temperature
        weights = np.exp(logits - logits.max())
        weights /= weights.sum()
        idx = int(rng.choice(len(values), p=weights))
    anticipated = largest_remainder_round(believed, competitor_count)
    return Decision(
        chosen=action_set.ids[idx],
        chosen_index=idx,
        anticipated_flow=FlowDistribution(tuple(float(c) for c in anticipated)),
        values=values,
    )


def update_beliefs(state: AgentState, feedback, decision: Decision) -> AgentState:
    """Learning step after one trial's feedback.

    Full feedback: exponential smoothing of the competitor-flow belief
    toward the realized level-specific flow. Bandit feedback: the chosen
    district's value estimate moves toward the observed reward signal.
    Reward accounting applies in both cases.
    """
    new_reward = state.cumulative_reward + feedback.reward_delta
    eta = state.learning_rate
    if feedback.structure == "full":
        if eta == 0.0:
            return replace(state, cumulative_reward=new_reward)
        realized = feedback.realized_flows
        base = state.flow_belief or decision.anticipated_flow.counts
        updated = tuple(
            (1.0 - eta) * b + eta * r for b, r in zip(base, realized)
        )
        return replace(state, flow_belief=updated, cumulative_reward=new_reward)
    if eta == 0.0:
        return replace(state, cumulative_reward=new_reward)
    signal = 1.0 if feedback.got_pickup else 0.0
    nudges = list(state.value_nudge)
    used = decision.values[decision.chosen_index]
    nudges[decision.chosen_index] += eta * (signal - used)
    return replace(
        state, value_nudge=tuple(nudges), cumulative_reward=new_reward
    )
