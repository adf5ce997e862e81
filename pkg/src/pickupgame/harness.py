"""Experiment orchestration: config, staged runs, replications, manifests.

A run lives in a directory. Artifacts (scenarios, payoff model, display
payloads) are prepared first; then the staged pipeline executes level-1
agents, level-2 agents (scored against the frozen level-1 pools), the
mixture-of-levels system stage, and finally the report. Stages append to
newline-delimited event logs and persist frozen pools with content
hashes; every random stream derives from the run seed and a label, so a
(config, seed) pair reproduces every file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Literal

from .agents import AgentState, PerceptionModel, decide, perceive, update_beliefs
from .core import (
    DEFAULT_ACTION_SET,
    ActionSet,
    LevelSplit,
    MixtureBelief,
)
from .counterfactual import (
    CounterfactualModel,
    DisplayPayload,
    fit,
    load_model,
    payload_from_json,
    payload_to_json,
    save_model,
    simulate_hypothetical_outcomes,
    summarize_display,
)
from .defaults import (
    MAIN_L1_PER_CELL,
    MAIN_L2_PER_CELL,
    MAIN_L2_MIXTURE,
    MAIN_SPLIT,
    ROBUST_COMPOSITION_L2_MIXTURE,
    ROBUST_COMPOSITION_L2_PER_CELL,
    ROBUST_COMPOSITION_SPLIT,
    ROBUST_ORDER_L1_PER_CELL,
    ROBUST_ORDER_L2_PER_CELL,
    TRIAL_DATES,
    alternate_order,
)
from .metrics import GroundMetric, anticipation_error, best_response
from .outcomes import (
    LevelOutcome,
    StagingViolationError,
    level_specific_outcome,
    make_feedback,
    pool_hash,
    score_cohort,
    system_outcome,
)
from .pipeline import (
    DecisionScenario,
    ScenarioSet,
    ingest,
    load_scenarios,
    scenario_set_from_json,
    scenario_set_to_json,
)
from .seeds import derive_rng, derive_seed
from .synthetic import SyntheticSpec, DayProfile, generate_synthetic, target_days

Variant = Literal["main", "robust_trial_order", "robust_composition"]
Stage = Literal["l1", "l2", "system", "report"]

EVENT_SCHEMA = "trial-event/1"
MANIFEST_SCHEMA = "run-manifest/1"
POOL_SCHEMA = "response-pool/1"


@dataclass(frozen=True)
class TreatmentCell:
    display: Literal["static", "hops"]
    feedback: Literal["bandit", "full"]

    @property
    def id(self) -> str:
        return f"{self.display}_{self.feedback}"


CELLS = (
    TreatmentCell("static", "bandit"),
    TreatmentCell("static", "full"),
    TreatmentCell("hops", "bandit"),
    TreatmentCell("hops", "full"),
)


@dataclass(frozen=True)
class AgentBehavior:
    noise_temperature: float = 0.2
    learning_rate_full: float = 0.3
    learning_rate_bandit: float = 0.1
    endowment_failure_rate: float = 0.16
    frames_observed: int = 10
    # how level-2 agents model the display-following crowd
    crowd_model: Literal["argmax", "softmax"] = "argmax"
    crowd_temperature: float = 0.2


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a staged run depends on, serializable and hashable."""

    trial_days: tuple[str, ...] = TRIAL_DATES
    scenario_path: str | None = None
    synthetic: SyntheticSpec | None = None
    split: LevelSplit = MAIN_SPLIT
    l2_mixture: MixtureBelief = MAIN_L2_MIXTURE
    roster_l1_per_cell: int = MAIN_L1_PER_CELL
    roster_l2_per_cell: int = MAIN_L2_PER_CELL
    roster_scale: float = 1.0
    behavior: AgentBehavior = AgentBehavior()
    display_frames: int = 1000
    outcome_replicates: int = 1000
    system_replicates: int = 500
    welfare_restarts: int = 16
    metric_preset: Literal["action_set", "collinear"] = "action_set"
    competitor_count_includes_self: bool = True
    scoring: Literal["bernoulli", "capacity_lottery"] = "bernoulli"
    shrinkage: Literal["pooled", "none"] = "pooled"
    artifact_seed: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.trial_days) != 16:
            raise ValueError(
                "trial_days needs 16 entries: one practice day plus 15 trials"
            )
        if len(set(self.trial_days)) != 16:
            raise ValueError("trial order must be a permutation of distinct days")
        if self.scenario_path is None and self.synthetic is None:
            raise ValueError("config needs a scenario source (path or synthetic)")

    @property
    def scored_days(self) -> tuple[str, ...]:
        return self.trial_days[1:]

    def roster_size(self, level: int) -> int:
        base = self.roster_l1_per_cell if level == 1 else self.roster_l2_per_cell
        return max(1, round(base * self.roster_scale))


def config_to_json(config: ExperimentConfig) -> dict:
    synth = None
    if config.synthetic is not None:
        s = config.synthetic
        synth = {
            "n_days": s.n_days,
            "base_flow": s.base_flow,
            "seed": s.seed,
            "skew": list(s.skew),
            "warmup_days": s.warmup_days,
            "flow_jitter": s.flow_jitter,
            "conversion": list(s.conversion),
            "conversion_exponent": list(s.conversion_exponent),
            "pickup_noise": s.pickup_noise,
            "prior_mix": s.prior_mix,
            "origins": list(s.origins),
            "start": s.start.isoformat(),
            "bin_minutes": s.bin_minutes,
            "include_offpeak_noise": s.include_offpeak_noise,
            "day_profiles": None
            if s.day_profiles is None
            else [
                {"flows": list(p.flows), "pickups": list(p.pickups)}
                for p in s.day_profiles
            ],
        }
    return {
        "schema": "experiment-config/1",
        "trial_days": list(config.trial_days),
        "scenario_path": config.scenario_path,
        "synthetic": synth,
        "split": {
            "proportions": list(config.split.proportions),
            "rounding_mode": config.split.rounding_mode,
            "lam": config.split.lam,
        },
        "l2_mixture": list(config.l2_mixture.proportions),
        "roster": {
            "l1_per_cell": config.roster_l1_per_cell,
            "l2_per_cell": config.roster_l2_per_cell,
            "scale": config.roster_scale,
        },
        "behavior": {
            "noise_temperature": config.behavior.noise_temperature,
            "learning_rate_full": config.behavior.learning_rate_full,
            "learning_rate_bandit": config.behavior.learning_rate_bandit,
            "endowment_failure_rate": config.behavior.endowment_failure_rate,
            "frames_observed": config.behavior.frames_observed,
            "crowd_model": config.behavior.crowd_model,
            "crowd_temperature": config.behavior.crowd_temperature,
        },
        "display_frames": config.display_frames,
        "outcome_replicates": config.outcome_replicates,
        "system_replicates": config.system_replicates,
        "welfare_restarts": config.welfare_restarts,
        "metric_preset": config.metric_preset,
        "competitor_count_includes_self": config.competitor_count_includes_self,
        "scoring": config.scoring,
        "shrinkage": config.shrinkage,
        "artifact_seed": config.artifact_seed,
        "seed": config.seed,
    }


def config_from_json(data: dict) -> ExperimentConfig:
    if data.get("schema") != "experiment-config/1":
        raise ValueError("not an experiment-config/1 document")
    synth = None
    if data.get("synthetic") is not None:
        s = data["synthetic"]
        synth = SyntheticSpec(
            n_days=s["n_days"],
            base_flow=s["base_flow"],
            seed=s["seed"],
            skew=tuple(s["skew"]),
            warmup_days=s["warmup_days"],
            flow_jitter=s["flow_jitter"],
            conversion=tuple(s["conversion"]),
            conversion_exponent=tuple(s["conversion_exponent"]),
            pickup_noise=s["pickup_noise"],
            prior_mix=s["prior_mix"],
            origins=tuple(s["origins"]),
            start=date.fromisoformat(s["start"]),
            bin_minutes=s["bin_minutes"],
            include_offpeak_noise=s["include_offpeak_noise"],
            day_profiles=None
            if s.get("day_profiles") is None
            else tuple(
                DayProfile(tuple(p["flows"]), tuple(p["pickups"]))
                for p in s["day_profiles"]
            ),
        )
    behavior = data["behavior"]
    roster = data["roster"]
    return ExperimentConfig(
        trial_days=tuple(data["trial_days"]),
        scenario_path=data.get("scenario_path"),
        synthetic=synth,
        split=LevelSplit(
            tuple(data["split"]["proportions"]),
            rounding_mode=data["split"]["rounding_mode"],
            lam=data["split"]["lam"],
        ),
        l2_mixture=MixtureBelief(
            owner_level=2, proportions=tuple(data["l2_mixture"])
        ),
        roster_l1_per_cell=roster["l1_per_cell"],
        roster_l2_per_cell=roster["l2_per_cell"],
        roster_scale=roster["scale"],
        behavior=AgentBehavior(
            noise_temperature=behavior["noise_temperature"],
            learning_rate_full=behavior["learning_rate_full"],
            learning_rate_bandit=behavior["learning_rate_bandit"],
            endowment_failure_rate=behavior["endowment_failure_rate"],
            frames_observed=behavior["frames_observed"],
            crowd_model=behavior.get("crowd_model", "argmax"),
            crowd_temperature=behavior.get("crowd_temperature", 0.2),
        ),
        display_frames=data["display_frames"],
        outcome_replicates=data["outcome_replicates"],
        system_replicates=data["system_replicates"],
        welfare_restarts=data["welfare_restarts"],
        metric_preset=data["metric_preset"],
        competitor_count_includes_self=data["competitor_count_includes_self"],
        scoring=data["scoring"],
        shrinkage=data["shrinkage"],
        artifact_seed=data["artifact_seed"],
        seed=data["seed"],
    )


def config_hash(config: ExperimentConfig) -> str:
    doc = json.dumps(config_to_json(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()


def variant_config(base: ExperimentConfig, variant: Variant) -> ExperimentConfig:
    """Derive a replication config from the main experiment's."""
    if variant == "main":
        return base
    if variant == "robust_trial_order":
        return replace(
            base,
            trial_days=alternate_order(base.trial_days),
            roster_l1_per_cell=ROBUST_ORDER_L1_PER_CELL,
            roster_l2_per_cell=ROBUST_ORDER_L2_PER_CELL,
        )
    if variant == "robust_composition":
        return replace(
            base,
            split=ROBUST_COMPOSITION_SPLIT,
            l2_mixture=ROBUST_COMPOSITION_L2_MIXTURE,
            roster_l2_per_cell=ROBUST_COMPOSITION_L2_PER_CELL,
        )
    raise ValueError(f"unknown variant: {variant}")


@dataclass
class RunArtifacts:
    """Prepared inputs shared by every stage of a run."""

    action_set: ActionSet
    scenarios: ScenarioSet
    model: CounterfactualModel
    displays: dict[str, DisplayPayload]  # day ISO -> hops payload (with frames)
    metric: GroundMetric

    def scenario(self, day_iso: str) -> DecisionScenario:
        return self.scenarios.by_day(date.fromisoformat(day_iso))

    def payload(self, day_iso: str, kind: str) -> DisplayPayload:
        hops = self.displays[day_iso]
        if kind == "hops":
            return hops
        return DisplayPayload(
            kind="static",
            static_flows=hops.static_flows,
            static_pickups=hops.static_pickups,
            static_probabilities=hops.static_probabilities,
        )


def build_artifacts(
    config: ExperimentConfig, action_set: ActionSet = DEFAULT_ACTION_SET
) -> RunArtifacts:
    """Scenarios, fitted model, and display payloads for a config."""
    if config.synthetic is not None:
        trips = generate_synthetic(config.synthetic, action_set)
        days = target_days(config.synthetic)
        scenarios = ingest(trips, action_set, homogeneity=days)
    else:
        scenarios = load_scenarios(config.scenario_path)
        action_set = scenarios.action_set
    have = {d.isoformat() for d in scenarios.days}
    missing = [d for d in config.trial_days if d not in have]
    if missing:
        raise ValueError(f"scenario source lacks trial days: {missing}")
    model = fit(scenarios.training_pairs(), shrinkage=config.shrinkage)
    displays: dict[str, DisplayPayload] = {}
    for day_iso in config.trial_days:
        scenario = scenarios.by_day(date.fromisoformat(day_iso))
        outcomes = simulate_hypothetical_outcomes(
            scenario,
            model,
            n_frames=config.display_frames,
            seed=derive_seed(config.artifact_seed, "display", day_iso),
        )
        displays[day_iso] = summarize_display(outcomes, "hops")
    metric = (
        GroundMetric.collinear()
        if config.metric_preset == "collinear"
        else GroundMetric.from_action_set(action_set)
    )
    return RunArtifacts(
        action_set=action_set,
        scenarios=scenarios,
        model=model,
        displays=displays,
        metric=metric,
    )


class RunDirectory:
    """Path layout and JSON/JSONL IO for one run."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def write_json(self, relpath: str, doc: dict) -> Path:
        p = self.path(relpath)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return p

    def read_json(self, relpath: str) -> dict:
        return json.loads(self.path(relpath).read_text())

    def append_events(self, relpath: str, events: list[dict]) -> Path:
        p = self.path(relpath)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "a") as fh:
            for event in events:
                fh.write(json.dumps(event, sort_keys=True, separators=(",", ":")))
                fh.write("\n")
        return p

    def read_events(self, relpath: str) -> list[dict]:
        p = self.path(relpath)
        if not p.exists():
            return []
        return [json.loads(line) for line in p.read_text().splitlines() if line]


@dataclass
class RunContext:
    config: ExperimentConfig
    artifacts: RunArtifacts
    rundir: RunDirectory
    manifest: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.config)

    def save_manifest(self) -> None:
        self.rundir.write_json("manifest.json", self.manifest)


def prepare_run(
    config: ExperimentConfig,
    rundir: str | Path,
    artifacts: RunArtifacts | None = None,
) -> RunContext:
    """Materialize a run directory with its immutable artifacts."""
    rd = RunDirectory(rundir)
    if artifacts is None:
        artifacts = build_artifacts(config)
    rd.write_json("config.json", config_to_json(config))
    rd.write_json("scenarios.json", scenario_set_to_json(artifacts.scenarios))
    save_model(rd.path("model.json"), artifacts.model)
    rd.write_json(
        "displays.json",
        {
            "schema": "display-set/1",
            "days": {
                day: payload_to_json(payload)
                for day, payload in artifacts.displays.items()
            },
        },
    )
    ctx = RunContext(
        config=config,
        artifacts=artifacts,
        rundir=rd,
        manifest={
            "schema": MANIFEST_SCHEMA,
            "config_hash": config_hash(config),
            "seed": config.seed,
            "stages": {"l1": False, "l2": False, "system": False, "report": False},
            "pool_hashes": {},
            "paths": {
                "config": "config.json",
                "scenarios": "scenarios.json",
                "model": "model.json",
                "displays": "displays.json",
                "events": {"l1": "events/l1.jsonl", "l2": "events/l2.jsonl"},
                "pools": {"l1": "pools/l1.json", "l2": "pools/l2.json"},
                "outcomes": {"l1": "outcomes/l1.json", "l2": "outcomes/l2.json"},
                "system": "system/outcomes.json",
                "report": "report",
            },
        },
    )
    ctx.save_manifest()
    return ctx


def load_run(rundir: str | Path) -> RunContext:
    """Rehydrate a run context from its directory."""
    rd = RunDirectory(rundir)
    config = config_from_json(rd.read_json("config.json"))
    scenarios = scenario_set_from_json(rd.read_json("scenarios.json"))
    model = load_model(rd.path("model.json"))
    displays_doc = rd.read_json("displays.json")
    displays = {
        day: payload_from_json(doc) for day, doc in displays_doc["days"].items()
    }
    metric = (
        GroundMetric.collinear()
        if config.metric_preset == "collinear"
        else GroundMetric.from_action_set(scenarios.action_set)
    )
    artifacts = RunArtifacts(
        action_set=scenarios.action_set,
        scenarios=scenarios,
        model=model,
        displays=displays,
        metric=metric,
    )
    manifest = json.loads(rd.manifest_path.read_text())
    return RunContext(config=config, artifacts=artifacts, rundir=rd, manifest=manifest)


def _competitor_count(config: ExperimentConfig, scenario: DecisionScenario) -> int:
    n = scenario.total_drivers
    return n if config.competitor_count_includes_self else n - 1


def _level1_outcomes(ctx: RunContext) -> dict[int, LevelOutcome]:
    out = {}
    for t, day_iso in enumerate(ctx.config.scored_days, start=1):
        scenario = ctx.artifacts.scenario(day_iso)
        out[t] = level_specific_outcome(
            1,
            scenario,
            ctx.artifacts.model,
            total=_competitor_count(ctx.config, scenario),
        )
    return out


def _level2_outcomes(
    ctx: RunContext, l1_pools: dict[str, dict[int, list[int]]]
) -> dict[str, dict[int, LevelOutcome]]:
    out: dict[str, dict[int, LevelOutcome]] = {}
    for cell in CELLS:
        per_trial = {}
        for t, day_iso in enumerate(ctx.config.scored_days, start=1):
            scenario = ctx.artifacts.scenario(day_iso)
            pool = l1_pools[cell.id].get(t, [])
            if not pool:
                raise StagingViolationError(
                    f"staging violation: no level-1 pool for {cell.id} trial {t}"
                )
            per_trial[t] = level_specific_outcome(
                2,
                scenario,
                ctx.artifacts.model,
                belief=ctx.config.l2_mixture,
                l1_pool=pool,
                n_replicates=ctx.config.outcome_replicates,
                seed=derive_seed(ctx.config.seed, "l2out", cell.id, day_iso),
                total=_competitor_count(ctx.config, scenario),
            )
        out[cell.id] = per_trial
    return out


def _outcome_to_json(outcome: LevelOutcome) -> dict:
    return {
        "level": outcome.level,
        "expected_flow": list(outcome.expected_flow.counts),
        "pickup_probabilities": list(outcome.pickup_probabilities),
        "source": outcome.source,
    }


def _build_agent(
    ctx: RunContext, level: int, cell: TreatmentCell, index: int
) -> AgentState:
    cfg = ctx.config
    rng = derive_rng(cfg.seed, "roster", f"l{level}", cell.id, index)
    effective = level
    if level == 2 and rng.random() < cfg.behavior.endowment_failure_rate:
        effective = 1
    perception = (
        PerceptionModel("exact_static")
        if cell.display == "static"
        else PerceptionModel("sampled_frames", cfg.behavior.frames_observed)
    )
    eta = (
        cfg.behavior.learning_rate_full
        if cell.feedback == "full"
        else cfg.behavior.learning_rate_bandit
    )
    return AgentState(
        id=f"l{level}-{cell.id}-{index:04d}",
        level=level,
        perception=perception,
        belief=cfg.l2_mixture if level == 2 else None,
        effective_level=effective,
        noise_temperature=cfg.behavior.noise_temperature,
        learning_rate=eta,
        crowd_model=cfg.behavior.crowd_model,
        crowd_temperature=cfg.behavior.crowd_temperature,
    )


def run_stage(ctx: RunContext, stage: Literal["l1", "l2"]) -> dict:
    """Execute one data-collection stage across all treatment cells.

    Every agent completes the 15 scored trials in the configured order;
    decisions freeze into per-cell per-trial pools for later stages.
    """
    cfg = ctx.config
    level = 1 if stage == "l1" else 2
    if stage == "l2":
        if not ctx.manifest["stages"].get("l1"):
            raise StagingViolationError(
                "staging violation: level-2 stage requires the frozen level-1 pool"
            )
        l1_pools = load_pools(ctx, "l1")
        outcomes_by_cell = _level2_outcomes(ctx, l1_pools)
        ctx.rundir.write_json(
            "outcomes/l2.json",
            {
                cell: {str(t): _outcome_to_json(o) for t, o in per.items()}
                for cell, per in outcomes_by_cell.items()
            },
        )
    else:
        l1_outcomes = _level1_outcomes(ctx)
        outcomes_by_cell = {cell.id: l1_outcomes for cell in CELLS}
        ctx.rundir.write_json(
            "outcomes/l1.json",
            {str(t): _outcome_to_json(o) for t, o in l1_outcomes.items()},
        )

    pools: dict[str, dict[int, list[int]]] = {}
    events_path = f"events/{stage}.jsonl"
    ctx.rundir.path(events_path).unlink(missing_ok=True)
    for cell in CELLS:
        pools[cell.id] = {}
        n_agents = cfg.roster_size(level)
        states = [_build_agent(ctx, level, cell, i) for i in range(n_agents)]
        events: list[dict] = []
        for t, day_iso in enumerate(cfg.scored_days, start=1):
            scenario = ctx.artifacts.scenario(day_iso)
            outcome = outcomes_by_cell[cell.id][t]
            competitor_count = _competitor_count(cfg, scenario)
            payload = ctx.artifacts.payload(day_iso, cell.display)
            static = ctx.artifacts.payload(day_iso, "static")
            decisions = []
            for i, state in enumerate(states):
                # streams are keyed by day, not trial position, so the
                # alternate-order arm sees identical randomness per day
                rng = derive_rng(cfg.seed, "agent", stage, cell.id, i, day_iso)
                perceived = perceive(payload, state.perception, rng)
                decisions.append(
                    decide(
                        state,
                        perceived,
                        competitor_count,
                        ctx.artifacts.action_set,
                        ctx.artifacts.model,
                        rng,
                    )
                )
            score_rng = derive_rng(cfg.seed, "score", stage, cell.id, day_iso)
            scores = score_cohort(
                [d.chosen_index for d in decisions],
                outcome,
                score_rng,
                mechanism=cfg.scoring,
            )
            pools[cell.id][t] = [d.chosen_index for d in decisions]
            for i, (state, decision, (got, delta)) in enumerate(
                zip(states, decisions, scores)
            ):
                feedback = make_feedback(
                    cell.feedback,
                    got,
                    delta,
                    displayed=static if cell.feedback == "full" else None,
                    outcome=outcome if cell.feedback == "full" else None,
                    anticipated=decision.anticipated_flow
                    if cell.feedback == "full"
                    else None,
                )
                new_state = update_beliefs(state, feedback, decision)
                states[i] = new_state
                events.append(
                    {
                        "schema": EVENT_SCHEMA,
                        "stage": stage,
                        "cell": cell.id,
                        "display": cell.display,
                        "feedback": cell.feedback,
                        "agent": state.id,
                        "level": level,
                        "effective_level": state.effective_level,
                        "trial": t,
                        "day": day_iso,
                        "chosen": decision.chosen,
                        "chosen_index": decision.chosen_index,
                        "anticipated": list(decision.anticipated_flow.counts),
                        "got_pickup": got,
                        "reward_delta": delta,
                        "running_reward": round(new_state.cumulative_reward, 10),
                        "best_response": best_response(
                            decision.chosen_index, outcome.pickup_probabilities
                        ),
                        "anticipation_error": anticipation_error(
                            decision.anticipated_flow,
                            outcome.expected_flow,
                            ctx.artifacts.metric,
                        ),
                    }
                )
        ctx.rundir.append_events(events_path, events)

    pool_doc = {
        "schema": POOL_SCHEMA,
        "stage": stage,
        "config_hash": ctx.hash,
        "cells": {
            cell_id: {str(t): trial_pool for t, trial_pool in per.items()}
            for cell_id, per in pools.items()
        },
    }
    digest = _pool_digest(pool_doc["cells"])
    pool_doc["hash"] = digest
    ctx.rundir.write_json(f"pools/{stage}.json", pool_doc)
    ctx.manifest["stages"][stage] = True
    ctx.manifest["pool_hashes"][stage] = digest
    ctx.save_manifest()
    return pools


def _pool_digest(cells_doc: dict) -> str:
    """Content hash of a pool document, in canonical cell/trial order."""
    return pool_hash(
        [
            cells_doc[cell.id][t]
            for cell in CELLS
            for t in sorted(cells_doc[cell.id], key=int)
        ]
    )


def load_pools(ctx: RunContext, stage: Literal["l1", "l2"]) -> dict:
    path = f"pools/{stage}.json"
    if not ctx.rundir.path(path).exists():
        raise StagingViolationError(
            f"staging violation: no frozen {stage} pool in this run"
        )
    doc = ctx.rundir.read_json(path)
    if doc.get("config_hash") != ctx.hash:
        raise ValueError(
            "config hash mismatch: the frozen pool belongs to a different config"
        )
    if _pool_digest(doc["cells"]) != doc.get("hash"):
        raise ValueError(f"pool integrity failure: {path} does not match its hash")
    return {
        cell_id: {int(t): list(p) for t, p in per.items()}
        for cell_id, per in doc["cells"].items()
    }


def import_pool(ctx: RunContext, stage: str, source_path: Path) -> None:
    """Adopt a frozen pool from another run (pool reuse across arms)."""
    doc = json.loads(Path(source_path).read_text())
    if doc.get("schema") != POOL_SCHEMA or doc.get("stage") != stage:
        raise ValueError("not a compatible response-pool document")
    if _pool_digest(doc["cells"]) != doc.get("hash"):
        raise ValueError("pool integrity failure: imported pool does not match its hash")
    doc["config_hash"] = ctx.hash
    ctx.rundir.write_json(f"pools/{stage}.json", doc)
    ctx.manifest["stages"][stage] = True
    ctx.manifest["pool_hashes"][stage] = doc["hash"]
    ctx.save_manifest()


def run_system_stage(ctx: RunContext) -> None:
    """Combine the frozen pools into replicated system outcomes."""
    for stage in ("l1", "l2"):
        if not ctx.manifest["stages"].get(stage):
            raise StagingViolationError(
                f"staging violation: system outcomes need the frozen {stage} pool"
            )
    l1_pools = load_pools(ctx, "l1")
    l2_pools = load_pools(ctx, "l2")
    doc: dict = {"schema": "system-outcomes/1", "cells": {}}
    for cell in CELLS:
        per_trial = {}
        for t, day_iso in enumerate(ctx.config.scored_days, start=1):
            scenario = ctx.artifacts.scenario(day_iso)
            outcomes = system_outcome(
                scenario,
                ctx.config.split,
                l1_pools[cell.id][t],
                l2_pools[cell.id][t],
                ctx.artifacts.model,
                n_replicates=ctx.config.system_replicates,
                seed=derive_seed(ctx.config.seed, "system", cell.id, day_iso),
            )
            per_trial[str(t)] = {
                "day": day_iso,
                "level_counts": list(outcomes.level_counts),
                "replicates": [
                    {"flow": list(r.flow), "pickups": list(r.pickups)}
                    for r in outcomes.replicates
                ],
            }
        doc["cells"][cell.id] = per_trial
    ctx.rundir.write_json("system/outcomes.json", doc)
    ctx.manifest["stages"]["system"] = True
    ctx.save_manifest()


def run_experiment(
    config: ExperimentConfig,
    rundir: str | Path,
    artifacts: RunArtifacts | None = None,
    through: Stage = "report",
) -> RunContext:
    """Prepare artifacts and execute stages in order up to ``through``."""
    from .report import export_report

    ctx = prepare_run(config, rundir, artifacts)
    order: list[Stage] = ["l1", "l2", "system", "report"]
    upto = order.index(through)
    if upto >= 0:
        run_stage(ctx, "l1")
    if upto >= 1:
        run_stage(ctx, "l2")
    if upto >= 2:
        run_system_stage(ctx)
    if upto >= 3:
        export_report(ctx)
    return ctx


def run_replication(
    base: ExperimentConfig,
    variant: Variant,
    rundir: str | Path,
    main_ctx: RunContext | None = None,
    artifacts: RunArtifacts | None = None,
    through: Stage = "report",
) -> RunContext:
    """Run one collection arm.

    The composition arm keeps the main experiment's trial order, so its
    level-1 stage is not re-collected: the main run's frozen level-1 pool
    is imported verbatim and only level 2 onward executes.
    """
    from .report import export_report

    config = variant_config(base, variant)
    if variant != "robust_composition":
        return run_experiment(config, rundir, artifacts=artifacts, through=through)
    if main_ctx is None or not main_ctx.manifest["stages"].get("l1"):
        raise StagingViolationError(
            "staging violation: the composition arm reuses the main run's "
            "level-1 pool, which does not exist yet"
        )
    if artifacts is None:
        artifacts = main_ctx.artifacts
    ctx = prepare_run(config, rundir, artifacts)
    import_pool(ctx, "l1", main_ctx.rundir.path("pools/l1.json"))
    order: list[Stage] = ["l1", "l2", "system", "report"]
    upto = order.index(through)
    if upto >= 1:
        run_stage(ctx, "l2")
    if upto >= 2:
        run_system_stage(ctx)
    if upto >= 3:
        export_report(ctx)
    return ctx
