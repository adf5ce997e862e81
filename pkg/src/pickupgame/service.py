"""HTTP session service for human participants.

Serves display payloads, enforces the elicitation contract (anticipated
flows must be non-negative integers summing to the declared competitor
count), scores decisions against the session's level-specific outcome,
returns feedback shaped by the treatment cell, and persists each session
as an append-only event stream that replays to identical state.

Bandit-cell sessions never receive realized-flow information in any
response; the response schemas are versioned and errors are structured
objects with machine-readable codes.
"""

from __future__ import annotations

import itertools
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import FlowDistribution
from .counterfactual import payload_to_json
from .harness import CELLS, RunContext, TreatmentCell, load_pools
from .outcomes import (
    LevelOutcome,
    StagingViolationError,
    level_specific_outcome,
    make_feedback,
    score_decision,
)
from .seeds import derive_rng

SESSION_SCHEMA = "session/1"
TRIAL_SCHEMA = "trial/1"
FEEDBACK_SCHEMA = "feedback/1"
ERROR_SCHEMA = "error/1"

N_TRIALS = 15

# level-endowment texts shown verbatim to participants; {share} and
# {count} fields are filled from the session's scenario arithmetic
DEFAULT_INSTRUCTIONS = {
    1: (
        "The other drivers will not look at this display and do not know "
        "how many competitors are nearby. They will search according to "
        "their own past driving habits, which the taxi company used to "
        "build this display."
    ),
    2: (
        "{share0}% of the other drivers ({count0}) never see this display "
        "and will search according to their own past driving habits. "
        "{share1}% ({count1}) consult the same display as you do, but each "
        "of them wrongly assumes they are the only person using it."
    ),
}


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    content = {"schema": ERROR_SCHEMA, "code": code, "message": message}
    content.update(extra)
    return JSONResponse(status_code=status, content=content)


@dataclass
class Session:
    id: str
    cell: TreatmentCell
    level: int
    cursor: int = 1
    comprehension_passed: bool = False
    comprehension_attempts: int = 0
    reward: float = 2.0
    history: list[dict] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.cursor > N_TRIALS


def replay_session(events: list[dict]) -> Session:
    """Rebuild a session from its event stream."""
    if not events or events[0]["type"] != "created":
        raise ValueError("event stream must start with a created event")
    head = events[0]
    session = Session(
        id=head["session_id"],
        cell=TreatmentCell(head["display"], head["feedback"]),
        level=head["level"],
    )
    for event in events[1:]:
        if event["type"] == "comprehension":
            session.comprehension_attempts += 1
            session.comprehension_passed = (
                session.comprehension_passed or event["passed"]
            )
        elif event["type"] == "response":
            session.cursor += 1
            session.reward += event["reward_delta"]
            session.history.append(event)
        else:
            raise ValueError(f"unknown event type: {event['type']}")
    return session


class SessionService:
    """Shared immutable run artifacts plus mutable session state."""

    def __init__(
        self,
        ctx: RunContext,
        assignment: str = "balanced",
        count_self: bool = False,
        service_seed: int = 0,
        session_dir: str | Path | None = None,
        instructions: dict[int, str] | None = None,
    ):
        self.ctx = ctx
        self.assignment = assignment
        self.count_self = count_self
        self.service_seed = service_seed
        self.session_dir = Path(session_dir) if session_dir else None
        self.instructions = instructions or DEFAULT_INSTRUCTIONS
        self.sessions: dict[str, Session] = {}
        self.locks: dict[str, threading.Lock] = {}
        self.registry_lock = threading.Lock()
        self.cell_cycle = itertools.cycle(CELLS)
        self.level_cycle = itertools.cycle([1, 1, 1, 1, 2, 2, 2])
        self.assign_rng = derive_rng(service_seed, "assign")
        self.l1_pools = None
        try:
            self.l1_pools = load_pools(ctx, "l1")
        except (StagingViolationError, ValueError):
            self.l1_pools = None
        self._outcome_cache: dict[tuple, LevelOutcome] = {}

    # -- artifacts ---------------------------------------------------

    def day_for_trial(self, t: int) -> str:
        return self.ctx.config.scored_days[t - 1]

    def competitor_count(self, day_iso: str) -> int:
        n = self.ctx.artifacts.scenario(day_iso).total_drivers
        return n if self.count_self else n - 1

    def outcome_for(self, session: Session, t: int) -> LevelOutcome:
        day_iso = self.day_for_trial(t)
        key = (session.level, session.cell.id, t)
        if key in self._outcome_cache:
            return self._outcome_cache[key]
        scenario = self.ctx.artifacts.scenario(day_iso)
        total = self.competitor_count(day_iso)
        if session.level == 1:
            outcome = level_specific_outcome(
                1, scenario, self.ctx.artifacts.model, total=total
            )
        else:
            pools = self.l1_pools or {}
            pool = pools.get(session.cell.id, {}).get(t, [])
            outcome = level_specific_outcome(
                2,
                scenario,
                self.ctx.artifacts.model,
                belief=self.ctx.config.l2_mixture,
                l1_pool=pool,
                n_replicates=self.ctx.config.outcome_replicates,
                seed=self.ctx.config.seed,
                total=total,
            )
        self._outcome_cache[key] = outcome
        return outcome

    # -- persistence --------------------------------------------------

    def append_event(self, session_id: str, event: dict) -> None:
        if self.session_dir is None:
            return
        self.session_dir.mkdir(parents=True, exist_ok=True)
        with open(self.session_dir / f"{session_id}.jsonl", "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def instruction_text(self, level: int, day_iso: str) -> str:
        text = self.instructions[level]
        if level == 1:
            return text
        mix = self.ctx.config.l2_mixture.normalized()
        count = self.competitor_count(day_iso)
        shares = [round(p * 100) for p in mix]
        counts = [round(p * count) for p in mix]
        return text.format(
            share0=shares[0], count0=counts[0], share1=shares[1], count1=counts[1]
        )

    def comprehension_spec(self, session: Session) -> dict:
        practice_day = self.ctx.config.trial_days[0]
        payload = self.ctx.artifacts.payload(practice_day, session.cell.display)
        probs = payload.static_probabilities
        ids = self.ctx.artifacts.action_set.ids
        target = max(range(len(probs)), key=lambda i: probs[i])
        if session.cell.display == "static":
            return {
                "kind": "choice",
                "prompt": "Which district shows the highest pickup probability?",
                "options": list(ids),
                "district": None,
            }
        return {
            "kind": "estimate",
            "prompt": (
                f"Watching the animation, estimate the pickup probability "
                f"of the {ids[target]} district (0 to 1)."
            ),
            "options": None,
            "district": ids[target],
        }

    def check_comprehension(self, session: Session, answer) -> bool:
        practice_day = self.ctx.config.trial_days[0]
        payload = self.ctx.artifacts.payload(practice_day, session.cell.display)
        probs = payload.static_probabilities
        ids = self.ctx.artifacts.action_set.ids
        target = max(range(len(probs)), key=lambda i: probs[i])
        if session.cell.display == "static":
            return isinstance(answer, str) and answer == ids[target]
        try:
            value = float(answer)
        except (TypeError, ValueError):
            return False
        return abs(value - probs[target]) <= 0.1


class CreateSessionBody(BaseModel):
    level: int | None = None


class ComprehensionBody(BaseModel):
    answer: str | float


class ResponseBody(BaseModel):
    district: str
    anticipated: dict[str, int]


def create_app(
    ctx: RunContext,
    assignment: str = "balanced",
    count_self: bool = False,
    service_seed: int = 0,
    session_dir: str | Path | None = None,
) -> FastAPI:
    service = SessionService(
        ctx,
        assignment=assignment,
        count_self=count_self,
        service_seed=service_seed,
        session_dir=session_dir,
    )
    app = FastAPI(title="pickupgame session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        with service.registry_lock:
            level = body.level if body.level is not None else next(
                service.level_cycle
            )
            if level not in (1, 2):
                return _error(422, "invalid_level", "level must be 1 or 2")
            if level == 2:
                pools_ready = service.l1_pools is not None and all(
                    service.l1_pools.get(cell.id) for cell in CELLS
                )
                if not pools_ready:
                    return _error(
                        409,
                        "staging_violation",
                        "level-2 sessions need a frozen level-1 pool for scoring",
                    )
            if service.assignment == "balanced":
                cell = next(service.cell_cycle)
            else:
                cell = CELLS[int(service.assign_rng.integers(0, len(CELLS)))]
            session = Session(id=uuid.uuid4().hex[:12], cell=cell, level=level)
            service.sessions[session.id] = session
            service.locks[session.id] = threading.Lock()
        service.append_event(
            session.id,
            {
                "type": "created",
                "session_id": session.id,
                "level": level,
                "display": cell.display,
                "feedback": cell.feedback,
            },
        )
        first_day = service.day_for_trial(1)
        return {
            "schema": SESSION_SCHEMA,
            "session_id": session.id,
            "level": level,
            "treatment": {"display": cell.display, "feedback": cell.feedback},
            "instruction_text": service.instruction_text(level, first_day),
            "n_trials": N_TRIALS,
            "comprehension": service.comprehension_spec(session),
        }

    def _get_session(session_id: str) -> Session | None:
        return service.sessions.get(session_id)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", "no such session")
        return {
            "schema": SESSION_SCHEMA,
            "session_id": session.id,
            "level": session.level,
            "treatment": {
                "display": session.cell.display,
                "feedback": session.cell.feedback,
            },
            "cursor": session.cursor,
            "done": session.done,
            "comprehension_passed": session.comprehension_passed,
            "running_reward": round(session.reward, 10),
            "comprehension": service.comprehension_spec(session),
        }

    @app.post("/sessions/{session_id}/comprehension")
    def comprehension(session_id: str, body: ComprehensionBody):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", "no such session")
        with service.locks[session_id]:
            passed = service.check_comprehension(session, body.answer)
            session.comprehension_attempts += 1
            session.comprehension_passed = session.comprehension_passed or passed
            service.append_event(
                session_id,
                {"type": "comprehension", "answer": body.answer, "passed": passed},
            )
            return {
                "schema": SESSION_SCHEMA,
                "passed": passed,
                "attempts": session.comprehension_attempts,
                "retry_allowed": True,
                "unlocked": session.comprehension_passed,
            }

    @app.get("/sessions/{session_id}/trials/{t}")
    def get_trial(session_id: str, t: int):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", "no such session")
        if not session.comprehension_passed:
            return _error(
                409, "comprehension_required", "pass the comprehension check first"
            )
        if session.done:
            return _error(409, "session_complete", "all trials are complete")
        if t != session.cursor:
            return _error(
                409,
                "trial_order_violation",
                f"trial {t} is not the current trial ({session.cursor})",
            )
        day_iso = service.day_for_trial(t)
        payload = service.ctx.artifacts.payload(day_iso, session.cell.display)
        count = service.competitor_count(day_iso)
        return {
            "schema": TRIAL_SCHEMA,
            "trial": t,
            "n_trials": N_TRIALS,
            "display": payload_to_json(payload),
            "competitor_count": count,
            "elicitation": {
                "required_sum": count,
                "districts": list(service.ctx.artifacts.action_set.ids),
            },
        }

    @app.post("/sessions/{session_id}/trials/{t}/response")
    def submit_response(session_id: str, t: int, body: ResponseBody):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", "no such session")
        lock = service.locks[session_id]
        with lock:
            if not session.comprehension_passed:
                return _error(
                    409, "comprehension_required", "pass the comprehension check first"
                )
            if t < session.cursor:
                return _error(
                    409, "duplicate_submission", f"trial {t} was already submitted"
                )
            if t != session.cursor:
                return _error(
                    409,
                    "trial_order_violation",
                    f"trial {t} is not the current trial ({session.cursor})",
                )
            ids = service.ctx.artifacts.action_set.ids
            if body.district not in ids:
                return _error(
                    422, "invalid_district", f"district must be one of {list(ids)}"
                )
            missing = [d for d in ids if d not in body.anticipated]
            if missing:
                return _error(
                    422,
                    "elicitation_incomplete",
                    f"anticipated flows missing districts: {missing}",
                )
            values = [int(body.anticipated[d]) for d in ids]
            if any(v < 0 for v in values):
                return _error(
                    422, "elicitation_negative", "anticipated flows must be >= 0"
                )
            day_iso = service.day_for_trial(t)
            required = service.competitor_count(day_iso)
            residual = required - sum(values)
            if residual != 0:
                return _error(
                    422,
                    "elicitation_sum_mismatch",
                    f"anticipated flows must sum to {required}",
                    residual=residual,
                )
            outcome = service.outcome_for(session, t)
            chosen_index = ids.index(body.district)
            rng = derive_rng(service.service_seed, "score", session.id, t)
            got, delta = score_decision(chosen_index, outcome, rng)
            anticipated = FlowDistribution(tuple(float(v) for v in values))
            displayed = service.ctx.artifacts.payload(day_iso, "static")
            feedback = make_feedback(
                session.cell.feedback,
                got,
                delta,
                displayed=displayed if session.cell.feedback == "full" else None,
                outcome=outcome if session.cell.feedback == "full" else None,
                anticipated=anticipated
                if session.cell.feedback == "full"
                else None,
            )
            session.cursor += 1
            session.reward += delta
            event = {
                "type": "response",
                "trial": t,
                "district": body.district,
                "anticipated": values,
                "got_pickup": got,
                "reward_delta": delta,
            }
            session.history.append(event)
            service.append_event(session_id, event)
            doc = {
                "schema": FEEDBACK_SCHEMA,
                "trial": t,
                "structure": feedback.structure,
                "got_pickup": feedback.got_pickup,
                "reward_delta": feedback.reward_delta,
                "running_reward": round(session.reward, 10),
                "done": session.done,
            }
            if feedback.structure == "full":
                doc["displayed_flows"] = list(feedback.displayed_flows)
                doc["displayed_probabilities"] = list(
                    feedback.displayed_probabilities
                )
                doc["realized_flows"] = list(feedback.realized_flows)
                doc["realized_probabilities"] = list(
                    feedback.realized_probabilities
                )
                doc["anticipated_flows"] = list(feedback.anticipated_flows)
                doc["prediction_error"] = list(feedback.prediction_error)
                doc["anticipation_gap"] = list(feedback.anticipation_gap)
            return doc

    @app.get("/sessions/{session_id}/summary")
    def summary(session_id: str):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", "no such session")
        trials = []
        for event in session.history:
            row = {
                "trial": event["trial"],
                "district": event["district"],
                "got_pickup": event["got_pickup"],
                "reward_delta": event["reward_delta"],
            }
            if session.cell.feedback == "full":
                row["anticipated"] = event["anticipated"]
            trials.append(row)
        return {
            "schema": SESSION_SCHEMA,
            "session_id": session.id,
            "level": session.level,
            "treatment": {
                "display": session.cell.display,
                "feedback": session.cell.feedback,
            },
            "completed_trials": len(session.history),
            "running_reward": round(session.reward, 10),
            "trials": trials,
        }

    return app
