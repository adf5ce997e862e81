"""Origin-destination trip ingestion and search-flow deduction.

The pipeline turns raw taxi trips into one decision scenario per target
weekday. Candidacy is inferred by back-tracing drivers who found a pickup
in an action district during the 9 AM window: the maximum observed idle
time between a prior drop-off in ``D`` and a pickup in ``P`` defines the
threshold ``t_max(D, P)`` within which any idle driver at ``D`` counts as
a candidate. Candidates split three ways by their 9 AM status: pickup in
an action district (kept, flow assigned to the observed district), pickup
elsewhere (dropped), or no pickup (kept, flow deduced from their search
dyads over the past ten days of AM peaks).
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .core import ActionSet, District, FlowDistribution

logger = logging.getLogger(__name__)

Classification = Literal["pickup_in_action_ca", "pickup_elsewhere", "no_pickup"]
DecisionMode = Literal["argmax", "weighted_sample"]

CA_RANGE = range(1, 78)


@dataclass(frozen=True)
class TripRecord:
    taxi_id: str
    start_ts: datetime
    end_ts: datetime
    pickup_ca: int
    dropoff_ca: int

    def __post_init__(self) -> None:
        if self.start_ts > self.end_ts:
            raise ValueError(f"trip ends before it starts: {self}")
        if self.pickup_ca not in CA_RANGE or self.dropoff_ca not in CA_RANGE:
            raise ValueError(f"community-area codes must be in 1..77: {self}")


@dataclass(frozen=True)
class TraceDyad:
    """Back-trace edge D -> P: drop-off district, 9 AM pickup district."""

    from_ca: int
    to_ca: int
    idle_minutes: float


@dataclass(frozen=True)
class SearchDyad:
    """History edge V -> S with an occurrence count as weight."""

    from_ca: int
    to_ca: int
    weight: int


@dataclass(frozen=True)
class StratumSpec:
    day_type: Literal["weekday", "weekend", "any"] = "weekday"
    start_hour: int = 7
    end_hour: int = 10

    def admits(self, ts: datetime) -> bool:
        if self.day_type == "weekday" and ts.weekday() >= 5:
            return False
        if self.day_type == "weekend" and ts.weekday() < 5:
            return False
        return self.start_hour <= ts.hour < self.end_hour


@dataclass(frozen=True)
class PickupWindow:
    """The decision timestamp: pickups starting within this window."""

    hour: int = 9
    minutes: int = 15

    def admits(self, ts: datetime) -> bool:
        start = ts.replace(hour=self.hour, minute=0, second=0, microsecond=0)
        return start <= ts < start + timedelta(minutes=self.minutes)

    def boundary(self, day: date) -> datetime:
        return datetime.combine(day, time(self.hour, 0))


@dataclass
class TripStrata:
    """Trips retained by a stratum spec, grouped by day."""

    spec: StratumSpec
    by_day: dict[date, list[TripRecord]] = field(default_factory=dict)
    _driver_index: dict[date, dict[str, list[TripRecord]]] = field(
        default_factory=dict, repr=False, compare=False
    )

    @property
    def days(self) -> list[date]:
        return sorted(self.by_day)

    def trips_on(self, day: date) -> list[TripRecord]:
        return self.by_day.get(day, [])

    def drivers_on(self, day: date) -> dict[str, list[TripRecord]]:
        """Per-driver chronological trips for one day, memoized."""
        if day not in self._driver_index:
            grouped: dict[str, list[TripRecord]] = defaultdict(list)
            for t in self.trips_on(day):
                grouped[t.taxi_id].append(t)
            for seq in grouped.values():
                seq.sort(key=lambda t: (t.start_ts, t.end_ts))
            self._driver_index[day] = dict(grouped)
        return self._driver_index[day]

    def driver_trips(self, day: date, taxi_id: str) -> list[TripRecord]:
        return self.drivers_on(day).get(taxi_id, [])

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_day.values())


def stratify_trips(
    trips: Iterable[TripRecord], spec: StratumSpec = StratumSpec()
) -> TripStrata:
    """Keep trips whose start timestamp falls in the requested stratum."""
    by_day: dict[date, list[TripRecord]] = defaultdict(list)
    for trip in trips:
        if spec.admits(trip.start_ts):
            by_day[trip.start_ts.date()].append(trip)
    for day_trips in by_day.values():
        day_trips.sort(key=lambda t: (t.start_ts, t.end_ts, t.taxi_id))
    strata = TripStrata(spec=spec, by_day=dict(by_day))
    if len(strata) == 0:
        logger.warning("stratification retained no trips")
    return strata


def select_target_days(
    strata: TripStrata,
    homogeneity: Callable[[date], bool] | Sequence[date],
) -> list[date]:
    """Days passing an externally supplied predicate or allowlist."""
    if callable(homogeneity):
        predicate = homogeneity
    else:
        allowed = set(homogeneity)
        predicate = lambda d: d in allowed  # noqa: E731
    return [d for d in strata.days if predicate(d)]


@dataclass
class TraceDyadIndex:
    dyads: list[TraceDyad]
    t_max: dict[tuple[int, int], float]
    pickup_drivers: dict[str, tuple[int, int]]  # taxi -> (origin, pickup CA)


def build_trace_dyads(
    strata: TripStrata,
    day: date,
    action_set: ActionSet,
    window: PickupWindow = PickupWindow(),
) -> TraceDyadIndex:
    """One dyad per driver with a 9 AM action-district pickup; per-pair
    thresholds are the maximum observed idle time."""
    action_cas = set(action_set.community_areas)
    dyads: list[TraceDyad] = []
    t_max: dict[tuple[int, int], float] = {}
    pickup_drivers: dict[str, tuple[int, int]] = {}
    grouped = strata.drivers_on(day)
    for taxi_id, trips in sorted(grouped.items()):
        pickup_trip = next(
            (
                t
                for t in trips
                if window.admits(t.start_ts) and t.pickup_ca in action_cas
            ),
            None,
        )
        if pickup_trip is None:
            continue
        prior = [t for t in trips if t.end_ts < pickup_trip.start_ts]
        if not prior:
            continue  # no back-trace exists for this driver
        last = max(prior, key=lambda t: t.end_ts)
        idle = (pickup_trip.start_ts - last.end_ts).total_seconds() / 60.0
        dyad = TraceDyad(last.dropoff_ca, pickup_trip.pickup_ca, idle)
        dyads.append(dyad)
        key = (dyad.from_ca, dyad.to_ca)
        t_max[key] = max(t_max.get(key, 0.0), idle)
        pickup_drivers[taxi_id] = (last.dropoff_ca, pickup_trip.pickup_ca)
    if not dyads:
        raise ValueError(f"no 9 AM action-district pickups on {day}")
    return TraceDyadIndex(dyads=dyads, t_max=t_max, pickup_drivers=pickup_drivers)


@dataclass(frozen=True)
class CandidateDriver:
    taxi_id: str
    origin_ca: int
    classification: Classification
    search_dyads: tuple[SearchDyad, ...] = ()
    observed_district: str | None = None
    decision_weights: tuple[float, ...] | None = None

    @property
    def retained(self) -> bool:
        return self.classification != "pickup_elsewhere"


def identify_candidates(
    strata: TripStrata,
    day: date,
    trace: TraceDyadIndex,
    window: PickupWindow = PickupWindow(),
    action_set: ActionSet | None = None,
) -> list[CandidateDriver]:
    """All drivers idle at a traced drop-off district within threshold,
    classified by their 9 AM status."""
    boundary = window.boundary(day)
    action_cas = set(action_set.community_areas) if action_set else set()
    grouped = strata.drivers_on(day)
    candidates: list[CandidateDriver] = []
    thresholds_by_origin: dict[int, float] = {}
    for (origin, _), limit in trace.t_max.items():
        thresholds_by_origin[origin] = max(
            thresholds_by_origin.get(origin, 0.0), limit
        )
    for taxi_id, trips in sorted(grouped.items()):
        if taxi_id in trace.pickup_drivers:
            origin, pickup_ca = trace.pickup_drivers[taxi_id]
            district = (
                action_set.districts[action_set.index_of_ca(pickup_ca)].id
                if action_set
                else None
            )
            candidates.append(
                CandidateDriver(
                    taxi_id=taxi_id,
                    origin_ca=origin,
                    classification="pickup_in_action_ca",
                    observed_district=district,
                )
            )
            continue
        prior = [t for t in trips if t.end_ts <= boundary]
        if not prior:
            continue
        last = max(prior, key=lambda t: t.end_ts)
        limit = thresholds_by_origin.get(last.dropoff_ca)
        if limit is None:
            continue
        idle = (boundary - last.end_ts).total_seconds() / 60.0
        if idle > limit:
            continue
        nine_am = next((t for t in trips if window.admits(t.start_ts)), None)
        if nine_am is not None:
            classification: Classification = "pickup_elsewhere"
        else:
            classification = "no_pickup"
        candidates.append(
            CandidateDriver(
                taxi_id=taxi_id,
                origin_ca=last.dropoff_ca,
                classification=classification,
            )
        )
    return candidates


def build_search_dyads(
    strata: TripStrata,
    taxi_id: str,
    day: date,
    lookback_days: int = 10,
) -> tuple[SearchDyad, ...]:
    """Consecutive-trip (drop-off -> next pickup) counts over the AM peaks
    of the ten days before the target day."""
    counts: Counter[tuple[int, int]] = Counter()
    for offset in range(1, lookback_days + 1):
        past = day - timedelta(days=offset)
        trips = strata.driver_trips(past, taxi_id)
        for prev, nxt in zip(trips, trips[1:]):
            counts[(prev.dropoff_ca, nxt.pickup_ca)] += 1
    return tuple(
        SearchDyad(v, s, n) for (v, s), n in sorted(counts.items())
    )


def _action_weights(
    dyads: Iterable[SearchDyad], origin: int, action_set: ActionSet
) -> tuple[float, ...] | None:
    """Dyad weights from ``origin`` into the action districts, normalized."""
    weights = [0.0] * len(action_set)
    hit = False
    for dyad in dyads:
        if dyad.from_ca != origin:
            continue
        try:
            idx = action_set.index_of_ca(dyad.to_ca)
        except ValueError:
            continue
        weights[idx] += dyad.weight
        hit = True
    total = sum(weights)
    if not hit or total <= 0:
        return None
    return tuple(w / total for w in weights)


def _argmax_by_ca(weights: Sequence[float], action_set: ActionSet) -> int:
    """Index of the maximal weight; ties go to the smallest CA code."""
    best = max(weights)
    tied = [i for i, w in enumerate(weights) if w >= best - 1e-12]
    return min(tied, key=lambda i: action_set.community_areas[i])


def deduce_decision(
    dyads: Iterable[SearchDyad],
    origin: int,
    action_set: ActionSet,
    mode: DecisionMode = "argmax",
    rng: np.random.Generator | None = None,
    fallback_dyads: Iterable[SearchDyad] | None = None,
) -> str:
    """Deduce a search district from conditional dyad weights.

    argmax picks the heaviest target (ties to the smallest CA code);
    weighted_sample draws proportionally. Empty priors fall back to the
    supplied population dyads and finally to a uniform draw so every
    retained candidate lands in the flow.
    """
    weights = _action_weights(dyads, origin, action_set)
    if weights is None and fallback_dyads is not None:
        weights = _action_weights(fallback_dyads, origin, action_set)
    if weights is None:
        weights = tuple(1.0 / len(action_set) for _ in range(len(action_set)))
    if mode == "argmax":
        idx = _argmax_by_ca(weights, action_set)
    else:
        if rng is None:
            raise ValueError("weighted_sample mode needs an rng")
        idx = int(rng.choice(len(weights), p=np.asarray(weights) / sum(weights)))
    return action_set.ids[idx]


@dataclass(frozen=True)
class DecisionScenario:
    """One target weekday: retained candidates and their deduced flow."""

    day: date
    candidates: tuple[CandidateDriver, ...]
    total_drivers: int
    deduced_flow: FlowDistribution
    historical_pickups: tuple[int, ...]

    def decision_weight_matrix(self) -> np.ndarray:
        return np.array([c.decision_weights for c in self.candidates])


def build_scenario(
    day: date,
    candidates: Sequence[CandidateDriver],
    action_set: ActionSet,
    strata: TripStrata | None = None,
    mode: DecisionMode = "argmax",
    rng: np.random.Generator | None = None,
    window: PickupWindow = PickupWindow(),
) -> DecisionScenario:
    """Aggregate one decision per retained candidate into a scenario.

    Drivers with observed 9 AM action pickups keep their realized district
    (a point-mass prior); the rest get their normalized dyad weights, with
    the day's population dyads and then a uniform prior as fallbacks.
    """
    retained = [c for c in candidates if c.retained]
    if not retained:
        raise ValueError(f"empty scenario: no retained candidates on {day}")
    population: list[SearchDyad] = []
    for c in retained:
        population.extend(c.search_dyads)

    n = len(action_set)
    weighted: list[CandidateDriver] = []
    flow = [0.0] * n
    for cand in retained:
        if cand.classification == "pickup_in_action_ca":
            idx = action_set.index_of(cand.observed_district)
            weights = tuple(1.0 if i == idx else 0.0 for i in range(n))
        else:
            weights = _action_weights(cand.search_dyads, cand.origin_ca, action_set)
            if weights is None:
                weights = _action_weights(population, cand.origin_ca, action_set)
            if weights is None:
                weights = tuple(1.0 / n for _ in range(n))
        if mode == "argmax":
            choice = _argmax_by_ca(weights, action_set)
        else:
            if rng is None:
                raise ValueError("weighted_sample mode needs an rng")
            choice = int(rng.choice(n, p=np.asarray(weights) / sum(weights)))
        flow[choice] += 1.0
        weighted.append(
            CandidateDriver(
                taxi_id=cand.taxi_id,
                origin_ca=cand.origin_ca,
                classification=cand.classification,
                search_dyads=cand.search_dyads,
                observed_district=cand.observed_district,
                decision_weights=weights,
            )
        )

    pickups = [0] * n
    if strata is not None:
        action_cas = set(action_set.community_areas)
        for trip in strata.trips_on(day):
            if window.admits(trip.start_ts) and trip.pickup_ca in action_cas:
                pickups[action_set.index_of_ca(trip.pickup_ca)] += 1

    return DecisionScenario(
        day=day,
        candidates=tuple(weighted),
        total_drivers=len(retained),
        deduced_flow=FlowDistribution(tuple(flow)),
        historical_pickups=tuple(pickups),
    )


def build_day_scenario(
    strata: TripStrata,
    day: date,
    action_set: ActionSet,
    mode: DecisionMode = "argmax",
    rng: np.random.Generator | None = None,
    lookback_days: int = 10,
    window: PickupWindow = PickupWindow(),
) -> DecisionScenario:
    """Full per-day pipeline: trace, candidates, search priors, scenario."""
    trace = build_trace_dyads(strata, day, action_set, window)
    candidates = identify_candidates(strata, day, trace, window, action_set)
    enriched = []
    for cand in candidates:
        if cand.classification == "no_pickup":
            dyads = build_search_dyads(strata, cand.taxi_id, day, lookback_days)
            cand = CandidateDriver(
                taxi_id=cand.taxi_id,
                origin_ca=cand.origin_ca,
                classification=cand.classification,
                search_dyads=dyads,
            )
        enriched.append(cand)
    return build_scenario(
        day, enriched, action_set, strata=strata, mode=mode, rng=rng, window=window
    )


@dataclass
class ScenarioSet:
    """Scenarios for the selected target days, in chronological order."""

    action_set: ActionSet
    scenarios: list[DecisionScenario]

    def by_day(self, day: date) -> DecisionScenario:
        for s in self.scenarios:
            if s.day == day:
                return s
        raise KeyError(f"no scenario for {day}")

    @property
    def days(self) -> list[date]:
        return [s.day for s in self.scenarios]

    def training_pairs(self) -> list[tuple[tuple[float, ...], tuple[int, ...]]]:
        """(deduced flow, observed pickups) pairs for model fitting."""
        return [
            (s.deduced_flow.counts, s.historical_pickups) for s in self.scenarios
        ]


def ingest(
    trips: Iterable[TripRecord],
    action_set: ActionSet,
    homogeneity: Callable[[date], bool] | Sequence[date] | None = None,
    stratum: StratumSpec = StratumSpec(),
    lookback_days: int = 10,
    window: PickupWindow = PickupWindow(),
) -> ScenarioSet:
    """Trips to scenarios: stratify, select target days, deduce flows."""
    strata = stratify_trips(trips, stratum)
    if homogeneity is None:
        days = strata.days
    else:
        days = select_target_days(strata, homogeneity)
    scenarios = []
    for day in days:
        try:
            scenarios.append(
                build_day_scenario(
                    strata, day, action_set, lookback_days=lookback_days, window=window
                )
            )
        except ValueError as exc:
            logger.warning("skipping %s: %s", day, exc)
    return ScenarioSet(action_set=action_set, scenarios=scenarios)


# --- file formats -------------------------------------------------------

TRIP_HEADER = ["taxi_id", "start_ts", "end_ts", "pickup_ca", "dropoff_ca"]


def write_trips_csv(path: str | Path, trips: Iterable[TripRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIP_HEADER)
        for t in trips:
            writer.writerow(
                [
                    t.taxi_id,
                    t.start_ts.isoformat(timespec="minutes"),
                    t.end_ts.isoformat(timespec="minutes"),
                    t.pickup_ca,
                    t.dropoff_ca,
                ]
            )


def read_trips_csv(path: str | Path) -> list[TripRecord]:
    trips = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRIP_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"trip file missing columns: {sorted(missing)}")
        for row in reader:
            trips.append(
                TripRecord(
                    taxi_id=row["taxi_id"],
                    start_ts=datetime.fromisoformat(row["start_ts"]),
                    end_ts=datetime.fromisoformat(row["end_ts"]),
                    pickup_ca=int(row["pickup_ca"]),
                    dropoff_ca=int(row["dropoff_ca"]),
                )
            )
    return trips


def action_set_to_dict(action_set: ActionSet) -> list[dict]:
    return [
        {
            "id": d.id,
            "label": d.label,
            "community_area": d.community_area,
            "position": list(d.position),
        }
        for d in action_set.districts
    ]


def action_set_from_dict(data: Sequence[dict]) -> ActionSet:
    return ActionSet(
        tuple(
            District(
                id=d["id"],
                label=d["label"],
                community_area=int(d["community_area"]),
                position=tuple(float(x) for x in d["position"]),
            )
            for d in data
        )
    )


def scenario_set_to_json(scenario_set: ScenarioSet) -> dict:
    return {
        "schema": "scenario-set/1",
        "districts": action_set_to_dict(scenario_set.action_set),
        "days": [
            {
                "day": s.day.isoformat(),
                "total_drivers": s.total_drivers,
                "deduced_flow": list(s.deduced_flow.counts),
                "historical_pickups": list(s.historical_pickups),
                "candidates": [
                    {
                        "taxi_id": c.taxi_id,
                        "origin_ca": c.origin_ca,
                        "classification": c.classification,
                        "observed": c.observed_district,
                        "weights": list(c.decision_weights or ()),
                    }
                    for c in s.candidates
                ],
            }
            for s in scenario_set.scenarios
        ],
    }


def scenario_set_from_json(data: dict) -> ScenarioSet:
    if data.get("schema") != "scenario-set/1":
        raise ValueError("not a scenario-set/1 document")
    action_set = action_set_from_dict(data["districts"])
    scenarios = []
    for entry in data["days"]:
        candidates = tuple(
            CandidateDriver(
                taxi_id=c["taxi_id"],
                origin_ca=int(c["origin_ca"]),
                classification=c["classification"],
                observed_district=c.get("observed"),
                decision_weights=tuple(float(w) for w in c["weights"]),
            )
            for c in entry["candidates"]
        )
        scenarios.append(
            DecisionScenario(
                day=date.fromisoformat(entry["day"]),
                candidates=candidates,
                total_drivers=int(entry["total_drivers"]),
                deduced_flow=FlowDistribution(
                    tuple(float(x) for x in entry["deduced_flow"])
                ),
                historical_pickups=tuple(
                    int(x) for x in entry["historical_pickups"]
                ),
            )
        )
    return ScenarioSet(action_set=action_set, scenarios=scenarios)


def save_scenarios(path: str | Path, scenario_set: ScenarioSet) -> None:
    Path(path).write_text(
        json.dumps(scenario_set_to_json(scenario_set), indent=2, sort_keys=True)
    )


def load_scenarios(path: str | Path) -> ScenarioSet:
    return scenario_set_from_json(json.loads(Path(path).read_text()))
