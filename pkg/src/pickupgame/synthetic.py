"""Deterministic synthetic trip corpora.

Builds an origin-destination corpus whose dyad structure realizes
configured per-district flows: each target weekday gets the requested
number of candidate drivers (observed 9 AM pickups plus idle searchers
whose histories favor their district), so the deduction pipeline recovers
the configured flows and pickup counts. Warmup weekdays before the first
target day populate the ten-day search histories.

Every timestamp and assignment derives from the spec seed, so a spec
always generates byte-identical corpora.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta

from .core import ActionSet, DEFAULT_ACTION_SET
from .pipeline import TripRecord
from .seeds import derive_rng

# CA codes with no role in the game, used for origins and noise trips
RESIDENTIAL_CA = 5
ELSEWHERE_CA = 6


@dataclass(frozen=True)
class DayProfile:
    """Explicit calibration for one target day."""

    flows: tuple[int, int, int]
    pickups: tuple[int, int, int]

    def __post_init__(self) -> None:
        if any(f <= 0 for f in self.flows):
            raise ValueError("day profile flows must be positive")
        if any(not (1 <= p <= f) for p, f in zip(self.pickups, self.flows)):
            raise ValueError("day profile pickups must be in 1..flow")


@dataclass(frozen=True)
class SyntheticSpec:
    n_days: int
    base_flow: int
    seed: int
    skew: tuple[float, float, float] = (0.45, 0.25, 0.30)
    warmup_days: int = 8
    flow_jitter: float = 0.08
    conversion: tuple[float, float, float] = (1.6, 1.2, 2.1)
    conversion_exponent: tuple[float, float, float] = (0.72, 0.80, 0.66)
    pickup_noise: float = 0.05
    prior_mix: float = 0.12
    origins: tuple[int, ...] = (24, 7)
    start: date = date(2014, 1, 6)
    bin_minutes: int = 1
    include_offpeak_noise: bool = True
    day_profiles: tuple[DayProfile, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_days <= 0:
            raise ValueError("n_days must be positive")
        if self.base_flow <= 0:
            raise ValueError("base_flow must be positive")
        if abs(sum(self.skew) - 1.0) > 1e-9:
            raise ValueError("skew must sum to 1")
        if self.day_profiles is not None and len(self.day_profiles) != self.n_days:
            raise ValueError("day_profiles must cover every target day")


def weekday_sequence(start: date, count: int) -> list[date]:
    days = []
    cursor = start
    while len(days) < count:
        if cursor.weekday() < 5:
            days.append(cursor)
        cursor += timedelta(days=1)
    return days


def target_days(spec: SyntheticSpec) -> list[date]:
    """The post-warmup weekdays the corpus is calibrated for."""
    all_days = weekday_sequence(spec.start, spec.warmup_days + spec.n_days)
    return all_days[spec.warmup_days :]


def _bin_ts(ts: datetime, minutes: int) -> datetime:
    if minutes <= 1:
        return ts
    total = ts.hour * 60 + ts.minute
    binned = (total // minutes) * minutes
    return ts.replace(hour=binned // 60, minute=binned % 60)


def _stochastic_profile(spec: SyntheticSpec, rng) -> DayProfile:
    flows = []
    pickups = []
    for d in range(3):
        jitter = 1.0 + spec.flow_jitter * float(rng.uniform(-1, 1))
        flow = max(2, round(spec.base_flow * spec.skew[d] * jitter))
        noise = float(rng.normal(0.0, spec.pickup_noise))
        raw = spec.conversion[d] * flow ** spec.conversion_exponent[d]
        pick = round(raw * 2.718281828459045**noise)
        flows.append(flow)
        pickups.append(min(flow, max(1, pick)))
    return DayProfile(tuple(flows), tuple(pickups))


def generate_synthetic(
    spec: SyntheticSpec, action_set: ActionSet = DEFAULT_ACTION_SET
) -> list[TripRecord]:
    """Emit the trip corpus realizing the spec's per-day profiles."""
    all_days = weekday_sequence(spec.start, spec.warmup_days + spec.n_days)
    targets = set(target_days(spec))

    profiles: dict[date, DayProfile] = {}
    target_idx = 0
    for i, day in enumerate(all_days):
        rng = derive_rng(spec.seed, "profile", i)
        if day in targets and spec.day_profiles is not None:
            profiles[day] = spec.day_profiles[target_idx]
        else:
            profiles[day] = _stochastic_profile(spec, rng)
        if day in targets:
            target_idx += 1

    max_flow = [max(p.flows[d] for p in profiles.values()) for d in range(3)]
    rosters = [
        [f"veh-{action_set.ids[d]}-{i:04d}" for i in range(max_flow[d])]
        for d in range(3)
    ]

    def origin_of(group: int, member: int) -> int:
        return spec.origins[(group + member) % len(spec.origins)]

    action_cas = action_set.community_areas
    trips: list[TripRecord] = []

    def emit(taxi: str, day: date, h1: int, m1: int, h2: int, m2: int,
             pickup_ca: int, dropoff_ca: int) -> None:
        start = _bin_ts(datetime.combine(day, time(h1, m1)), spec.bin_minutes)
        end = _bin_ts(datetime.combine(day, time(h2, m2)), spec.bin_minutes)
        trips.append(TripRecord(taxi, start, end, pickup_ca, dropoff_ca))

    for day_idx, day in enumerate(all_days):
        profile = profiles[day]
        covered_origins: set[int] = set()
        for group in range(3):
            flow = profile.flows[group]
            pickups = profile.pickups[group]
            # a fresh random subset each day keeps every driver's ten-day
            # search history populated (no long inactivity gaps)
            roster_rng = derive_rng(spec.seed, "active", day_idx, group)
            chosen = roster_rng.choice(max_flow[group], size=flow, replace=False)
            active = [(int(idx), rosters[group][int(idx)]) for idx in chosen]
            for slot, (member, taxi) in enumerate(active):
                origin = origin_of(group, member)
                rng = derive_rng(spec.seed, "driver", day_idx, group, member)
                jm = int(rng.integers(0, 5))
                # three early fares ending at the origin; the two pairs
                # they form encode the driver's search prior
                hists = [
                    int(rng.integers(0, 3))
                    if rng.random() < spec.prior_mix
                    else group
                    for _ in range(2)
                ]
                emit(taxi, day, 7, 0 + jm, 7, 12 + jm, RESIDENTIAL_CA, origin)
                emit(taxi, day, 7, 30 + jm, 7, 42 + jm, action_cas[hists[0]], origin)
                emit(taxi, day, 8, 0 + jm, 8, 12 + jm, action_cas[hists[1]], origin)
                is_pickup_driver = slot < pickups
                if is_pickup_driver and origin not in covered_origins:
                    # one generously idle pickup per origin keeps the
                    # back-trace threshold wide enough for every searcher
                    covered_origins.add(origin)
                    emit(taxi, day, 8, 25, 8, 35, RESIDENTIAL_CA, origin)
                    emit(taxi, day, 9, 5, 9, 20, action_cas[group], 32)
                elif is_pickup_driver:
                    dm = int(rng.integers(44, 56))
                    pm = int(rng.integers(0, 11))
                    emit(taxi, day, 8, 30, 8, dm, RESIDENTIAL_CA, origin)
                    emit(taxi, day, 9, pm, 9, pm + 12, action_cas[group], 32)
                else:
                    dm = int(rng.integers(46, 59))
                    emit(taxi, day, 8, 30, 8, dm, RESIDENTIAL_CA, origin)

        # two candidates who find 9 AM work outside the action districts
        for k in range(2):
            taxi = f"veh-elsewhere-{k}"
            origin = spec.origins[k % len(spec.origins)]
            emit(taxi, day, 8, 30, 8, 50, RESIDENTIAL_CA, origin)
            emit(taxi, day, 9, 2, 9, 30, ELSEWHERE_CA, ELSEWHERE_CA)

        if spec.include_offpeak_noise:
            emit("veh-noise-0", day, 12, 30, 12, 50, 32, 8)
            if day.weekday() == 4:
                saturday = day + timedelta(days=1)
                noise_start = _bin_ts(
                    datetime.combine(saturday, time(8, 30)), spec.bin_minutes
                )
                trips.append(
                    TripRecord(
                        "veh-noise-1",
                        noise_start,
                        noise_start + timedelta(minutes=20),
                        28,
                        32,
                    )
                )

    trips.sort(key=lambda t: (t.start_ts, t.taxi_id, t.end_ts))
    return trips
