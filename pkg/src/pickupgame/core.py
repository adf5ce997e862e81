"""Domain vocabulary of the game and truncated-Poisson level arithmetic.

The game is a repeated three-district search congestion game. Agents are
assigned a strategic-sophistication level k in {0, 1, 2} whose population
frequencies follow a Poisson distribution truncated at the maximum level
and renormalized. Two rounding conventions are supported throughout:

``exact_paper``
    Proportions are rounded to the nearest tenth and integer level counts
    to the nearest multiple of ten, reproducing the published arithmetic
    of the original study (the rounded counts may not sum to the number
    of drivers).
``largest_remainder``
    Full-precision proportions with Hamilton (largest-remainder)
    apportionment for integer counts, which always sum exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

RoundingMode = Literal["exact_paper", "largest_remainder"]

DEFAULT_MAX_LEVEL = 2


@dataclass(frozen=True)
class District:
    """One of the three actions: a city district drivers may search."""

    id: str
    label: str
    community_area: int
    position: tuple[float, float]


@dataclass(frozen=True)
class ActionSet:
    """The game's action set: exactly three districts in canonical order."""

    districts: tuple[District, District, District]

    def __post_init__(self) -> None:
        if len(self.districts) != 3:
            raise ValueError("an action set holds exactly 3 districts")
        ids = [d.id for d in self.districts]
        if len(set(ids)) != 3:
            raise ValueError("district ids must be unique")
        cas = [d.community_area for d in self.districts]
        if len(set(cas)) != 3:
            raise ValueError("district community areas must be unique")
        positions = [d.position for d in self.districts]
        if len(set(positions)) != 3:
            raise ValueError("district positions must be pairwise distinct")

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.districts)

    @property
    def community_areas(self) -> tuple[int, ...]:
        return tuple(d.community_area for d in self.districts)

    @property
    def positions(self) -> tuple[tuple[float, float], ...]:
        return tuple(d.position for d in self.districts)

    def index_of(self, district_id: str) -> int:
        return self.ids.index(district_id)

    def index_of_ca(self, community_area: int) -> int:
        return self.community_areas.index(community_area)

    def __len__(self) -> int:
        return 3


# Approximate downtown geometry: community-area centroids of the three
# districts expressed in a local grid and scaled to unit mean pairwise
# distance. Overridable through config; the collinear preset below gives
# round numbers for tests.
DEFAULT_ACTION_SET = ActionSet(
    (
        District("west", "West District", 28, (-0.967, -0.313)),
        District("north", "North District", 8, (-0.228, 0.697)),
        District("east", "East District", 32, (0.0, 0.0)),
    )
)

COLLINEAR_ACTION_SET = ActionSet(
    (
        District("west", "West District", 28, (0.0, 0.0)),
        District("north", "North District", 8, (1.0, 0.0)),
        District("east", "East District", 32, (2.0, 0.0)),
    )
)


@dataclass(frozen=True)
class FlowDistribution:
    """Per-district driver counts. Counts are non-negative reals."""

    counts: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.counts) < 2:
            raise ValueError("a flow distribution needs at least two bins")
        if any(c < 0 for c in self.counts):
            raise ValueError("flow counts must be non-negative")
        object.__setattr__(self, "counts", tuple(float(c) for c in self.counts))

    @property
    def total(self) -> float:
        return float(sum(self.counts))

    def scaled_to(self, total: float) -> "FlowDistribution":
        """Same proportions, rescaled to a new total mass."""
        cur = self.total
        if cur <= 0:
            raise ValueError("cannot rescale an empty flow")
        return FlowDistribution(tuple(c * total / cur for c in self.counts))


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _round_to_tenth(x: float) -> float:
    return _round_half_up(x * 10.0) / 10.0


def largest_remainder_round(quotas: Sequence[float], total: int) -> tuple[int, ...]:
    """Hamilton apportionment: integer counts summing exactly to ``total``.

    Each count differs from its quota by less than 1. Ties in fractional
    part go to the lower index.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    floors = [math.floor(q) for q in quotas]
    remainder = total - sum(floors)
    if remainder < 0 or remainder > len(quotas):
        raise ValueError("quotas do not sum to the requested total")
    fracs = sorted(
        range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i)
    )
    counts = list(floors)
    for i in fracs[:remainder]:
        counts[i] += 1
    return tuple(counts)


@dataclass(frozen=True)
class LevelSplit:
    """Population frequencies of levels 0..max_level.

    ``proportions`` follow the active rounding mode; ``lam`` records the
    Poisson rate the split was derived from, when there was one.
    """

    proportions: tuple[float, ...]
    rounding_mode: RoundingMode = "largest_remainder"
    lam: float | None = None

    def __post_init__(self) -> None:
        p = self.proportions
        if not p or any(v < 0 for v in p):
            raise ValueError("proportions must be non-negative")
        total = sum(p)
        if self.rounding_mode == "exact_paper":
            if any(abs(v * 10 - round(v * 10)) > 1e-9 for v in p):
                raise ValueError("exact_paper proportions must be tenths")
            if not (0.9 - 1e-9 <= total <= 1.1 + 1e-9):
                raise ValueError("exact_paper proportions must sum to 0.9..1.1")
        else:
            if abs(total - 1.0) > 1e-9:
                raise ValueError("proportions must sum to 1")

    @property
    def max_level(self) -> int:
        return len(self.proportions) - 1


@dataclass(frozen=True)
class MixtureBelief:
    """What a level-k agent believes about everyone else.

    Proportions cover levels 0..owner_level-1. A level-1 agent believes
    the population is all level-0; level-0 holds no belief at all.
    """

    owner_level: int
    proportions: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.owner_level < 1:
            raise ValueError("level-0 holds no belief")
        if len(self.proportions) != self.owner_level:
            raise ValueError("belief must cover levels 0..owner_level-1")
        total = sum(self.proportions)
        tenths = all(abs(v * 10 - round(v * 10)) < 1e-9 for v in self.proportions)
        if tenths:
            if not (0.9 - 1e-9 <= total <= 1.1 + 1e-9):
                raise ValueError("belief proportions must sum to ~1")
        elif abs(total - 1.0) > 1e-9:
            raise ValueError("belief proportions must sum to 1")

    def normalized(self) -> tuple[float, ...]:
        total = sum(self.proportions)
        return tuple(v / total for v in self.proportions)


def truncate_and_rescale(
    values: Sequence[float],
    mode: RoundingMode = "largest_remainder",
    lam: float | None = None,
) -> LevelSplit:
    """Renormalize per-level counts (or pmf mass) into a LevelSplit.

    The inputs are the observed or theoretical frequencies of levels
    0..max_level; anything beyond the truncation level has already been
    dropped. In ``exact_paper`` mode the normalized proportions are then
    rounded to the nearest tenth.
    """
    if not values:
        raise ValueError("degenerate level distribution: no levels")
    total = float(sum(values))
    if total <= 0 or any(v < 0 for v in values):
        raise ValueError("degenerate level distribution")
    normalized = [v / total for v in values]
    if mode == "exact_paper":
        proportions = tuple(_round_to_tenth(p) for p in normalized)
    else:
        proportions = tuple(normalized)
    return LevelSplit(proportions=proportions, rounding_mode=mode, lam=lam)


def poisson_split(
    lam: float,
    max_level: int = DEFAULT_MAX_LEVEL,
    mode: RoundingMode = "largest_remainder",
) -> LevelSplit:
    """Split from the Poisson(lam) pmf truncated at ``max_level``."""
    if lam <= 0:
        raise ValueError("Poisson rate must be positive")
    pmf = [math.exp(-lam) * lam**k / math.factorial(k) for k in range(max_level + 1)]
    return truncate_and_rescale(pmf, mode=mode, lam=lam)


def endowed_mixture(split: LevelSplit, k: int) -> MixtureBelief:
    """The belief endowed to a level-k agent: the split renormalized over
    levels 0..k-1 (rounded to tenths in exact_paper mode)."""
    if k < 1:
        raise ValueError("level-0 holds no belief")
    if k > split.max_level:
        raise ValueError(f"level {k} exceeds the split's max level")
    head = split.proportions[:k]
    total = sum(head)
    if total <= 0:
        raise ValueError("degenerate level distribution")
    normalized = [v / total for v in head]
    if split.rounding_mode == "exact_paper":
        proportions = tuple(_round_to_tenth(p) for p in normalized)
    else:
        proportions = tuple(normalized)
    return MixtureBelief(owner_level=k, proportions=proportions)


def level_counts(split: LevelSplit, n_drivers: int) -> tuple[int, ...]:
    """Integer level composition for a scenario of ``n_drivers``.

    exact_paper: round(proportion x N) to the nearest multiple of ten;
    the sum may differ from N. largest_remainder: Hamilton apportionment,
    summing exactly to N.
    """
    if n_drivers <= 0:
        raise ValueError("n_drivers must be positive")
    quotas = [p * n_drivers for p in split.proportions]
    if split.rounding_mode == "exact_paper":
        return tuple(_round_half_up(q / 10.0) * 10 for q in quotas)
    return largest_remainder_round(quotas, n_drivers)
