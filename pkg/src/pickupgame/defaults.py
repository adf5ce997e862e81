"""Published defaults for the experiment's design constants.

The day list and the two fixed presentation orders ship as data: entry 0
is the shared practice day, entries 1..15 are the scored trials. The
alternate order is stored as a permutation mapping each main-order trial
index to its position in the alternate order (index 0 is shared by both
orders).
"""

from __future__ import annotations

from .core import LevelSplit, MixtureBelief

# main-experiment level frequencies: Poisson(1.5) truncated at level 2,
# renormalized and rounded to tenths
MAIN_SPLIT = LevelSplit((0.3, 0.4, 0.3), rounding_mode="exact_paper", lam=1.5)
MAIN_L2_MIXTURE = MixtureBelief(owner_level=2, proportions=(0.4, 0.6))

# alternate composition: Poisson(3), skewed toward sophisticated agents.
# The published proportions are twentieths, not tenths, so the split
# carries the exact-sum rounding mode.
ROBUST_COMPOSITION_SPLIT = LevelSplit(
    (0.15, 0.35, 0.50), rounding_mode="largest_remainder", lam=3.0
)
ROBUST_COMPOSITION_L2_MIXTURE = MixtureBelief(owner_level=2, proportions=(0.2, 0.8))

# per-treatment-cell recruitment targets
MAIN_L1_PER_CELL = 120
MAIN_L2_PER_CELL = 90
ROBUST_ORDER_L1_PER_CELL = 60
ROBUST_ORDER_L2_PER_CELL = 45
ROBUST_COMPOSITION_L2_PER_CELL = 75

# historical day list in main presentation order; index 0 is the practice
# day shared by both orders
TRIAL_DATES = (
    "2014-07-22",
    "2014-05-13",
    "2015-05-21",
    "2014-06-05",
    "2015-06-25",
    "2014-11-07",
    "2015-06-30",
    "2015-10-26",
    "2015-10-22",
    "2015-10-14",
    "2014-09-26",
    "2014-12-05",
    "2015-08-28",
    "2014-05-22",
    "2014-10-24",
    "2014-09-29",
)

# position of each main-order trial in the alternate fixed order
MAIN_TO_ALTERNATE_POSITION = (0, 6, 14, 10, 7, 12, 15, 1, 9, 4, 3, 8, 5, 13, 2, 11)


def alternate_order(days: tuple[str, ...]) -> tuple[str, ...]:
    """Reorder a 16-day main-order list into the alternate fixed order."""
    if len(days) != len(MAIN_TO_ALTERNATE_POSITION):
        raise ValueError(
            f"the alternate order is defined for "
            f"{len(MAIN_TO_ALTERNATE_POSITION)} days, got {len(days)}"
        )
    out = [""] * len(days)
    for main_idx, position in enumerate(MAIN_TO_ALTERNATE_POSITION):
        out[position] = days[main_idx]
    return tuple(out)
