"""Shared desk-scale fixtures: one calibrated artifact bundle per session."""

import pytest

from pickupgame.harness import build_artifacts
from pickupgame.presets import RATIONAL_BEHAVIOR, desk_config


@pytest.fixture(scope="session")
def tiny_config():
    """Small calibrated config used across harness and service tests."""
    return desk_config(
        seed=11,
        artifact_seed=5,
        roster_scale=0.05,
        display_frames=120,
        outcome_replicates=150,
        system_replicates=50,
        n_training_days=40,
    )


@pytest.fixture(scope="session")
def tiny_artifacts(tiny_config):
    return build_artifacts(tiny_config)


@pytest.fixture(scope="session")
def rational_config(tiny_config):
    from dataclasses import replace

    return replace(tiny_config, behavior=RATIONAL_BEHAVIOR, seed=23)
