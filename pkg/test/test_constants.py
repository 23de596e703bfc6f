"""
Test shared constants.
"""

import numpy as np

from src.pofsm.utils.constants import (
    CHANNEL_GRID,
    DEFAULT_BASE_LR,
    DEFAULT_CLUSTERS,
    DEFAULT_HEAD_MULTIPLIER,
    DEFAULT_LR_GAMMA,
    DEFAULT_LR_STEP,
    DEFAULT_TOP_K,
    FROZEN_CONV_LAYERS,
    MOTION_DIRECTIONS,
    MOTION_GROUPS,
    OSCILLATING_MOTIONS,
    SHAPE_KINDS,
    SOURCE_TASK,
    TARGET_TASK,
    WEIGHTS_MAGIC,
)


class TestMethodDefaults:
    """Test the published training defaults."""

    def test_flow_defaults(self):
        """Test cluster count and Top-K."""
        assert DEFAULT_CLUSTERS == 40
        assert DEFAULT_TOP_K == 10

    def test_schedule_defaults(self):
        """Test the step learning-rate schedule and fine-tuning constants."""
        assert DEFAULT_BASE_LR == 0.001
        assert DEFAULT_LR_STEP == 70000
        assert DEFAULT_LR_GAMMA == 0.1
        assert DEFAULT_HEAD_MULTIPLIER == 10
        assert FROZEN_CONV_LAYERS == 3

    def test_weights_magic(self):
        """Test the weights file magic is four bytes."""
        assert WEIGHTS_MAGIC == b"PSMW"

    def test_channel_grid_is_exact(self):
        """Test that grid values and their complements are exact in float32."""
        v = np.float32(12345 / CHANNEL_GRID)
        assert np.float32(1.0) - v == np.float32(1.0 - 12345 / CHANNEL_GRID)


class TestMotionLayout:
    """Test the synthetic motion classes."""

    def test_directions_are_unit_or_zero(self):
        """Test every direction is a unit vector except still."""
        for motion, (du, dv) in MOTION_DIRECTIONS.items():
            expected = 0.0 if motion == "still" else 1.0
            assert np.hypot(du, dv) == expected

    def test_every_motion_has_a_group(self):
        """Test that groups cover all motion classes."""
        assert set(MOTION_GROUPS) == set(MOTION_DIRECTIONS)

    def test_tasks_use_known_shapes_and_motions(self):
        """Test source and target tasks against the known vocabularies."""
        for task in (SOURCE_TASK, TARGET_TASK):
            assert set(task["shapes"]) <= set(SHAPE_KINDS)
            assert set(task["motions"]) <= set(MOTION_DIRECTIONS)

    def test_oscillating_motions_are_opt_in(self):
        """Test that oscillating classes are known motions outside the default tasks."""
        assert set(OSCILLATING_MOTIONS) <= set(MOTION_DIRECTIONS)
        for task in (SOURCE_TASK, TARGET_TASK):
            assert set(task["motions"]).isdisjoint(OSCILLATING_MOTIONS)

    def test_tasks_have_disjoint_shapes(self):
        """Test that target shapes never appear in the source task."""
        assert set(SOURCE_TASK["shapes"]).isdisjoint(TARGET_TASK["shapes"])
