"""
Test fine-tune policies, the learning-rate schedule and frozen layers under SGD.
"""

import numpy as np
import pytest
from rich.console import Console

from src.pofsm.engine import FineTunePolicy, Network, Scenario, TrainState, sgd_step
from src.pofsm.errors import ConfigError, ShapeError
from src.pofsm.services.training import TrainConfig, Trainer


def _quiet_trainer(iterations, **kwargs):
    config = TrainConfig(iterations=iterations, batch_size=4, base_lr=0.01, seed=0, **kwargs)
    return Trainer(config, console=Console(quiet=True))


def _train(network, policy, iterations=500):
    rng = np.random.default_rng(7)
    inputs = rng.random((8, 8, 8, 3))
    targets = rng.integers(0, network.spec.num_classes, size=8)
    return _quiet_trainer(iterations).fit_classifier(network, inputs, targets, policy, domain="rgb")


class TestScenario:
    """Test scenario parsing."""

    @pytest.mark.parametrize("text", ["top5_layers", "TOP5-LAYERS", " Top5_Layers "])
    def test_parse_spellings(self, text):
        """Test case and dash tolerant parsing."""
        assert Scenario.parse(text) == Scenario.TOP5_LAYERS

    def test_parse_unknown(self):
        """Test that unknown scenarios raise ConfigError."""
        with pytest.raises(ConfigError):
            Scenario.parse("half")

    def test_labels(self):
        """Test human-readable labels."""
        assert Scenario.HEAD_ONLY.label == "Fixed feature extractor"


class TestFineTunePolicy:
    """Test per-layer multipliers of each scenario."""

    def test_learning_rate_steps(self):
        """Test base_lr * gamma ** floor(t / step)."""
        policy = FineTunePolicy(base_lr=0.001, lr_step_iters=70000, lr_gamma=0.1)
        assert policy.learning_rate(0) == 0.001
        assert policy.learning_rate(69999) == 0.001
        assert policy.learning_rate(70000) == pytest.approx(1e-4)
        assert policy.learning_rate(140000) == pytest.approx(1e-5)

    def test_all_layers(self, classifier_spec):
        """Test ALL_LAYERS: everything 1, head 10."""
        policy = FineTunePolicy.for_scenario(Scenario.ALL_LAYERS, classifier_spec)
        assert [policy.multiplier(n) for n in ("C1", "C2", "C3", "C4", "FC5")] == [1.0] * 5
        assert policy.multiplier("FC6") == 10.0

    def test_top5_layers(self, classifier_spec):
        """Test TOP5_LAYERS freezes exactly the first three convolutions."""
        policy = FineTunePolicy.for_scenario("TOP5_LAYERS", classifier_spec)
        assert [policy.multiplier(n) for n in ("C1", "C2", "C3")] == [0.0] * 3
        assert policy.multiplier("C4") == 1.0
        assert policy.multiplier("FC5") == 1.0
        assert policy.multiplier("FC6") == 10.0

    def test_head_only(self, classifier_spec):
        """Test HEAD_ONLY trains the head alone."""
        policy = FineTunePolicy.for_scenario(Scenario.HEAD_ONLY, classifier_spec)
        for name in classifier_spec.parametric_layer_names()[:-1]:
            assert policy.multiplier(name) == 0.0
        assert policy.multiplier("FC6") == 10.0

    def test_scratch(self, classifier_spec):
        """Test SCRATCH: every layer including the head at 1."""
        policy = FineTunePolicy.for_scenario(Scenario.SCRATCH, classifier_spec)
        for name in classifier_spec.parametric_layer_names():
            assert policy.multiplier(name) == 1.0

    def test_custom_head_multiplier(self, classifier_spec):
        """Test that schedule overrides reach the policy."""
        policy = FineTunePolicy.for_scenario(Scenario.ALL_LAYERS, classifier_spec,
                                             base_lr=0.5, head_multiplier=3.0)
        assert policy.base_lr == 0.5
        assert policy.multiplier("FC6") == 3.0

    def test_negative_multiplier(self):
        """Test that negative multipliers are configuration errors."""
        with pytest.raises(ConfigError):
            FineTunePolicy(multipliers={"C1": -1.0})
        with pytest.raises(ConfigError):
            FineTunePolicy(head_multiplier=-0.1)

    @pytest.mark.parametrize("kwargs", [{"base_lr": 0}, {"lr_step_iters": 0}, {"lr_gamma": 0}])
    def test_bad_schedule(self, kwargs):
        """Test schedule validation."""
        with pytest.raises(ConfigError):
            FineTunePolicy(**kwargs)


class TestSgdStep:
    """Test one SGD update."""

    def test_update_rule(self, classifier_spec):
        """Test param <- param - lr * multiplier * grad."""
        network = Network(classifier_spec, seed=0, param_dtype=np.float64)
        before = network.state_dict()
        grads = {name: {key: np.ones_like(value) for key, value in params.items()}
                 for name, params in before.items()}
        policy = FineTunePolicy.for_scenario(Scenario.TOP5_LAYERS, classifier_spec, base_lr=0.01)
        state = sgd_step(TrainState(network), grads, policy)

        assert state.iteration == 1
        after = network.parameters()
        np.testing.assert_array_equal(after["C1"]["W"], before["C1"]["W"])
        np.testing.assert_allclose(after["C4"]["W"], before["C4"]["W"] - 0.01, rtol=0, atol=1e-15)
        np.testing.assert_allclose(after["FC6"]["b"], before["FC6"]["b"] - 0.1, rtol=0, atol=1e-15)

    def test_gradient_shape_mismatch(self, classifier_spec):
        """Test ShapeError for a gradient of the wrong shape."""
        network = Network(classifier_spec, seed=0)
        policy = FineTunePolicy.for_scenario(Scenario.SCRATCH, classifier_spec)
        with pytest.raises(ShapeError):
            sgd_step(TrainState(network), {"C1": {"W": np.zeros((1, 1))}}, policy)


class TestFrozenLayers:
    """Test that frozen layers stay bit-identical across a full training run."""

    def test_top5_keeps_first_three_convolutions(self, classifier_spec):
        """Test 500 TOP5_LAYERS steps leave C1-C3 untouched and move the rest."""
        network = Network(classifier_spec, seed=2)
        before = network.state_dict()
        policy = FineTunePolicy.for_scenario(Scenario.TOP5_LAYERS, classifier_spec, base_lr=0.01)
        log = _train(network, policy)

        assert len(log) == 500
        for name in ("C1", "C2", "C3"):
            for key in ("W", "b"):
                np.testing.assert_array_equal(network.parameters()[name][key], before[name][key])
        assert not np.array_equal(network.parameters()["C4"]["W"], before["C4"]["W"])
        assert not np.array_equal(network.parameters()["FC6"]["W"], before["FC6"]["W"])

    def test_head_only_keeps_everything_but_head(self, classifier_spec):
        """Test 500 HEAD_ONLY steps only move the head."""
        network = Network(classifier_spec, seed=2)
        before = network.state_dict()
        policy = FineTunePolicy.for_scenario(Scenario.HEAD_ONLY, classifier_spec, base_lr=0.01)
        _train(network, policy)

        for name in ("C1", "C2", "C3", "C4", "FC5"):
            for key in ("W", "b"):
                np.testing.assert_array_equal(network.parameters()[name][key], before[name][key])
        assert not np.array_equal(network.parameters()["FC6"]["W"], before["FC6"]["W"])
