"""
Test the binary weights file and the model metadata sidecar.
"""

import json
import struct

import numpy as np
import pytest

from src.pofsm.engine import Network, load_weights, read_network, save_weights
from src.pofsm.errors import ConfigError, CorruptFileError, IncompatibleArchitectureError
from src.pofsm.services.model_store import load_model, read_model_info, save_model, sidecar_path


class TestWeightsFile:
    """Test save/load of parameters."""

    def test_round_trip_is_bit_exact(self, classifier_spec, tmp_path):
        """Test that every parameter survives save and load unchanged."""
        network = Network(classifier_spec, seed=11)
        path = save_weights(network, tmp_path / "net.weights")
        restored = read_network(classifier_spec, path)
        for name, params in network.parameters().items():
            for key, value in params.items():
                np.testing.assert_array_equal(restored.parameters()[name][key], value)

    def test_header_layout(self, classifier_spec, tmp_path):
        """Test magic, version, digest and value count in the header."""
        network = Network(classifier_spec, seed=0)
        data = save_weights(network, tmp_path / "net.weights").read_bytes()
        magic, version, digest, width, count = struct.unpack_from("<4sI32sIQ", data)
        assert magic == b"PSMW"
        assert version == 1
        assert digest == classifier_spec.digest()
        assert width == 4
        assert count == classifier_spec.parameter_count()
        assert len(data) == struct.calcsize("<4sI32sIQ") + 4 * count

    def test_float64_networks_keep_precision(self, classifier_spec, tmp_path):
        """Test that float64 parameters are stored as 8-byte values."""
        network = Network(classifier_spec, seed=1, param_dtype=np.float64)
        path = save_weights(network, tmp_path / "net.weights")
        restored = read_network(classifier_spec, path, param_dtype=np.float64)
        np.testing.assert_array_equal(restored.parameters()["FC5"]["W"],
                                      network.parameters()["FC5"]["W"])

    def test_bad_magic(self, classifier_spec, tmp_path):
        """Test that a foreign file is rejected."""
        path = tmp_path / "bogus.weights"
        path.write_bytes(b"NOPE" + bytes(100))
        with pytest.raises(CorruptFileError):
            read_network(classifier_spec, path)

    def test_truncated(self, classifier_spec, tmp_path):
        """Test that a truncated body is rejected."""
        path = save_weights(Network(classifier_spec), tmp_path / "net.weights")
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CorruptFileError):
            read_network(classifier_spec, path)

    def test_truncated_header(self, classifier_spec, tmp_path):
        """Test a file shorter than the header."""
        path = tmp_path / "short.weights"
        path.write_bytes(b"PSMW")
        with pytest.raises(CorruptFileError):
            read_network(classifier_spec, path)

    def test_incompatible_architecture(self, classifier_spec, tmp_path):
        """Test loading into a network with a different head size."""
        path = save_weights(Network(classifier_spec), tmp_path / "net.weights")
        other = Network(classifier_spec.with_num_classes(5))
        with pytest.raises(IncompatibleArchitectureError):
            load_weights(other, path)

    def test_incompatible_is_config_error(self):
        """Test that architecture mismatches map to the configuration exit code."""
        assert issubclass(IncompatibleArchitectureError, ConfigError)


class TestModelStore:
    """Test weights plus JSON sidecar."""

    def test_save_and_load(self, classifier_spec, tmp_path):
        """Test that a model is rebuilt from its path alone."""
        network = Network(classifier_spec, seed=4)
        path = save_model(network, tmp_path / "model.weights", classes=["a", "b", "c"],
                          groups={"a": "g1", "b": "g1", "c": "g2"}, domain="rgb",
                          extra={"loss": "V2"})
        loaded, info = load_model(path)

        assert info.spec == classifier_spec
        assert info.classes == ["a", "b", "c"]
        assert info.groups["c"] == "g2"
        assert info.domain == "rgb"
        assert info.extra == {"loss": "V2"}
        np.testing.assert_array_equal(loaded.parameters()["C2"]["W"],
                                      network.parameters()["C2"]["W"])

    def test_missing_weights(self, tmp_path):
        """Test that a missing weights file is a configuration error."""
        with pytest.raises(ConfigError):
            read_model_info(tmp_path / "absent.weights")

    def test_missing_sidecar(self, classifier_spec, tmp_path):
        """Test that weights without metadata are a configuration error."""
        path = save_weights(Network(classifier_spec), tmp_path / "bare.weights")
        with pytest.raises(ConfigError):
            read_model_info(path)

    def test_tampered_sidecar_digest(self, classifier_spec, tmp_path):
        """Test that a sidecar whose digest disagrees with its spec is rejected."""
        path = save_model(Network(classifier_spec), tmp_path / "model.weights")
        meta = sidecar_path(path)
        data = json.loads(meta.read_text())
        data["digest"] = "00" * 32
        meta.write_text(json.dumps(data))
        with pytest.raises(CorruptFileError):
            read_model_info(path)

    def test_malformed_sidecar(self, classifier_spec, tmp_path):
        """Test that invalid JSON is reported as a corrupt file."""
        path = save_model(Network(classifier_spec), tmp_path / "model.weights")
        sidecar_path(path).write_text("{not json")
        with pytest.raises(CorruptFileError):
            read_model_info(path)
