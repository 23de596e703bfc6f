"""
Test configuration module.
"""

import pytest

from src.pofsm.config import PipelineConfig, get_config, read_config_file
from src.pofsm.errors import ConfigError

ENV_KEYS = ("POFSM_SEED", "POFSM_THREADS", "POFSM_OUT_DIR", "POFSM_PRESET")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    """Isolate tests from the caller's environment and any .env file."""
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)
        monkeypatch.delenv(f"LAB1_{key}", raising=False)
    monkeypatch.chdir(tmp_path)


def _write(tmp_path, text, name="pofsm.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfigDefaults:
    """Test default configuration values."""

    def test_default_values(self):
        """Test that PipelineConfig has the method defaults."""
        config = get_config()

        assert isinstance(config, PipelineConfig)
        assert config.runtime.seed == 0
        assert config.runtime.preset == "desk"
        assert config.flow.clusters == 40
        assert config.flow.top_k == 10
        assert config.flow.loss == "v2"
        assert config.classifier.base_lr == 0.001
        assert config.classifier.lr_step == 70000
        assert config.classifier.lr_gamma == 0.1
        assert config.classifier.head_multiplier == 10.0
        assert config.classifier.pool_size == 3
        assert config.classifier.pool_stride == 2
        assert config.saliency.bins == 256
        assert config.flow.iterations == 1000
        assert config.flow.samples_per_image == 256
        assert config.classifier.iterations == 1000

    def test_train_configs(self):
        """Test translation into training settings."""
        config = get_config()
        flow = config.flow.train_config(seed=4)
        assert flow.seed == 4
        assert flow.head_multiplier == 1.0
        assert config.classifier.train_config(seed=1).head_multiplier == 10.0
        assert config.flow.loss_config().top_k == 10

    def test_network_specs(self):
        """Test that configured sizes reach the network specs."""
        config = get_config()
        assert config.flow.network_spec(24).input_dims == (24, 24, 3)
        assert config.flow.network_spec(24).num_classes == 40
        assert config.classifier.network_spec("desk", 4).num_classes == 4


class TestConfigFile:
    """Test INI-style config files."""

    def test_values_are_typed(self, tmp_path):
        """Test conversion to each field's type."""
        path = _write(tmp_path, "[flow]\nclusters = 12\nloss = v1\n\n"
                                "[classifier]\nbase_lr = 0.05\nmirror = yes\n")
        config = get_config(path)
        assert config.flow.clusters == 12
        assert config.flow.loss == "v1"
        assert config.classifier.base_lr == 0.05
        assert config.classifier.mirror is True

    def test_inline_comments(self, tmp_path):
        """Test that trailing comments are stripped."""
        config = get_config(_write(tmp_path, "[runtime]\nseed = 7  # fixed\n"))
        assert config.runtime.seed == 7

    def test_missing_file(self, tmp_path):
        """Test that a missing config file is a configuration error."""
        with pytest.raises(ConfigError):
            get_config(tmp_path / "absent.ini")

    def test_unknown_section(self, tmp_path):
        """Test that unknown sections are rejected."""
        with pytest.raises(ConfigError) as excinfo:
            read_config_file(_write(tmp_path, "[network]\nlayers = 3\n"))
        assert "network" in str(excinfo.value)

    def test_unknown_key(self, tmp_path):
        """Test that unknown keys are rejected."""
        with pytest.raises(ConfigError):
            get_config(_write(tmp_path, "[flow]\nclusterz = 3\n"))

    @pytest.mark.parametrize("text", ["[flow]\nclusters = many\n", "[classifier]\nmirror = maybe\n",
                                      "[flow]\nloss = v3\n", "[runtime]\nthreads = 0\n",
                                      "[classifier]\nbase_lr = -1\n"])
    def test_invalid_values(self, tmp_path, text):
        """Test type and range validation."""
        with pytest.raises(ConfigError):
            get_config(_write(tmp_path, text))

    def test_malformed(self, tmp_path):
        """Test a file that is not INI."""
        with pytest.raises(ConfigError):
            get_config(_write(tmp_path, "clusters = 3\n"))


class TestPrecedence:
    """Test file < environment < overrides."""

    def test_environment_beats_file(self, tmp_path, monkeypatch):
        """Test that environment variables override the config file."""
        path = _write(tmp_path, "[runtime]\nseed = 3\nthreads = 2\n")
        monkeypatch.setenv("POFSM_SEED", "9")
        config = get_config(path)
        assert config.runtime.seed == 9
        assert config.runtime.threads == 2

    def test_overrides_beat_environment(self, monkeypatch):
        """Test that command-line overrides win and None leaves values alone."""
        monkeypatch.setenv("POFSM_SEED", "9")
        monkeypatch.setenv("POFSM_OUT_DIR", "/tmp/from-env")
        config = get_config(overrides={"runtime": {"seed": 1, "out_dir": None}})
        assert config.runtime.seed == 1
        assert str(config.out_dir) == "/tmp/from-env"

    def test_env_prefix(self, monkeypatch):
        """Test that prefixed variables take precedence over bare ones."""
        monkeypatch.setenv("POFSM_PRESET", "desk")
        monkeypatch.setenv("LAB1_POFSM_PRESET", "full")
        assert get_config(env_prefix="LAB1_").runtime.preset == "full"

    def test_env_file(self, tmp_path, monkeypatch):
        """Test that a .env file feeds the environment lookup."""
        env_file = tmp_path / "custom.env"
        env_file.write_text("POFSM_THREADS=3\n")
        # registered with monkeypatch so the value loaded from the file is undone
        monkeypatch.setenv("POFSM_THREADS", "1")
        monkeypatch.delenv("POFSM_THREADS")
        config = get_config(env_file=env_file)
        assert config.runtime.threads == 3

    def test_unknown_override_section(self):
        """Test that overrides must name a known section."""
        with pytest.raises(ConfigError):
            get_config(overrides={"network": {"layers": 3}})

    def test_unknown_override_key(self):
        """Test that an override key outside the section is a ConfigError naming it."""
        with pytest.raises(ConfigError, match="bogus"):
            get_config(overrides={"runtime": {"bogus": 1}})

    def test_none_override_keeps_default(self):
        """Test that a None override leaves the configured value."""
        assert get_config(overrides={"runtime": {"seed": None}}).runtime.seed == 0

    def test_invalid_environment(self, monkeypatch):
        """Test that bad environment values are configuration errors."""
        monkeypatch.setenv("POFSM_THREADS", "two")
        with pytest.raises(ConfigError):
            get_config()
