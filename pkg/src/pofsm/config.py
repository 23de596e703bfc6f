"""
Configuration management for pofsm.

Settings come from, in increasing precedence: built-in defaults, an INI-style
config file (sections [runtime], [flow], [classifier], [saliency], [synth]),
environment variables (optionally prefixed, .env files honoured) and finally
command-line flags.
"""

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from .engine import NetworkSpec, build_classifier_spec, build_flow_spec
from .errors import ConfigError
from .services.saliency import SaliencyParams
from .services.spatial_loss import LossConfig
from .services.training import TrainConfig
from .utils.constants import (
    DEFAULT_BASE_LR,
    DEFAULT_CLUSTERS,
    DEFAULT_HEAD_MULTIPLIER,
    DEFAULT_LR_GAMMA,
    DEFAULT_LR_STEP,
    DEFAULT_OTSU_BINS,
    DEFAULT_PATCH_SIZE,
    DEFAULT_POOL_SIZE,
    DEFAULT_POOL_STRIDE,
    DEFAULT_RADIUS,
    DEFAULT_TEMPERATURE,
    DEFAULT_TOP_K,
)

try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False

TRUE_VALUES = ("true", "1", "yes", "on")
FALSE_VALUES = ("false", "0", "no", "off")


@dataclass
class RuntimeSettings:
    seed: int = 0
    threads: int = 1
    out_dir: str = "./out"
    preset: str = "desk"

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


@dataclass
class FlowSettings:
    clusters: int = DEFAULT_CLUSTERS
    top_k: int = DEFAULT_TOP_K
    loss: str = "v2"
    decode: str = "expected"
    preset: str = "desk-flow"
    width: int = 16
    iterations: int = 1000
    batch_size: int = 8
    base_lr: float = DEFAULT_BASE_LR
    lr_step: int = DEFAULT_LR_STEP
    lr_gamma: float = DEFAULT_LR_GAMMA
    kmeans_iters: int = 100
    kmeans_restarts: int = 10
    samples_per_image: int = 256

    def __post_init__(self):
        if self.clusters < 1:
            raise ConfigError(f"flow.clusters must be >= 1, got {self.clusters}")
        if self.top_k < 1:
            raise ConfigError(f"flow.top_k must be >= 1, got {self.top_k}")
        if self.loss.lower() not in ("v1", "v2"):
            raise ConfigError(f"flow.loss must be v1 or v2, got '{self.loss}'")
        if self.decode.lower() not in ("expected", "argmax"):
            raise ConfigError(f"flow.decode must be expected or argmax, got '{self.decode}'")
        _check_schedule("flow", self.iterations, self.batch_size, self.base_lr, self.lr_step, self.lr_gamma)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.iterations, self.batch_size, self.base_lr, self.lr_step,
                           self.lr_gamma, head_multiplier=1.0, seed=seed)

    def loss_config(self) -> LossConfig:
        return LossConfig(top_k=self.top_k)

    def network_spec(self, input_size: int) -> NetworkSpec:
        return build_flow_spec(self.preset, self.clusters, input_dims=(input_size, input_size, 3),
                               width=self.width)


@dataclass
class ClassifierSettings:
    input_size: int = 32
    iterations: int = 1000
    batch_size: int = 16
    base_lr: float = DEFAULT_BASE_LR
    lr_step: int = DEFAULT_LR_STEP
    lr_gamma: float = DEFAULT_LR_GAMMA
    head_multiplier: float = DEFAULT_HEAD_MULTIPLIER
    scenario: str = "TOP5_LAYERS"
    mirror: bool = False
    pool_size: int = DEFAULT_POOL_SIZE
    pool_stride: int = DEFAULT_POOL_STRIDE

    def __post_init__(self):
        if self.head_multiplier < 0:
            raise ConfigError(f"classifier.head_multiplier must be >= 0, got {self.head_multiplier}")
        if self.pool_size < 1 or self.pool_stride < 1:
            raise ConfigError("classifier.pool_size and pool_stride must be >= 1")
        _check_schedule("classifier", self.iterations, self.batch_size, self.base_lr,
                        self.lr_step, self.lr_gamma)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.iterations, self.batch_size, self.base_lr, self.lr_step,
                           self.lr_gamma, self.head_multiplier, seed=seed, mirror=self.mirror)

    def network_spec(self, preset: str, num_classes: int) -> NetworkSpec:
        return build_classifier_spec(preset, num_classes,
                                     input_dims=(self.input_size, self.input_size, 3),
                                     pool_size=self.pool_size, pool_stride=self.pool_stride)


@dataclass
class SaliencySettings:
    patch_size: int = DEFAULT_PATCH_SIZE
    radius: int = DEFAULT_RADIUS
    descriptor: str = "lsk"
    temperature: float = DEFAULT_TEMPERATURE
    bins: int = DEFAULT_OTSU_BINS

    def params(self) -> SaliencyParams:
        return SaliencyParams(self.patch_size, self.radius, self.descriptor, self.temperature, self.bins)


@dataclass
class SynthSettings:
    image_size: int = 32
    samples_per_class: int = 100
    test_per_class: int = 30
    noise: float = 0.03


@dataclass
class PipelineConfig:
    runtime: RuntimeSettings = field(default_factory=RuntimeSettings)
    flow: FlowSettings = field(default_factory=FlowSettings)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    saliency: SaliencySettings = field(default_factory=SaliencySettings)
    synth: SynthSettings = field(default_factory=SynthSettings)

    @property
    def out_dir(self) -> Path:
        return Path(self.runtime.out_dir)


SECTIONS = {
    "runtime": RuntimeSettings,
    "flow": FlowSettings,
    "classifier": ClassifierSettings,
    "saliency": SaliencySettings,
    "synth": SynthSettings,
}


def _check_schedule(section: str, iterations, batch_size, base_lr, lr_step, lr_gamma) -> None:
    if iterations < 0:
        raise ConfigError(f"{section}.iterations must be >= 0, got {iterations}")
    if batch_size < 1:
        raise ConfigError(f"{section}.batch_size must be >= 1, got {batch_size}")
    if base_lr <= 0:
        raise ConfigError(f"{section}.base_lr must be > 0, got {base_lr}")
    if lr_step < 1:
        raise ConfigError(f"{section}.lr_step must be >= 1, got {lr_step}")
    if lr_gamma <= 0:
        raise ConfigError(f"{section}.lr_gamma must be > 0, got {lr_gamma}")


def _convert(section: str, key: str, raw: str, default: Any) -> Any:
    """Convert a config string to the type of the field's default."""
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in TRUE_VALUES:
                return True
            if lowered in FALSE_VALUES:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"Invalid value for {section}.{key}: '{raw}'")
    return raw


def _check_keys(settings, section: str, keys) -> None:
    unknown = sorted(set(keys) - {f.name for f in fields(settings)})
    if unknown:
        raise ConfigError(f"Unknown keys in [{section}]: {', '.join(unknown)}")


def _apply(settings, section: str, values: Dict[str, str]):
    _check_keys(settings, section, values)
    defaults = {f.name: getattr(settings, f.name) for f in fields(settings)}
    converted = {key: _convert(section, key, raw, defaults[key]) for key, raw in values.items()}
    return replace(settings, **converted)


def load_env_file(env_file: Optional[Path] = None) -> bool:
    """
    Load environment variables from a .env file.

    Args:
        env_file: Path to .env file. If None, looks in current directory and parent.

    Returns:
        True if a file was loaded, False otherwise
    """
    if not DOTENV_AVAILABLE:
        return False

    if env_file and Path(env_file).exists():
        load_dotenv(env_file)
        return True

    for candidate in (Path.cwd() / ".env", Path.cwd().parent / ".env"):
        if candidate.exists():
            load_dotenv(candidate)
            return True
    return False


def read_config_file(path: Path) -> Dict[str, Dict[str, str]]:
    """
    Parse an INI-style config file into {section: {key: raw value}}.

    Raises:
        ConfigError: If the file is missing, malformed or has unknown sections
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Malformed config file {path}: {e}")
    unknown = sorted(set(parser.sections()) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"Unknown config sections: {', '.join(unknown)}")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def get_config(
    config_file: Optional[Path] = None,
    env_prefix: str = "",
    env_file: Optional[Path] = None,
    overrides: Optional[Dict[str, Dict[str, Any]]] = None,
) -> PipelineConfig:
    """
    Load the pipeline configuration.

    Args:
        config_file: Optional INI-style config file
        env_prefix: Optional prefix for environment variables (e.g., "LAB1_")
        env_file: Optional path to .env file
        overrides: {section: {key: value}} applied last (command-line flags)

    Returns:
        PipelineConfig instance

    Raises:
        ConfigError: If any value is invalid
    """
    load_env_file(env_file)

    def get_env(key: str) -> Optional[str]:
        """Get environment variable with optional prefix."""
        return os.environ.get(f"{env_prefix}{key}", os.environ.get(key))

    values: Dict[str, Dict[str, str]] = {name: {} for name in SECTIONS}
    if config_file:
        for section, entries in read_config_file(config_file).items():
            values[section].update(entries)

    for env_key, key in (("POFSM_SEED", "seed"), ("POFSM_THREADS", "threads"),
                         ("POFSM_OUT_DIR", "out_dir"), ("POFSM_PRESET", "preset")):
        value = get_env(env_key)
        if value:
            values["runtime"][key] = value

    settings = {name: _apply(cls(), name, values[name]) for name, cls in SECTIONS.items()}
    for section, entries in (overrides or {}).items():
        if section not in settings:
            raise ConfigError(f"Unknown config section '{section}'")
        entries = {key: value for key, value in entries.items() if value is not None}
        _check_keys(settings[section], section, entries)
        settings[section] = replace(settings[section], **entries)
    return PipelineConfig(**settings)
