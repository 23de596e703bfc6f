"""
Common utilities for CLI commands.
"""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import click
from rich.console import Console

from .config import DOTENV_AVAILABLE, PipelineConfig, get_config
from .errors import ConfigError, DataError
from .services.experiment import ExperimentSettings
from .services.flow_codec import DecodeMode
from .services.training import TrainingLog

logger = logging.getLogger(__name__)
console = Console()

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERRUPTED = 130


def get_pipeline_config(ctx: click.Context) -> PipelineConfig:
    """
    Return the configuration loaded by the root group.

    Commands invoked without the root group (e.g. directly in tests) fall back
    to defaults plus environment variables.
    """
    obj = ctx.find_root().obj or {}
    config = obj.get("config")
    if config is None:
        config = get_config()
        ctx.find_root().ensure_object(dict)["config"] = config
    return config


def output_path(config: PipelineConfig, explicit: Optional[Path], default_name: str) -> Path:
    """An explicit path wins; otherwise `<out_dir>/<default_name>`."""
    path = Path(explicit) if explicit else config.out_dir / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def training_log_path(weights_path: Path) -> Path:
    return weights_path.with_name(weights_path.name + ".log.csv")


def print_training_summary(log: TrainingLog, weights_path: Path) -> None:
    if len(log):
        console.print(
            f"  Loss (first 10%): {log.window_mean(0.1):.4f}   "
            f"Loss (last 10%): {log.window_mean(0.1, last=True):.4f}"
        )
    else:
        console.print("  [dim]Zero iterations; weights equal their initialisation[/dim]")
    console.print(f"[green]✓[/green] Weights written to {weights_path}")
    console.print(f"  Training log: {training_log_path(weights_path)}")


def experiment_settings(config: PipelineConfig) -> ExperimentSettings:
    """Translate the pipeline configuration into transfer-experiment settings."""
    flow = config.flow
    classifier = config.classifier
    return ExperimentSettings(
        synth=asdict(config.synth),
        clusters=flow.clusters,
        loss=flow.loss,
        loss_config=flow.loss_config(),
        decode=DecodeMode.parse(flow.decode),
        saliency=config.saliency.params(),
        kmeans_iters=flow.kmeans_iters,
        kmeans_restarts=flow.kmeans_restarts,
        samples_per_image=flow.samples_per_image or None,
        flow_spec=lambda: flow.network_spec(classifier.input_size),
        flow_train=flow.train_config,
        classifier_spec=classifier.network_spec,
        classifier_train=classifier.train_config,
        threads=config.runtime.threads,
    )


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the process exit code and report it on the console.

    ConfigError and click usage errors give 1, DataError gives 2, an interrupt
    gives 130 and anything else gives 1 with a logged traceback.
    """
    if isinstance(error, (KeyboardInterrupt, click.exceptions.Abort)):
        console.print("\n[yellow]Interrupted by user[/yellow]")
        return EXIT_INTERRUPTED
    if isinstance(error, click.ClickException):
        error.show()
        return EXIT_CONFIG
    if isinstance(error, ConfigError):
        console.print(f"[red]Configuration Error:[/red] {error}")
        if not DOTENV_AVAILABLE:
            console.print(
                "\n[yellow]Tip:[/yellow] Install python-dotenv to use .env files: "
                "[cyan]pip install python-dotenv[/cyan]"
            )
        return EXIT_CONFIG
    if isinstance(error, DataError):
        console.print(f"[red]Data Error:[/red] {error}")
        return EXIT_DATA
    console.print(f"\n[red]Unexpected error:[/red] {error}")
    logger.exception("Unexpected error occurred", exc_info=error)
    return EXIT_CONFIG
