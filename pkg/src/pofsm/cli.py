"""
Main CLI entry point for pofsm.

Uses Click for command-line interface with subcommands.
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .cli_utils import EXIT_OK, exit_code_for
from .commands import codebook, evaluate, experiment, inspect, ingest, mapping, synth, train
from .config import get_config

# Set up rich logging
logging.basicConfig(
    level=logging.INFO,
    format="%(message)s",
    datefmt="[%X]",
    handlers=[RichHandler(rich_tracebacks=True, show_path=False)]
)

logger = logging.getLogger(__name__)
console = Console()


@click.group()
@click.version_option(version=__version__, prog_name='pofsm')
@click.option(
    '--config', 'config_file',
    type=click.Path(dir_okay=False, path_type=Path),
    help='INI-style config file'
)
@click.option('--seed', type=click.IntRange(min=0), help='Global seed (overrides config)')
@click.option('--threads', type=click.IntRange(min=1), help='Worker threads for mapping/evaluation')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False, path_type=Path),
              help='Output directory for default file locations')
@click.option(
    '--env-file',
    type=click.Path(exists=True, path_type=Path),
    help='Path to .env file'
)
@click.option(
    '--env-prefix',
    default='',
    help='Environment variable prefix'
)
@click.option(
    '--debug',
    is_flag=True,
    help='Enable debug logging'
)
@click.pass_context
def cli(ctx, config_file, seed, threads, out_dir, env_file, env_prefix, debug):
    """
    pofsm: still-image action recognition in the POF-SM domain.

    Maps single images to predicted optical flow plus saliency (POF-SM) and
    transfer-trains a compact convolutional classifier on the result.

    \b
    Examples:
        # Synthetic source and target tasks
        pofsm --out ./out synth --task source
        pofsm --out ./out synth --task target

        # Flow codebook and flow network on the source task
        pofsm --out ./out fit-codebook ./out/synth-source/manifest.csv
        pofsm --out ./out train-flow ./out/synth-source/manifest.csv

        # Map both tasks, pretrain, fine-tune and evaluate
        pofsm --out ./out map --manifest ./out/synth-target/manifest.csv
        pofsm --out ./out finetune ./out/pofsm/manifest.csv -w ./out/pretrained.weights
        pofsm --out ./out eval ./out/pofsm/manifest.csv -w ./out/finetuned.weights

    Environment variables:
        POFSM_SEED                 Global seed
        POFSM_THREADS              Worker threads
        POFSM_OUT_DIR              Output directory
        POFSM_PRESET               Classifier preset (desk or full)
        ENV_PREFIX                 Prefix for all env vars (e.g., "LAB1_")
    """
    if debug:
        logging.getLogger().setLevel(logging.DEBUG)

    ctx.ensure_object(dict)
    overrides = {
        "runtime": {
            "seed": seed,
            "threads": threads,
            "out_dir": str(out_dir) if out_dir else None,
        }
    }
    ctx.obj["config"] = get_config(config_file, env_prefix=env_prefix, env_file=env_file,
                                   overrides=overrides)
    logger.debug(f"Loaded configuration: {ctx.obj['config']}")


cli.add_command(synth.synth)
cli.add_command(ingest.ingest)
cli.add_command(codebook.fit_codebook)
cli.add_command(train.train_flow)
cli.add_command(mapping.map_images)
cli.add_command(train.pretrain)
cli.add_command(train.finetune)
cli.add_command(evaluate.evaluate_model)
cli.add_command(inspect.inspect)
cli.add_command(experiment.experiment)


def run(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        result = cli.main(args=argv, prog_name='pofsm', standalone_mode=False)
    except (Exception, KeyboardInterrupt) as e:
        return exit_code_for(e)
    return result if isinstance(result, int) else EXIT_OK


def main():
    """Main entry point for the CLI."""
    sys.exit(run())


if __name__ == '__main__':
    main()
