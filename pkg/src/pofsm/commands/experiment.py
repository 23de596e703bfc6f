"""
Transfer trend experiment command.
"""

from pathlib import Path

import click
from rich.console import Console

from ..cli_utils import experiment_settings, get_pipeline_config
from ..errors import ConfigError
from ..services.experiment import MODELS, TransferExperiment

console = Console()


def _parse_seeds(value: str):
    try:
        seeds = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"Seeds must be a comma-separated list of integers, got '{value}'")
    if not seeds or any(seed < 0 for seed in seeds):
        raise ConfigError(f"Need at least one non-negative seed, got '{value}'")
    return seeds


@click.command(name='experiment')
@click.option('--seeds', default='0,1,2,3,4', show_default=True,
              help='Comma-separated seeds, one full run each')
@click.option('--models', default=','.join(MODELS), show_default=True,
              help='Comma-separated models to train and evaluate')
@click.option('--pretrain-iterations', type=click.IntRange(min=0),
              help='Source-task pretraining budget (default: the classifier iterations)')
@click.option('-d', '--work-dir', type=click.Path(file_okay=False, path_type=Path),
              help='Working directory (default: <out>/experiment)')
@click.pass_context
def experiment(ctx, seeds, models, pretrain_iterations, work_dir):
    """
    Compare transfer against training from scratch over several seeds.

    Per seed, trains scratch-rgb, scratch-pofsm, finetune-all and
    finetune-top5 on the synthetic target task with equal iteration budget and
    reports median [min, max] of top-1, top-5 and MAP per model. Violations of
    finetune-top5 > scratch-pofsm > scratch-rgb are reported, not hidden.
    --models restricts the run to some of the four; --pretrain-iterations gives
    source-task pretraining its own budget.
    """
    config = get_pipeline_config(ctx)
    seeds = _parse_seeds(seeds)
    work_dir = work_dir or config.out_dir / "experiment"

    console.print(f"\n[bold cyan]Transfer experiment[/bold cyan] over seeds {seeds}")
    settings = experiment_settings(config)
    settings.pretrain_iterations = pretrain_iterations
    runner = TransferExperiment(settings, work_dir, preset=config.runtime.preset, console=console)
    report = runner.run(seeds, [m.strip() for m in models.split(",") if m.strip()])
    report.print(console)
    report.save(work_dir)
    console.print(f"[green]✓[/green] Results written to {work_dir}")
