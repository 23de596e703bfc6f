"""
Evaluation command.
"""

from pathlib import Path

import click
from rich.console import Console

from ..cli_utils import get_pipeline_config, output_path
from ..services.evaluation import evaluate
from ..services.model_store import load_model
from ..utils.manifest import DatasetManifest

console = Console()


@click.command(name='eval')
@click.argument('manifest_path', type=click.Path(dir_okay=False, path_type=Path))
@click.option('-w', '--weights', type=click.Path(dir_okay=False, path_type=Path), required=True,
              help='Classifier weights (with .json sidecar)')
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False, path_type=Path),
              help='Report CSV to write (default: <out>/eval.csv)')
@click.pass_context
def evaluate_model(ctx, manifest_path, weights, csv_path):
    """
    Evaluate a classifier on the manifest's test split.

    Prints per-class AP, top-1/top-5 accuracy and MAP per group, and writes a
    CSV with `class,ap` rows followed by a `metric,value` summary block.
    """
    config = get_pipeline_config(ctx)
    network, info = load_model(weights)
    manifest = DatasetManifest.load(manifest_path)

    report = evaluate(network, manifest, info.classes or manifest.split("train").classes,
                      groups=info.groups, threads=config.runtime.threads)
    report.print(console)
    path = report.to_csv(output_path(config, csv_path, "eval.csv"))
    console.print(f"[green]✓[/green] Report written to {path}")
