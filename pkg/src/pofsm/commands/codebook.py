"""
Flow codebook command.
"""

from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from ..cli_utils import get_pipeline_config, output_path
from ..services.training import fit_codebook as fit_flow_codebook
from ..utils.manifest import DatasetManifest

console = Console()


@click.command(name='fit-codebook')
@click.argument('manifest_path', type=click.Path(dir_okay=False, path_type=Path))
@click.option('-o', '--output', type=click.Path(dir_okay=False, path_type=Path),
              help='Codebook file to write (default: <out>/codebook.txt)')
@click.option('-c', '--clusters', type=click.IntRange(min=1), help='Number of flow clusters C')
@click.option('--samples-per-image', type=click.IntRange(min=1),
              help='Subsample flow vectors per image before clustering')
@click.pass_context
def fit_codebook(ctx, manifest_path, output, clusters, samples_per_image):
    """
    Cluster the ground-truth flow of the training split into a codebook.

    MANIFEST_PATH must carry a flow column (synthetic datasets do).
    """
    config = get_pipeline_config(ctx)
    flow = config.flow
    clusters = clusters or flow.clusters
    manifest = DatasetManifest.load(manifest_path)

    console.print(f"\n[bold cyan]Fitting {clusters}-cluster flow codebook[/bold cyan]")
    codebook = fit_flow_codebook(
        manifest,
        clusters,
        seed=config.runtime.seed,
        max_iters=flow.kmeans_iters,
        n_init=flow.kmeans_restarts,
        samples_per_image=samples_per_image or flow.samples_per_image or None,
    )
    path = codebook.save(output_path(config, output, "codebook.txt"))

    table = Table(title="Flow centroids", show_header=True, header_style="bold")
    table.add_column("#", justify="right", style="dim")
    table.add_column("u", justify="right")
    table.add_column("v", justify="right")
    for index, (u, v) in enumerate(codebook.centroids):
        table.add_row(str(index), f"{u:+.3f}", f"{v:+.3f}")
    console.print(table)
    console.print(f"  f_max: {codebook.f_max:.4f}")
    console.print(f"[green]✓[/green] Codebook written to {path}")
