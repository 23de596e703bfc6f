"""
Frame-directory ingestion command.
"""

from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from ..cli_utils import get_pipeline_config, output_path
from ..utils.manifest import ingest_frames

console = Console()


@click.command(name='ingest')
@click.argument('root', type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option('-o', '--output', type=click.Path(dir_okay=False, path_type=Path),
              help='Manifest CSV to write (default: <out>/manifest.csv)')
@click.option('--test-fraction', type=click.FloatRange(0.0, 1.0, max_open=True), default=0.3,
              show_default=True, help='Fraction of clips per class held out for testing')
@click.option('--frame-step', type=click.IntRange(min=1), default=1, show_default=True,
              help='Keep every n-th frame of a clip')
@click.pass_context
def ingest(ctx, root, output, test_fraction, frame_step):
    """
    Build a manifest from pre-extracted frames.

    ROOT must be laid out as <group>/<class>/<clip>/<frame image>. Clips, not
    frames, are split between train and test.
    """
    config = get_pipeline_config(ctx)
    manifest = ingest_frames(root, test_fraction=test_fraction, seed=config.runtime.seed,
                             frame_step=frame_step)
    path = manifest.save(output_path(config, output, "manifest.csv"))

    counts = manifest.frame.groupby(["group", "label", "split"]).size().unstack(fill_value=0)
    table = Table(title=f"Ingested frames from {root}")
    table.add_column("Group", style="cyan")
    table.add_column("Class")
    for split in counts.columns:
        table.add_column(split.capitalize(), justify="right")
    for (group, label), row in counts.iterrows():
        table.add_row(group, label, *[str(row[split]) for split in counts.columns])
    console.print(table)
    console.print(f"[green]✓[/green] Manifest written to {path}")
