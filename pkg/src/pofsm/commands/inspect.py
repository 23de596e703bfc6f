"""
Inspection command: network shape traces, model metadata and POF-SM dumps.
"""

from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from ..cli_utils import get_pipeline_config
from ..engine import NetworkSpec, build_classifier_spec, build_flow_spec
from ..engine.presets import CLASSIFIER_PRESETS, FLOW_PRESETS
from ..services.domain_map import CHANNEL_NAMES, PofSmImage
from ..services.model_store import read_model_info

console = Console()


def _print_trace(spec: NetworkSpec) -> None:
    table = Table(title=f"{spec.name} network on {'x'.join(map(str, spec.input_dims))} input")
    table.add_column("Layer", style="cyan")
    table.add_column("Kind")
    table.add_column("Output", justify="right")
    for (name, dims), layer in zip(spec.shape_trace(), spec.layers):
        table.add_row(name, layer.kind.value, " x ".join(map(str, dims)))
    console.print(table)
    console.print(f"  Parameters: [bold]{spec.parameter_count():,}[/bold]")


@click.command(name='inspect')
@click.argument('pofsm_file', required=False, type=click.Path(dir_okay=False, path_type=Path))
@click.option('--trace', 'preset', type=click.Choice(sorted(CLASSIFIER_PRESETS) + sorted(FLOW_PRESETS)),
              help='Print the shape trace of a preset network')
@click.option('--num-classes', type=click.IntRange(min=1), default=101, show_default=True,
              help='Head size for --trace (clusters for flow presets)')
@click.option('--input-size', type=click.IntRange(min=1), help='Square input side for --trace')
@click.option('-w', '--weights', type=click.Path(dir_okay=False, path_type=Path),
              help='Show the metadata of a weights file')
@click.option('--ppm', is_flag=True, help='Dump an 8-bit PPM of POFSM_FILE')
@click.option('--pgm', is_flag=True, help='Dump one 8-bit PGM per channel of POFSM_FILE')
@click.option('-d', '--out-dir', type=click.Path(file_okay=False, path_type=Path),
              help='Directory for dumps (default: next to POFSM_FILE)')
@click.pass_context
def inspect(ctx, pofsm_file, preset, num_classes, input_size, weights, ppm, pgm, out_dir):
    """
    Inspect networks, model files and POF-SM images.

    \b
    Examples:
        # 55 -> 27 -> 13 -> 6 trace of the full-size network
        pofsm inspect --trace full

        # Channel statistics and PGM dumps of a mapped image
        pofsm inspect ./out/pofsm/images/test/up_00001.pofsm --pgm
    """
    if not (pofsm_file or preset or weights):
        raise click.UsageError("Give a POF-SM file, --trace or --weights")
    config = get_pipeline_config(ctx)

    if preset:
        kwargs = {}
        if input_size:
            kwargs["input_dims"] = (input_size, input_size, 3)
        if preset in FLOW_PRESETS:
            spec = build_flow_spec(preset, num_classes, **kwargs)
        else:
            kwargs.setdefault("pool_size", config.classifier.pool_size)
            kwargs.setdefault("pool_stride", config.classifier.pool_stride)
            spec = build_classifier_spec(preset, num_classes, **kwargs)
        _print_trace(spec)

    if weights:
        info = read_model_info(weights)
        _print_trace(info.spec)
        console.print(f"  Domain: {info.domain}")
        if info.classes:
            console.print(f"  Classes: {', '.join(info.classes)}")
        for key, value in info.extra.items():
            console.print(f"  {key}: {value}")

    if pofsm_file:
        image = PofSmImage.load(pofsm_file)
        table = Table(title=f"{pofsm_file.name} ({image.rows} x {image.cols})")
        table.add_column("Channel", style="cyan")
        for column in ("min", "mean", "max"):
            table.add_column(column, justify="right")
        for index, name in enumerate(CHANNEL_NAMES):
            plane = image.channels[..., index]
            table.add_row(name, f"{plane.min():.4f}", f"{plane.mean():.4f}", f"{plane.max():.4f}")
        console.print(table)

        stem = (Path(out_dir) if out_dir else pofsm_file.parent) / pofsm_file.stem
        if ppm:
            console.print(f"[green]✓[/green] {image.save_ppm(stem.with_name(stem.name + '.ppm'))}")
        if pgm:
            for path in image.save_channel_pgms(stem):
                console.print(f"[green]✓[/green] {path}")
