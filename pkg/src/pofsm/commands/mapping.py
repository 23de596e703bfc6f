"""
Image -> POF-SM mapping command.
"""

from pathlib import Path

import click
from rich.console import Console

from ..cli_utils import get_pipeline_config
from ..services.domain_map import POFSM_SUFFIX, MappingConfig, PofSmImage, map_batch, map_manifest
from ..utils.image_io import read_image
from ..utils.manifest import DatasetManifest

console = Console()


@click.command(name='map')
@click.argument('images', nargs=-1, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option('-m', '--manifest', 'manifest_path', type=click.Path(dir_okay=False, path_type=Path),
              help='Map every image of a manifest and write a POF-SM manifest')
@click.option('-w', '--weights', type=click.Path(dir_okay=False, path_type=Path),
              help='Flow network weights (default: <out>/flownet.weights)')
@click.option('-b', '--codebook', type=click.Path(dir_okay=False, path_type=Path),
              help='Flow codebook (default: <out>/codebook.txt)')
@click.option('-d', '--out-dir', type=click.Path(file_okay=False, path_type=Path),
              help='Directory for .pofsm files (default: <out>/pofsm)')
@click.option('--decode', type=click.Choice(['expected', 'argmax'], case_sensitive=False),
              help='Flow decoding (overrides config)')
@click.option('--ppm', is_flag=True, help='Also write an 8-bit PPM preview per image')
@click.option('--pgm', is_flag=True, help='Also write one 8-bit PGM per channel')
@click.pass_context
def map_images(ctx, images, manifest_path, weights, codebook, out_dir, decode, ppm, pgm):
    """
    Map still images to the POF-SM domain.

    Either pass IMAGES directly (written as <out-dir>/<stem>.pofsm) or a
    manifest with --manifest (paths mirrored under <out-dir>, plus a new
    manifest.csv with the same labels and splits).

    \b
    Examples:
        pofsm map photo1.png photo2.png --ppm
        pofsm map --manifest ./out/synth-target/manifest.csv -d ./out/target-pofsm
    """
    if not images and not manifest_path:
        raise click.UsageError("Give image paths or --manifest")
    config = get_pipeline_config(ctx)
    threads = config.runtime.threads
    mapping = MappingConfig.from_files(
        weights or config.out_dir / "flownet.weights",
        codebook or config.out_dir / "codebook.txt",
        decode_mode=decode or config.flow.decode,
        saliency=config.saliency.params(),
    )
    out_dir = out_dir or config.out_dir / "pofsm"

    written = []
    if manifest_path:
        manifest = DatasetManifest.load(manifest_path)
        mapped = map_manifest(manifest, mapping, out_dir, threads, console)
        written.extend(mapped.resolved_paths())
        console.print(f"[green]✓[/green] POF-SM manifest written to {out_dir / 'manifest.csv'}")

    if images:
        with console.status(f"Mapping {len(images)} images..."):
            mapped_images = map_batch([read_image(path) for path in images], mapping, threads)
        for path, pofsm in zip(images, mapped_images):
            written.append(pofsm.save(out_dir / f"{path.stem}{POFSM_SUFFIX}"))

    if ppm or pgm:
        for path in written:
            image = PofSmImage.load(path)
            if ppm:
                image.save_ppm(path.with_suffix(".ppm"))
            if pgm:
                image.save_channel_pgms(path.with_suffix(""))

    console.print(f"[green]✓[/green] Mapped {len(written)} images into {out_dir}")
