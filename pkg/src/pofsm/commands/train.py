"""
Training commands: flow network, classifier pretraining and fine-tuning.
"""

import logging
from dataclasses import replace
from pathlib import Path

import click
from rich.console import Console

from ..cli_utils import get_pipeline_config, output_path, print_training_summary, training_log_path
from ..engine import Scenario
from ..errors import DataError
from ..services.domain_map import POFSM_SUFFIX
from ..services.flow_codec import FlowCodebook
from ..services.model_store import load_model, save_model
from ..services.spatial_loss import LossConfig
from ..services.training import finetune_classifier, pretrain_classifier, train_flownet
from ..utils.manifest import DatasetManifest

logger = logging.getLogger(__name__)
console = Console()

SCENARIO_CHOICES = [s.value for s in Scenario if s != Scenario.SCRATCH]


def _iterations(train_config, iterations):
    return replace(train_config, iterations=iterations) if iterations is not None else train_config


@click.command(name='train-flow')
@click.argument('manifest_path', type=click.Path(dir_okay=False, path_type=Path))
@click.option('-b', '--codebook', 'codebook_path', type=click.Path(dir_okay=False, path_type=Path),
              help='Flow codebook (default: <out>/codebook.txt)')
@click.option('-o', '--output', type=click.Path(dir_okay=False, path_type=Path),
              help='Weights file to write (default: <out>/flownet.weights)')
@click.option('--loss', type=click.Choice(['v1', 'v2'], case_sensitive=False),
              help='Spatial loss variant (overrides config)')
@click.option('-k', '--top-k', type=click.IntRange(min=1), help='Order-statistic depth K for v2')
@click.option('-n', '--iterations', type=click.IntRange(min=0), help='SGD iterations (overrides config)')
@click.pass_context
def train_flow(ctx, manifest_path, codebook_path, output, loss, top_k, iterations):
    """
    Train the flow network on ground-truth flow labels.

    Every pixel's flow is encoded to its nearest codebook centroid and the
    network learns the per-pixel cluster distribution with the spatial loss.
    """
    config = get_pipeline_config(ctx)
    flow = config.flow
    codebook_path = codebook_path or config.out_dir / "codebook.txt"
    codebook = FlowCodebook.load(codebook_path)
    manifest = DatasetManifest.load(manifest_path)

    spec = replace(flow, clusters=codebook.num_clusters).network_spec(config.classifier.input_size)
    loss = (loss or flow.loss).lower()
    loss_config = LossConfig(top_k=top_k) if top_k else flow.loss_config()
    train_config = _iterations(flow.train_config(config.runtime.seed), iterations)

    console.print(f"\n[bold cyan]Training flow network[/bold cyan] "
                  f"(loss {loss}, K={loss_config.top_k}, C={codebook.num_clusters})")
    network, log = train_flownet(manifest, codebook, spec, loss, loss_config, train_config,
                                 init_seed=config.runtime.seed, console=console)

    path = save_model(network, output_path(config, output, "flownet.weights"), domain="rgb",
                      extra={"codebook": str(codebook_path), "loss": loss, "top_k": loss_config.top_k})
    log.save(training_log_path(path))
    print_training_summary(log, path)


@click.command(name='pretrain')
@click.argument('manifest_path', type=click.Path(dir_okay=False, path_type=Path))
@click.option('-o', '--output', type=click.Path(dir_okay=False, path_type=Path),
              help='Weights file to write (default: <out>/pretrained.weights)')
@click.option('-p', '--preset', type=click.Choice(['desk', 'full']),
              help='Classifier architecture (overrides config)')
@click.option('-n', '--iterations', type=click.IntRange(min=0), help='SGD iterations (overrides config)')
@click.pass_context
def pretrain(ctx, manifest_path, output, preset, iterations):
    """
    Train a classifier from scratch on a (source-task) manifest.

    Inputs are POF-SM images for .pofsm rows and raw RGB otherwise.
    """
    config = get_pipeline_config(ctx)
    preset = preset or config.runtime.preset
    manifest = DatasetManifest.load(manifest_path)
    train = manifest.split("train")
    if len(train) == 0:
        raise DataError(f"Manifest has no training rows: {manifest_path}")
    spec = config.classifier.network_spec(preset, len(train.classes))
    train_config = _iterations(config.classifier.train_config(config.runtime.seed), iterations)

    console.print(f"\n[bold cyan]Pretraining {preset} classifier[/bold cyan] "
                  f"({spec.parameter_count():,} parameters)")
    network, classes, log = pretrain_classifier(manifest, spec, train_config,
                                                init_seed=config.runtime.seed,
                                                threads=config.runtime.threads, console=console)
    domain = "pofsm" if train.resolved_paths()[0].suffix == POFSM_SUFFIX else "rgb"
    path = save_model(network, output_path(config, output, "pretrained.weights"), classes=classes,
                      groups=manifest.groups, domain=domain, extra={"scenario": Scenario.SCRATCH.value})
    log.save(training_log_path(path))
    console.print(f"  Classes: {', '.join(classes)}")
    print_training_summary(log, path)


@click.command(name='finetune')
@click.argument('manifest_path', type=click.Path(dir_okay=False, path_type=Path))
@click.option('-w', '--weights', type=click.Path(dir_okay=False, path_type=Path), required=True,
              help='Pretrained weights (with .json sidecar)')
@click.option('-s', '--scenario', type=click.Choice(SCENARIO_CHOICES, case_sensitive=False),
              help='Which layers train (overrides config)')
@click.option('--new-head', is_flag=True, help='Replace the classifier head even if classes match')
@click.option('-o', '--output', type=click.Path(dir_okay=False, path_type=Path),
              help='Weights file to write (default: <out>/finetuned.weights)')
@click.option('-n', '--iterations', type=click.IntRange(min=0), help='SGD iterations (overrides config)')
@click.pass_context
def finetune(ctx, manifest_path, weights, scenario, new_head, output, iterations):
    """
    Fine-tune a pretrained classifier on a (target-task) manifest.

    \b
    Scenarios:
        ALL_LAYERS    every layer trains, head at 10x learning rate
        TOP5_LAYERS   first three convolutions frozen
        HEAD_ONLY     fixed feature extractor, only the head trains
    """
    config = get_pipeline_config(ctx)
    scenario = Scenario.parse(scenario or config.classifier.scenario)
    network, info = load_model(weights)
    manifest = DatasetManifest.load(manifest_path)
    train_config = _iterations(config.classifier.train_config(config.runtime.seed), iterations)

    console.print(f"\n[bold cyan]{scenario.label}[/bold cyan] from {weights}")
    tuned, classes, log = finetune_classifier(
        network, manifest, scenario, train_config,
        source_classes=info.classes or None,
        new_head=new_head,
        head_seed=config.runtime.seed,
        threads=config.runtime.threads,
        console=console,
    )
    path = save_model(tuned, output_path(config, output, "finetuned.weights"), classes=classes,
                      groups=manifest.groups, domain=info.domain,
                      extra={"scenario": scenario.value, "source": str(weights)})
    log.save(training_log_path(path))
    print_training_summary(log, path)
