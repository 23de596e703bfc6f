"""
Transfer trend experiment.

For every seed, a source task (pretraining) and a disjoint target task are
synthesised; a flow network and codebook are learned on the source task and
both tasks are mapped to POF-SM. Four target-task models then get the same
iteration budget:

    scratch-rgb     trained from scratch on raw RGB
    scratch-pofsm   trained from scratch on POF-SM
    finetune-all    pretrained on the source task, all layers fine-tuned
    finetune-top5   pretrained, first three convolutions frozen

The expected median top-1 ordering is finetune-top5 > scratch-pofsm >
scratch-rgb; violations are reported together with whether the seed ranges
of the two models overlap.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import pandas as pd
from rich.console import Console
from rich.table import Table

from ..engine import Scenario
from ..errors import ConfigError
from .domain_map import MappingConfig, map_manifest
from .evaluation import EvalReport, evaluate
from .flow_codec import DecodeMode
from .saliency import SaliencyParams
from .spatial_loss import LossConfig
from .synthetic import SyntheticSpec, synth_generate
from .training import TrainConfig, finetune_classifier, fit_codebook, pretrain_classifier, train_flownet

logger = logging.getLogger(__name__)

MODELS = ("scratch-rgb", "scratch-pofsm", "finetune-all", "finetune-top5")
EXPECTED_ORDER = ("finetune-top5", "scratch-pofsm", "scratch-rgb")
METRICS = ("top1", "top5", "map")


@dataclass
class ExperimentSettings:
    """Everything one seed of the experiment needs, minus the seed."""

    synth: Dict = field(default_factory=dict)
    clusters: int = 40
    loss: str = "v2"
    loss_config: LossConfig = field(default_factory=LossConfig)
    decode: DecodeMode = DecodeMode.EXPECTED
    saliency: SaliencyParams = field(default_factory=SaliencyParams)
    kmeans_iters: int = 100
    kmeans_restarts: int = 10
    samples_per_image: Optional[int] = None
    flow_spec: Callable = None
    flow_train: Callable[[int], TrainConfig] = None
    classifier_spec: Callable = None
    classifier_train: Callable[[int], TrainConfig] = None
    # source-task pretraining budget; None reuses the target-task budget
    pretrain_iterations: Optional[int] = None
    threads: int = 1


@dataclass
class OrderingViolation:
    better: str
    worse: str
    better_median: float
    worse_median: float
    overlapping: bool

    def describe(self) -> str:
        overlap = "seed ranges overlap" if self.overlapping else "seed ranges disjoint"
        return (f"{self.better} median {self.better_median:.4f} is not above "
                f"{self.worse} median {self.worse_median:.4f} ({overlap})")


@dataclass
class TransferReport:
    results: pd.DataFrame
    violations: List[OrderingViolation] = field(default_factory=list)

    def summary(self) -> pd.DataFrame:
        """Median, min and max of each metric per model."""
        grouped = self.results.groupby("model")[list(METRICS)]
        summary = grouped.agg(["median", "min", "max"])
        return summary.reindex([m for m in MODELS if m in summary.index])

    def save(self, out_dir: Union[str, Path]) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.results.to_csv(out_dir / "transfer_results.csv", index=False, lineterminator="\n")
        summary = self.summary()
        summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
        summary.to_csv(out_dir / "transfer_summary.csv", lineterminator="\n")
        return out_dir

    def print(self, console: Optional[Console] = None) -> None:
        console = console or Console()
        summary = self.summary()
        table = Table(title=f"Transfer trend ({self.results['seed'].nunique()} seeds)")
        table.add_column("Model", style="cyan")
        for metric in METRICS:
            table.add_column(f"{metric} median [min, max]", justify="right")
        for model, row in summary.iterrows():
            table.add_row(model, *[
                f"{row[(m, 'median')]:.3f} [{row[(m, 'min')]:.3f}, {row[(m, 'max')]:.3f}]"
                for m in METRICS
            ])
        console.print(table)
        if self.violations:
            for violation in self.violations:
                console.print(f"[yellow]Ordering violation:[/yellow] {violation.describe()}")
        else:
            console.print("[green]Median top-1 ordering holds:[/green] " + " > ".join(EXPECTED_ORDER))


def check_ordering(results: pd.DataFrame, metric: str = "top1") -> List[OrderingViolation]:
    """Compare medians pairwise along EXPECTED_ORDER."""
    violations = []
    stats = results.groupby("model")[metric].agg(["median", "min", "max"])
    for better, worse in zip(EXPECTED_ORDER, EXPECTED_ORDER[1:]):
        if better not in stats.index or worse not in stats.index:
            continue
        b, w = stats.loc[better], stats.loc[worse]
        if not b["median"] > w["median"]:
            overlapping = b["min"] <= w["max"] and w["min"] <= b["max"]
            violation = OrderingViolation(better, worse, float(b["median"]), float(w["median"]),
                                          bool(overlapping))
            logger.warning(f"Ordering violation: {violation.describe()}")
            violations.append(violation)
    return violations


class TransferExperiment:
    """Runs the four-model comparison over seeds."""

    def __init__(self, settings: ExperimentSettings, work_dir: Union[str, Path],
                 preset: str = "desk", console: Console = None):
        self.settings = settings
        self.work_dir = Path(work_dir)
        self.preset = preset
        self.console = console or Console()

    def run_seed(self, seed: int, models: Sequence[str] = MODELS) -> Dict[str, EvalReport]:
        """
        Train and evaluate the requested models for one seed.

        The source task is pretrained only when a fine-tuned model is requested.

        Raises:
            ConfigError: On an unknown model name
        """
        unknown = [name for name in models if name not in MODELS]
        if unknown:
            raise ConfigError(f"Unknown experiment models {unknown} (choose from {list(MODELS)})")
        s = self.settings
        seed_dir = self.work_dir / f"seed{seed}"
        self.console.print(f"\n[bold]Seed {seed}[/bold]")

        source = synth_generate(SyntheticSpec.for_task("source", seed=2 * seed, **s.synth),
                                seed_dir / "source", self.console)
        target = synth_generate(SyntheticSpec.for_task("target", seed=2 * seed + 1, **s.synth),
                                seed_dir / "target", self.console)

        codebook = fit_codebook(source, s.clusters, seed=seed, max_iters=s.kmeans_iters,
                                n_init=s.kmeans_restarts, samples_per_image=s.samples_per_image)
        flow_net, _ = train_flownet(source, codebook, s.flow_spec(), s.loss, s.loss_config,
                                    s.flow_train(seed), init_seed=seed, console=self.console)
        mapping = MappingConfig(flow_net, codebook, s.decode, s.saliency)
        target_pofsm = map_manifest(target, mapping, seed_dir / "target_pofsm", s.threads, self.console)

        train_cfg = s.classifier_train(seed)
        spec = s.classifier_spec(self.preset, len(source.classes))
        trained = {}
        for name, manifest in (("scratch-rgb", target), ("scratch-pofsm", target_pofsm)):
            if name not in models:
                continue
            network, classes, _ = pretrain_classifier(
                manifest, spec, train_cfg, init_seed=seed, threads=s.threads, console=self.console
            )
            trained[name] = (network, classes, manifest)

        finetunes = [(name, scenario) for name, scenario in (("finetune-all", Scenario.ALL_LAYERS),
                                                             ("finetune-top5", Scenario.TOP5_LAYERS))
                     if name in models]
        if finetunes:
            source_pofsm = map_manifest(source, mapping, seed_dir / "source_pofsm", s.threads,
                                        self.console)
            # left/right source classes are not mirror-invariant
            pretrain_cfg = replace(train_cfg, mirror=False)
            if s.pretrain_iterations is not None:
                pretrain_cfg = replace(pretrain_cfg, iterations=s.pretrain_iterations)
            pretrained, source_classes, _ = pretrain_classifier(
                source_pofsm, spec, pretrain_cfg, init_seed=seed, threads=s.threads,
                console=self.console,
            )
            for name, scenario in finetunes:
                network, classes, _ = finetune_classifier(
                    pretrained, target_pofsm, scenario, train_cfg, source_classes=source_classes,
                    head_seed=seed, threads=s.threads, console=self.console,
                )
                trained[name] = (network, classes, target_pofsm)

        return {
            name: evaluate(network, manifest, classes, threads=s.threads)
            for name, (network, classes, manifest) in trained.items()
        }

    def run(self, seeds: Sequence[int], models: Sequence[str] = MODELS) -> TransferReport:
        rows = []
        for seed in seeds:
            for model, report in self.run_seed(seed, models).items():
                rows.append({"seed": seed, "model": model, "top1": report.top1,
                             "top5": report.top5, "map": report.map_overall})
        results = pd.DataFrame(rows, columns=["seed", "model", *METRICS])
        return TransferReport(results, check_ordering(results))
