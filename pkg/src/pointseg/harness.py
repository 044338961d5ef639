"""Label-level sweeps over point perturbation strength and pseudo-label rate.

These score the *labels* (pseudo-labels against ground truth), not a trained
model. Each sweep cell is replicated with independent seeds and summarized
by mean and population standard deviation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .datasets import TileEntry, centroid_points, mix_labels
from .metrics import dice, dq_point, pool_reports
from .perturb import PerturbConfig, perturb_pointset
from .pseudolabel import PseudoLabelConfig, generate_pseudo_labels

REPORT_NOTE = "label-quality sweep: pseudo-labels scored against ground truth; no model is trained"


@dataclass(frozen=True)
class LabeledTile:
    image: np.ndarray
    instances: np.ndarray
    tile_id: str = ""


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple[float, ...]
    replicates: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if self.variable not in ("epsilon", "pseudo_rate"):
            raise ValueError(f"variable must be 'epsilon' or 'pseudo_rate', got {self.variable!r}")
        if len(self.values) == 0:
            raise ValueError("values must be non-empty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")


@dataclass
class SweepRow:
    value: float
    dice_mean: float
    dice_std: float
    dq_mean: float
    dq_std: float
    dice_replicates: list[float] = field(default_factory=list)
    dq_replicates: list[float] = field(default_factory=list)


@dataclass
class SweepReport:
    variable: str
    rows: list[SweepRow]
    replicates: int
    n_tiles: int
    note: str = REPORT_NOTE

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {self.note}\n")
        buf.write(f"# variable={self.variable} replicates={self.replicates} tiles={self.n_tiles}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([self.variable, "dice_mean", "dice_std", "dq_point_mean", "dq_point_std"])
        for row in self.rows:
            writer.writerow([
                repr(row.value),
                f"{row.dice_mean:.6f}",
                f"{row.dice_std:.6f}",
                f"{row.dq_mean:.6f}",
                f"{row.dq_std:.6f}",
            ])
        return buf.getvalue()


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _summarize(value, dices, dqs) -> SweepRow:
    return SweepRow(
        value=float(value),
        dice_mean=float(np.mean(dices)),
        dice_std=float(np.std(dices)),
        dq_mean=float(np.mean(dqs)),
        dq_std=float(np.std(dqs)),
        dice_replicates=list(map(float, dices)),
        dq_replicates=list(map(float, dqs)),
    )


def _check_corpus(corpus) -> list[LabeledTile]:
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus is empty")
    for i, tile in enumerate(corpus):
        if tile.instances is None:
            raise ValueError(f"tile {tile.tile_id or i} has no ground-truth instance map")
    return corpus


def run_epsilon_sweep(spec: SweepSpec, corpus, cfg: PseudoLabelConfig | None = None) -> SweepReport:
    """Perturb points, regenerate pseudo-labels, score DICE and DQ_point per replicate.

    Replicate ``r`` on tile ``t`` uses the same perturbation seed for every
    epsilon, so differences between rows come from epsilon alone.
    """
    if spec.variable != "epsilon":
        raise ValueError("run_epsilon_sweep needs variable='epsilon'")
    corpus = _check_corpus(corpus)
    cfg = cfg or PseudoLabelConfig()
    truth = [centroid_points(tile.instances) for tile in corpus]
    rows = []
    for eps in spec.values:
        dices, dqs = [], []
        for rep in range(spec.replicates):
            tile_dice, reports = [], []
            for t, tile in enumerate(corpus):
                shifted = perturb_pointset(
                    tile.instances, PerturbConfig(epsilon=eps, seed=_seed(spec.base_seed, rep, t))
                ).points
                result = generate_pseudo_labels(tile.image, shifted, cfg)
                tile_dice.append(dice(result.refined, tile.instances > 0))
                reports.append(dq_point(result.instances, truth[t]))
            dices.append(np.mean(tile_dice))
            dqs.append(pool_reports(reports).score)
        rows.append(_summarize(eps, dices, dqs))
    return SweepReport("epsilon", rows, spec.replicates, len(corpus))


def run_rate_sweep(spec: SweepSpec, corpus, cfg: PseudoLabelConfig | None = None) -> SweepReport:
    """Score mixed manifests: true tiles use ground truth, pseudo tiles their pseudo-labels.

    Pseudo-labels come from the unperturbed centroid points and are computed
    once per tile.
    """
    if spec.variable != "pseudo_rate":
        raise ValueError("run_rate_sweep needs variable='pseudo_rate'")
    corpus = _check_corpus(corpus)
    cfg = cfg or PseudoLabelConfig()
    entries = [TileEntry(tile.tile_id or str(i), "", "") for i, tile in enumerate(corpus)]
    truth, true_scores, pseudo_scores = [], [], []
    for tile in corpus:
        points = centroid_points(tile.instances)
        gt_mask = tile.instances > 0
        result = generate_pseudo_labels(tile.image, points, cfg)
        truth.append(points)
        true_scores.append((dice(gt_mask, gt_mask), dq_point(tile.instances, points)))
        pseudo_scores.append((dice(result.refined, gt_mask), dq_point(result.instances, points)))

    rows = []
    for rate in spec.values:
        dices, dqs = [], []
        for rep in range(spec.replicates):
            manifest = mix_labels(entries, rate, _seed(spec.base_seed, rep))
            picked = [
                pseudo_scores[i] if entry.label_source == "pseudo" else true_scores[i]
                for i, entry in enumerate(manifest.tiles)
            ]
            dices.append(np.mean([d for d, _ in picked]))
            dqs.append(pool_reports([r for _, r in picked]).score)
        rows.append(_summarize(rate, dices, dqs))
    return SweepReport("pseudo_rate", rows, spec.replicates, len(corpus))


def run_sweep(spec: SweepSpec, corpus, cfg: PseudoLabelConfig | None = None) -> SweepReport:
    if spec.variable == "epsilon":
        return run_epsilon_sweep(spec, corpus, cfg)
    return run_rate_sweep(spec, corpus, cfg)
