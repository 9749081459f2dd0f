"""Dataset-fraction sweeps: converged shape bias as a diversity estimate."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

from biascope.bias import DEFAULT_K, embed_dataset, shape_bias
from biascope.errors import EmptyResult, Indeterminate
from biascope.synthgen.dataset import DatasetManifest, derive_seed, load_images
from biascope.training.loop import TrainConfig, train
from biascope.training.metrics import write_metrics

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.05, 0.25, 0.5, 0.75, 1.0)
FLAT_THRESHOLD = 0.02


def subsample_dataset(manifest: DatasetManifest, fraction: float, seed: int) -> DatasetManifest:
    """Seeded sample of ceil(fraction * N) entries without replacement.

    Entries are ranked once per seed and every fraction takes a prefix of that
    ranking, so smaller fractions are subsets of larger ones. With class labels
    the j-th pick (0-based) of a class of size m is keyed j / m, the smallest
    fraction whose per-class ceiling admits it, so no class ever exceeds
    ceil(fraction * m) and ties between classes are cut round-robin.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    n = len(manifest)
    target = math.ceil(round(fraction * n, 9))
    if target == 0:
        raise EmptyResult("subsample would be empty")
    order = sample_order(manifest, seed)
    keep = sorted(order[:target])
    return manifest.subset(manifest.entries[i] for i in keep)


def sample_order(manifest: DatasetManifest, seed: int) -> list[int]:
    n = len(manifest)
    labels = [e.class_label for e in manifest.entries]
    if n == 0 or any(lab is None for lab in labels):
        return [int(i) for i in np.random.default_rng(derive_seed(seed, 0x5AB)).permutation(n)]
    keys = []
    for rank, c in enumerate(sorted(set(labels))):
        members = [i for i, lab in enumerate(labels) if lab == c]
        perm = np.random.default_rng(derive_seed(seed, 0x5AB, c)).permutation(len(members))
        for j, p in enumerate(perm):
            keys.append((Fraction(j, len(members)), rank, members[p]))
    keys.sort()
    return [k[2] for k in keys]


@dataclass
class SweepConfig:
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    convergence_start: int | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    k: int = DEFAULT_K

    def __post_init__(self):
        self.fractions = tuple(float(f) for f in self.fractions)
        if list(self.fractions) != sorted(self.fractions) or self.fractions[-1] != 1.0:
            raise ValueError("fractions must be ascending and include 1.0")
        if any(not 0 < f <= 1 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        if self.convergence_start is not None and not 1 <= self.convergence_start <= self.train.epochs:
            raise ValueError("convergence_start must be an epoch in 1..epochs")

    @property
    def start_epoch(self) -> int:
        # epochs are 1-based; default is the second half of training
        if self.convergence_start is not None:
            return self.convergence_start
        return max(1, self.train.epochs // 2)


@dataclass
class DiversityReport:
    fractions: list[float]
    converged_bias: list[float | None]
    curves: list[list[float | None]]
    missing: list[int]
    convergence_start: int
    epochs: int
    k: int
    diversity_score: float = 0.0
    flat: bool = True

    def bias_at(self) -> dict[float, float]:
        return {f: b for f, b in zip(self.fractions, self.converged_bias) if b is not None}

    def to_json(self) -> dict:
        return asdict(self)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path


def diversity_score(report: DiversityReport | Mapping[float, float]) -> float:
    """Converged bias at the largest fraction minus bias at the smallest."""
    biases = report.bias_at() if isinstance(report, DiversityReport) else dict(report)
    if not biases:
        raise Indeterminate("no converged bias available")
    return float(biases[max(biases)] - biases[min(biases)])


def is_flat(score: float) -> bool:
    return abs(score) < FLAT_THRESHOLD


def run_sweep(
    cfg: SweepConfig,
    encoder_cfg,
    train_manifest: DatasetManifest,
    benchmark: DatasetManifest,
    out_dir=None,
) -> DiversityReport:
    """Train on each fraction and average benchmark shape bias after convergence."""
    train_images = load_images(train_manifest, encoder_cfg.channels)
    bench_images = load_images(benchmark, encoder_cfg.channels)
    index = {e.id: i for i, e in enumerate(train_manifest.entries)}
    start = cfg.start_epoch
    curves, converged, missing, rows = [], [], [], []
    for i, frac in enumerate(cfg.fractions):
        sub = subsample_dataset(train_manifest, frac, cfg.seed)
        images = train_images[[index[e.id] for e in sub.entries]]
        curve: list[float | None] = []

        def evaluate(ckpt, curve=curve, frac=frac):
            try:
                r = shape_bias(embed_dataset(ckpt, benchmark, bench_images), cfg.k)
                curve.append(r.bias)
                rows.append((ckpt.epoch, "sweep", f"bias@{frac:g}", r.bias))
            except Indeterminate:
                curve.append(None)
            log.info("fraction %g epoch %d bias %s", frac, ckpt.epoch, curve[-1])

        tcfg = replace(cfg.train, seed=cfg.seed ^ i)
        train(tcfg, encoder_cfg, sub, None, evaluate, images=images)
        window = [b for b in curve[start - 1 :] if b is not None]
        curves.append(curve)
        missing.append(sum(b is None for b in curve[start - 1 :]))
        converged.append(float(np.mean(window)) if window else None)

    report = DiversityReport(list(cfg.fractions), converged, curves, missing, start, cfg.train.epochs, cfg.k)
    report.diversity_score = diversity_score(report)
    report.flat = is_flat(report.diversity_score)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.write(out_dir / "sweep_report.json")
        write_metrics(out_dir / "metrics.csv", rows, {"sweep"})
    return report
