"""Contrastive and supervised training runs with per-epoch checkpoints."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F

from biascope.encoders.augment import SCHEMES, AugmentationScheme, augment_batch
from biascope.encoders.autodiff import Tape
from biascope.encoders.checkpoint import read_checkpoint, split_prefix, write_checkpoint
from biascope.encoders.models import config_from_json, init_linear, linear
from biascope.errors import MissingLabels
from biascope.synthgen.dataset import DatasetManifest, GeneratorFamily, load_images
from biascope.training.losses import nt_xent_loss, supervised_loss
from biascope.training.metrics import read_metrics, write_metrics
from biascope.training.optim import OptimizerState, adam_step

log = logging.getLogger(__name__)

FULL_EPOCHS = 100


@dataclass(frozen=True)
class TrainConfig:
    supervision: str = "contrastive"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: None = None
    batch_size: int = 64
    epochs: int = 20
    temperature: float = 0.5
    proj_head: bool = True
    seed: int = 0
    augmentation: str | dict = "auto"

    def __post_init__(self):
        if self.supervision not in ("contrastive", "supervised"):
            raise ValueError("supervision must be 'contrastive' or 'supervised'")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.weight_decay not in (None, 0, 0.0):
            raise ValueError("weight decay is not supported")
        if self.supervision == "contrastive" and self.batch_size < 2:
            raise ValueError("contrastive training needs batch_size >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


def resolve_scheme(cfg: TrainConfig, manifest: DatasetManifest) -> AugmentationScheme:
    aug = cfg.augmentation
    if isinstance(aug, dict):
        return AugmentationScheme(**aug)
    if aug == "auto":
        families = {e.family for e in manifest.entries}
        aug = "fractal" if families == {GeneratorFamily.Fractal.value} else "simclr"
    return SCHEMES[aug]


@dataclass
class Checkpoint:
    epoch: int
    encoder: dict
    head: dict
    optimizer: OptimizerState
    encoder_config: object
    train_config: TrainConfig
    n_classes: int | None = None
    mean_loss: float = float("nan")
    extra: dict = field(default_factory=dict)

    def header(self) -> dict:
        return {
            "epoch": self.epoch,
            "config": {"encoder": self.encoder_config.to_json(), "train": self.train_config.to_json()},
            "n_classes": self.n_classes,
            "optimizer_step": self.optimizer.step,
            # every epoch's randomness derives from (seed, epoch)
            "rng": {"seed": self.train_config.seed, "next_epoch": self.epoch + 1},
            "mean_loss": self.mean_loss,
        }

    def save(self, path) -> Path:
        tensors = {f"encoder.{k}": v for k, v in self.encoder.items()}
        tensors.update({f"head.{k}": v for k, v in self.head.items()})
        tensors.update({f"opt.m.{k}": v for k, v in self.optimizer.m.items()})
        tensors.update({f"opt.v.{k}": v for k, v in self.optimizer.v.items()})
        return write_checkpoint(path, self.header(), tensors)


def load_checkpoint(path) -> Checkpoint:
    header, tensors = read_checkpoint(path)
    cfg = header["config"]
    return Checkpoint(
        epoch=header["epoch"],
        encoder=split_prefix(tensors, "encoder."),
        head=split_prefix(tensors, "head."),
        optimizer=OptimizerState(
            split_prefix(tensors, "opt.m."), split_prefix(tensors, "opt.v."), header["optimizer_step"]
        ),
        encoder_config=config_from_json(cfg["encoder"]),
        train_config=TrainConfig(**cfg["train"]),
        n_classes=header.get("n_classes"),
        mean_loss=header.get("mean_loss", float("nan")),
    )


def checkpoint_name(epoch: int) -> str:
    return f"ckpt_epoch{epoch:03d}.bin"


def projection_head(head: dict, z: torch.Tensor) -> torch.Tensor:
    return linear(head, "fc2", F.relu(linear(head, "fc1", z)))


def _init_head(cfg: TrainConfig, out_dim: int, n_classes: int | None, seed: int) -> dict:
    rng = np.random.default_rng([seed, 0x4EAD])
    if cfg.supervision == "supervised":
        return init_linear(rng, "fc", out_dim, n_classes)
    if cfg.proj_head:
        return {**init_linear(rng, "fc1", out_dim, out_dim), **init_linear(rng, "fc2", out_dim, out_dim)}
    return {}


def _join(encoder: dict, head: dict) -> dict:
    return {**{f"encoder.{k}": v for k, v in encoder.items()}, **{f"head.{k}": v for k, v in head.items()}}


def train(
    cfg: TrainConfig,
    encoder_cfg,
    manifest: DatasetManifest,
    out_dir=None,
    on_epoch: Callable[[Checkpoint], None] | None = None,
    resume: Checkpoint | None = None,
    images: np.ndarray | None = None,
) -> list[Checkpoint]:
    """Run ``cfg.epochs`` epochs; return one Checkpoint per epoch.

    With ``out_dir`` each checkpoint is written as ``ckpt_epochNNN.bin`` and the
    per-epoch metrics go to ``metrics.csv`` (phase ``train``). ``resume``
    continues from a checkpoint's epoch.
    """
    labels = None
    n_classes = None
    if cfg.supervision == "supervised":
        if any(e.class_label is None for e in manifest.entries):
            raise MissingLabels("supervised training needs class_label on every entry")
        labels = torch.tensor([e.class_label for e in manifest.entries], dtype=torch.long)
        n_classes = int(labels.max()) + 1
    if images is None:
        images = load_images(manifest, encoder_cfg.channels)
    data = torch.as_tensor(np.ascontiguousarray(images, dtype=np.float32))
    scheme = resolve_scheme(cfg, manifest)
    n = data.shape[0]
    if cfg.supervision == "contrastive" and n < 2:
        raise ValueError("contrastive training needs at least 2 images")
    # a set smaller than one batch trains on a single full batch
    batch = min(cfg.batch_size, n)

    if resume is None:
        encoder = encoder_cfg.init(cfg.seed)
        head = _init_head(cfg, encoder_cfg.out_dim, n_classes, cfg.seed)
        params = _join(encoder, head)
        state = OptimizerState.zeros_like(params)
        start = 1
    else:
        params = _join(resume.encoder, resume.head)
        state = resume.optimizer
        start = resume.epoch + 1

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    if out_dir is not None and resume is not None:
        rows = [
            (int(r["epoch"]), r["phase"], r["metric"], float(r["value"]))
            for r in read_metrics(out_dir / "metrics.csv")
            if r["phase"] == "train" and int(r["epoch"]) < start
        ]
    history = []
    for epoch in range(start, cfg.epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch])
        perm = rng.permutation(n)
        if cfg.supervision == "contrastive":
            batches = [perm[i : i + batch] for i in range(0, n - batch + 1, batch)]
        else:
            batches = [perm[i : i + batch] for i in range(0, n, batch)]
        losses, correct = [], 0
        for idx in batches:
            x = data[idx]
            tape = Tape()
            leaves = tape.watch(params)
            enc = split_prefix(leaves, "encoder.")
            head = split_prefix(leaves, "head.")
            if cfg.supervision == "contrastive":
                views = torch.cat([augment_batch(x, scheme, rng), augment_batch(x, scheme, rng)])
                z = encoder_cfg.forward(enc, views)
                if cfg.proj_head:
                    z = projection_head(head, z)
                loss = nt_xent_loss(z[: len(idx)], z[len(idx) :], cfg.temperature)
            else:
                logits = linear(head, "fc", encoder_cfg.forward(enc, augment_batch(x, scheme, rng)))
                loss = supervised_loss(logits, labels[idx])
                correct += int((logits.argmax(dim=1) == labels[idx]).sum())
            tape.record_loss(loss)
            grads = tape.gradients(leaves)
            params, state = adam_step(params, grads, state, cfg.lr, cfg.beta1, cfg.beta2)
            losses.append(float(loss.detach()))

        mean_loss = float(np.mean(losses))
        rows.append((epoch, "train", "loss", mean_loss))
        ckpt = Checkpoint(
            epoch,
            split_prefix(params, "encoder."),
            split_prefix(params, "head."),
            state,
            encoder_cfg,
            cfg,
            n_classes,
            mean_loss,
        )
        if cfg.supervision == "supervised":
            rows.append((epoch, "train", "accuracy", correct / n))
            rows.append((epoch, "train", "clean_accuracy", clean_accuracy(ckpt, data, labels)))
        log.info("epoch %d loss %.5f", epoch, mean_loss)
        if out_dir is not None:
            ckpt.save(out_dir / checkpoint_name(epoch))
            write_metrics(out_dir / "metrics.csv", rows, {"train"})
        if on_epoch is not None:
            on_epoch(ckpt)
        history.append(ckpt)
    return history


@torch.no_grad()
def embed_images(encoder_cfg, encoder: dict, data: torch.Tensor, batch_size: int = 256) -> torch.Tensor:
    """Backbone features of un-augmented images, [N, out_dim]."""
    out = [encoder_cfg.forward(encoder, data[i : i + batch_size]) for i in range(0, data.shape[0], batch_size)]
    return torch.cat(out) if out else torch.zeros(0, encoder_cfg.out_dim)


@torch.no_grad()
def clean_accuracy(ckpt: Checkpoint, data: torch.Tensor, labels: torch.Tensor) -> float:
    feats = embed_images(ckpt.encoder_config, ckpt.encoder, data)
    pred = linear(ckpt.head, "fc", feats).argmax(dim=1)
    return float((pred == labels).float().mean())
