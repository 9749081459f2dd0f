"""Linear probe on a frozen encoder."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch

from biascope.encoders.autodiff import Tape
from biascope.encoders.models import linear
from biascope.errors import MissingLabels
from biascope.synthgen.dataset import DatasetManifest, load_images
from biascope.training.loop import Checkpoint, TrainConfig, embed_images, load_checkpoint
from biascope.training.losses import supervised_loss
from biascope.training.optim import OptimizerState, adam_step

PROBE_EPOCHS = 2
HEAD_INIT_STD = 0.01


def is_held_out(entry_id: str) -> bool:
    """Deterministic 80/20 split keyed on the entry id."""
    return int.from_bytes(hashlib.sha256(entry_id.encode("utf-8")).digest()[:8], "little") % 5 == 0


@dataclass
class ProbeResult:
    accuracy: float
    train_accuracy: float
    n_train: int
    n_test: int
    epoch_losses: list[float]


def linear_probe(
    checkpoint,
    manifest: DatasetManifest,
    epochs: int = PROBE_EPOCHS,
    cfg: TrainConfig | None = None,
    images: np.ndarray | None = None,
) -> ProbeResult:
    """Fit a freshly initialized linear head on frozen backbone features.

    Features come from one un-augmented pass and are standardized with
    training-split statistics; the head starts from N(0, 0.01^2) weights.
    """
    ckpt = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint)
    cfg = cfg or ckpt.train_config
    if any(e.class_label is None for e in manifest.entries):
        raise MissingLabels("linear probe needs class_label on every entry")
    enc_cfg = ckpt.encoder_config
    if images is None:
        images = load_images(manifest, enc_cfg.channels)
    feats = embed_images(enc_cfg, ckpt.encoder, torch.as_tensor(np.asarray(images, dtype=np.float32)))
    labels = torch.tensor([e.class_label for e in manifest.entries], dtype=torch.long)
    test = torch.tensor([is_held_out(e.id) for e in manifest.entries])
    if test.all() or not test.any():
        raise ValueError("probe split is degenerate; need more entries")
    xtr, ytr, xte, yte = feats[~test], labels[~test], feats[test], labels[test]
    mu, sd = xtr.mean(dim=0), xtr.std(dim=0) + 1e-6
    xtr, xte = (xtr - mu) / sd, (xte - mu) / sd

    n_classes = int(labels.max()) + 1
    rng = np.random.default_rng([cfg.seed, 0x9B0E])
    head = {
        "fc.weight": torch.from_numpy(
            rng.normal(0.0, HEAD_INIT_STD, size=(feats.shape[1], n_classes)).astype(np.float32)
        ),
        "fc.bias": torch.zeros(n_classes),
    }
    state = OptimizerState.zeros_like(head)
    losses = []
    for epoch in range(epochs):
        perm = torch.from_numpy(rng.permutation(len(ytr)))
        epoch_loss = []
        for i in range(0, len(perm), cfg.batch_size):
            idx = perm[i : i + cfg.batch_size]
            tape = Tape()
            leaves = tape.watch(head)
            loss = tape.record_loss(supervised_loss(linear(leaves, "fc", xtr[idx]), ytr[idx]))
            head, state = adam_step(head, tape.gradients(leaves), state, cfg.lr, cfg.beta1, cfg.beta2)
            epoch_loss.append(float(loss.detach()))
        losses.append(float(np.mean(epoch_loss)))
    with torch.no_grad():
        acc = float((linear(head, "fc", xte).argmax(dim=1) == yte).float().mean())
        tr_acc = float((linear(head, "fc", xtr).argmax(dim=1) == ytr).float().mean())
    return ProbeResult(acc, tr_acc, len(ytr), len(yte), losses)
