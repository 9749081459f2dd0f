"""Leave-one-out K-NN shape bias over encoder embeddings of dual-labeled images."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from biascope.errors import Indeterminate, MissingLabels, SizeMismatch, TooFewSamples, ZeroNormEmbedding
from biascope.synthgen.dataset import DatasetManifest, load_images
from biascope.training.loop import Checkpoint, embed_images, load_checkpoint

DEFAULT_K = 5
# cosine distances equal to this many decimals count as ties
DISTANCE_DECIMALS = 12


@dataclass
class EmbeddingSet:
    vectors: np.ndarray
    shape_labels: np.ndarray
    texture_labels: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.shape_labels = np.asarray(self.shape_labels, dtype=np.int64)
        self.texture_labels = np.asarray(self.texture_labels, dtype=np.int64)
        n = self.vectors.shape[0]
        if len(self.shape_labels) != n or len(self.texture_labels) != n:
            raise ValueError("label arrays must have one entry per vector")

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def swapped(self) -> EmbeddingSet:
        return EmbeddingSet(self.vectors, self.texture_labels, self.shape_labels, dict(self.source))


@dataclass
class ShapeBiasReport:
    n: int
    shape_correct: int
    texture_correct: int
    both_correct: int
    bias: float
    k: int = DEFAULT_K
    distance: str = "cosine"
    source: dict = field(default_factory=dict)

    @property
    def union(self) -> int:
        return self.shape_correct + self.texture_correct - self.both_correct

    def to_json(self) -> dict:
        return asdict(self)


def unit_rows(vectors: np.ndarray) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0) or not np.all(np.isfinite(x)):
        raise ZeroNormEmbedding("zero-norm or non-finite embedding")
    return x / norms[:, None]


def _distances_from(unit: np.ndarray, q: int) -> np.ndarray:
    d = np.round(1.0 - unit @ unit[q], DISTANCE_DECIMALS)
    d[q] = np.inf
    return d


def _vote(labels: np.ndarray, dists: np.ndarray) -> int:
    uniq, counts = np.unique(labels, return_counts=True)
    tied = uniq[counts == counts.max()]
    if len(tied) == 1:
        return int(tied[0])
    sums = np.array([dists[labels == lab].sum() for lab in tied])
    # np.unique is sorted, so argmin picks the lowest label among equal sums
    return int(tied[np.argmin(sums)])


def _classify(unit: np.ndarray, labels: np.ndarray, k: int, q: int) -> int:
    d = _distances_from(unit, q)
    near = np.argsort(d, kind="stable")[:k]
    return _vote(labels[near], d[near])


def knn_loo_classify(vectors, labels, k: int, query_index: int) -> int:
    """Majority label of the ``k`` nearest (cosine) neighbors of one sample, itself excluded.

    Vote ties go to the label with the smallest summed distance, then the lowest label.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if k >= n:
        raise TooFewSamples(f"need more than K={k} samples, got {n}")
    return _classify(unit_rows(vectors), labels, k, query_index)


def knn_loo_predict_all(vectors, labels, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    n = len(labels)
    if k >= n:
        raise TooFewSamples(f"need more than K={k} samples, got {n}")
    unit = unit_rows(vectors)
    return np.array([_classify(unit, labels, k, q) for q in range(n)], dtype=np.int64)


def shape_bias(emb: EmbeddingSet, k: int = DEFAULT_K) -> ShapeBiasReport:
    if np.any(emb.shape_labels < 0) or np.any(emb.texture_labels < 0):
        raise MissingLabels("every sample needs both a shape and a texture label")
    shape_ok = knn_loo_predict_all(emb.vectors, emb.shape_labels, k) == emb.shape_labels
    tex_ok = knn_loo_predict_all(emb.vectors, emb.texture_labels, k) == emb.texture_labels
    s, t, both = int(shape_ok.sum()), int(tex_ok.sum()), int((shape_ok & tex_ok).sum())
    union = s + t - both
    if union == 0:
        raise Indeterminate("no sample is classified correctly by shape or by texture")
    return ShapeBiasReport(len(emb), s, t, both, s / union, k, "cosine", dict(emb.source))


def embed_dataset(checkpoint, manifest: DatasetManifest, images: np.ndarray | None = None) -> EmbeddingSet:
    """Backbone features for every manifest entry, in manifest order."""
    ckpt = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint)
    cfg = ckpt.encoder_config
    if images is None:
        images = load_images(manifest, cfg.channels)
    if images.shape[1:3] != (cfg.image_size, cfg.image_size):
        raise SizeMismatch(f"images are {images.shape[1:3]}, encoder expects {cfg.image_size}")
    feats = embed_images(cfg, ckpt.encoder, torch.as_tensor(np.asarray(images, dtype=np.float32)))
    vectors = feats.numpy().astype(np.float64)
    unit_rows(vectors)

    def labels(attr):
        return [(-1 if getattr(e, attr) is None else getattr(e, attr)) for e in manifest.entries]

    source = {"epoch": ckpt.epoch, "checkpoint": str(checkpoint) if not isinstance(checkpoint, Checkpoint) else None}
    return EmbeddingSet(vectors, labels("shape_label"), labels("texture_label"), source)


# --- files -----------------------------------------------------------------

MAGIC = b"EMB1"


def write_embeddings(path, emb: EmbeddingSet) -> Path:
    path = Path(path)
    n, d = emb.vectors.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(emb.vectors.astype("<f4").tobytes())
        fh.write(emb.shape_labels.astype("<i4").tobytes())
        fh.write(emb.texture_labels.astype("<i4").tobytes())
    meta = path.with_suffix(".meta.json")
    meta.write_text(json.dumps(emb.source, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def read_embeddings(path) -> EmbeddingSet:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not an EMB1 file")
    n, d = struct.unpack_from("<II", raw, 4)
    off = 12
    vectors = np.frombuffer(raw, "<f4", n * d, off).reshape(n, d)
    off += 4 * n * d
    shape = np.frombuffer(raw, "<i4", n, off)
    texture = np.frombuffer(raw, "<i4", n, off + 4 * n)
    meta = path.with_suffix(".meta.json")
    source = json.loads(meta.read_text(encoding="utf-8")) if meta.exists() else {}
    return EmbeddingSet(vectors.astype(np.float64), shape, texture, source)


def write_report(path, report: ShapeBiasReport) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path
