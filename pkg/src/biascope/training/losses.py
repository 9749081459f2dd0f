from __future__ import annotations

import torch

from biascope.errors import LabelOutOfRange, ZeroNormEmbedding


def _normalize(z: torch.Tensor) -> torch.Tensor:
    norms = torch.sqrt((z * z).sum(dim=1, keepdim=True))
    if bool((norms == 0).any()):
        raise ZeroNormEmbedding("zero-norm embedding row")
    return z / norms


def nt_xent_loss(za: torch.Tensor, zb: torch.Tensor, temperature: float = 0.5) -> torch.Tensor:
    """Normalized temperature-scaled cross-entropy over the 2N views of N pairs.

    Row j of ``za`` and row j of ``zb`` are positives; every other view in the
    batch is a negative. Similarities are computed elementwise and each row's
    log-sum-exp runs over sorted logits, so swapping ``za`` and ``zb`` gives a
    bit-identical result.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if za.shape != zb.shape or za.ndim != 2 or za.shape[0] < 1:
        raise ValueError("za and zb must both be [N, D] with N >= 1")
    n = za.shape[0]
    z = torch.cat([_normalize(za), _normalize(zb)], dim=0)
    sim = (z[:, None, :] * z[None, :, :]).sum(dim=-1) / temperature
    idx = torch.arange(2 * n)
    pos = sim[idx, (idx + n) % (2 * n)]
    off_diag = ~torch.eye(2 * n, dtype=torch.bool)
    others = sim[off_diag].reshape(2 * n, 2 * n - 1)
    others = torch.sort(others, dim=1).values
    per_view = torch.logsumexp(others, dim=1) - pos
    return (per_view[:n].sum() + per_view[n:].sum()) / (2 * n)


def supervised_loss(logits: torch.Tensor, labels) -> torch.Tensor:
    """Mean softmax cross-entropy with max subtraction."""
    labels = torch.as_tensor(labels, dtype=torch.long)
    k = logits.shape[1]
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= k):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    shifted = logits - logits.max(dim=1, keepdim=True).values.detach()
    log_z = torch.log(torch.exp(shifted).sum(dim=1))
    picked = shifted.gather(1, labels[:, None])[:, 0]
    return (log_z - picked).mean()
