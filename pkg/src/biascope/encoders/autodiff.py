"""Reverse-mode gradients over ParamSets, plus a finite-difference checker."""
from __future__ import annotations

from typing import Callable

import numpy as np
import torch

from biascope.errors import NoLossRecorded


class Tape:
    """Records one forward pass and one scalar loss.

    ``watch`` returns leaf copies of a ParamSet; run the forward pass with them,
    hand the loss to ``record_loss`` and read gradients with ``gradients``.
    """

    def __init__(self):
        self._watched: list[dict[str, torch.Tensor]] = []
        self._loss: torch.Tensor | None = None
        self._grads: dict[int, torch.Tensor] | None = None

    def watch(self, params: dict) -> dict:
        leaves = {k: v.detach().clone().requires_grad_(True) for k, v in params.items()}
        self._watched.append(leaves)
        return leaves

    def record_loss(self, loss: torch.Tensor) -> torch.Tensor:
        if self._loss is not None:
            raise RuntimeError("a loss was already recorded on this tape")
        if loss.numel() != 1:
            raise ValueError("loss must be a scalar")
        self._loss = loss.reshape(())
        return self._loss

    @property
    def loss(self) -> torch.Tensor:
        if self._loss is None:
            raise NoLossRecorded("no loss recorded")
        return self._loss

    def backward(self) -> None:
        loss = self.loss
        leaves = [t for w in self._watched for t in w.values()]
        if loss.requires_grad and leaves:
            grads = torch.autograd.grad(loss, leaves, allow_unused=True)
        else:
            grads = [None] * len(leaves)
        self._grads = {
            id(t): (torch.zeros_like(t) if g is None else g.detach()) for t, g in zip(leaves, grads)
        }

    def gradients(self, watched: dict) -> dict:
        if self._grads is None:
            self.backward()
        return {k: self._grads[id(v)] for k, v in watched.items()}


def value_and_grad(loss_fn: Callable[[dict], torch.Tensor], params: dict) -> tuple[float, dict]:
    tape = Tape()
    leaves = tape.watch(params)
    tape.record_loss(loss_fn(leaves))
    return float(tape.loss.detach()), tape.gradients(leaves)


def finite_difference_check(
    loss_fn: Callable[[dict], torch.Tensor],
    params: dict,
    n_probes: int = 20,
    h: float = 1e-3,
    seed: int = 0,
    kink_fn: Callable[[dict], torch.Tensor] | None = None,
) -> list[tuple[str, int, float, float]]:
    """Compare reverse-mode gradients with central differences in float64.

    ``kink_fn`` maps params to the network's activation sign pattern; a probe
    whose [-h, +h] interval changes that pattern straddles a ReLU kink, where
    central differences are not a derivative estimate, and is redrawn.
    Returns ``(name, flat_index, analytic, numeric)`` per probed coordinate.
    """
    params = {k: v.detach().to(torch.float64) for k, v in params.items()}
    _, grads = value_and_grad(loss_fn, params)
    base = kink_fn(params) if kink_fn is not None else None
    rng = np.random.default_rng(seed)
    names = sorted(params)
    sizes = np.array([params[n].numel() for n in names], dtype=float)
    out = []
    with torch.no_grad():
        for _ in range(50 * n_probes):
            if len(out) == n_probes:
                break
            name = names[rng.choice(len(names), p=sizes / sizes.sum())]
            idx = int(rng.integers(params[name].numel()))
            flat = params[name].view(-1)
            orig = float(flat[idx])
            flat[idx] = orig + h
            up = float(loss_fn(params))
            smooth = base is None or torch.equal(kink_fn(params), base)
            flat[idx] = orig - h
            down = float(loss_fn(params))
            smooth = smooth and (base is None or torch.equal(kink_fn(params), base))
            flat[idx] = orig
            if smooth:
                out.append((name, idx, float(grads[name].reshape(-1)[idx]), (up - down) / (2 * h)))
    if len(out) < n_probes:
        raise RuntimeError("could not find enough kink-free probe coordinates")
    return out
