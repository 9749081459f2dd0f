"""Bias-corrected Adam without weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch

from biascope.errors import ShapeMismatch

EPS = 1e-8


@dataclass
class OptimizerState:
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: dict) -> OptimizerState:
        return cls(
            {k: torch.zeros_like(p) for k, p in params.items()},
            {k: torch.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict, grads: dict, state: OptimizerState, lr=1e-4, beta1=0.9, beta2=0.999):
    """Return (new_params, new_state); inputs are left untouched."""
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeMismatch("params, grads and optimizer state disagree on names")
    t = state.step + 1
    c1 = 1 - beta1**t
    c2 = 1 - beta2**t
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape or state.m[k].shape != p.shape:
            raise ShapeMismatch(f"{k}: gradient/state shape does not match parameter")
        m = beta1 * state.m[k] + (1 - beta1) * g
        v = beta2 * state.v[k] + (1 - beta2) * g * g
        new_p[k] = p - lr * (m / c1) / (torch.sqrt(v / c2) + EPS)
        new_m[k], new_v[k] = m, v
    return new_p, OptimizerState(new_m, new_v, t)

