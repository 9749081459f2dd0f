"""Toy ViT and residual-CNN encoders written as pure functions of a ParamSet.

A ParamSet is a plain ``dict[str, torch.Tensor]``; iteration order for
serialization is always ``sorted(params)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from biascope.errors import ShapeMismatch, SizeMismatch

ParamSet = dict


def sorted_params(params: ParamSet) -> list[tuple[str, torch.Tensor]]:
    return [(k, params[k]) for k in sorted(params)]


def param_count(params: ParamSet) -> int:
    return sum(int(v.numel()) for v in params.values())


def cast_params(params: ParamSet, dtype: torch.dtype) -> ParamSet:
    return {k: v.detach().to(dtype) for k, v in params.items()}


def _he_uniform(rng: np.random.Generator, shape, fan_in: int) -> torch.Tensor:
    bound = math.sqrt(6.0 / fan_in)
    return torch.from_numpy(rng.uniform(-bound, bound, size=shape).astype(np.float32))


def _zeros(*shape) -> torch.Tensor:
    return torch.zeros(shape, dtype=torch.float32)


def _ones(*shape) -> torch.Tensor:
    return torch.ones(shape, dtype=torch.float32)


def _check(params: ParamSet, expected: dict[str, tuple[int, ...]]) -> None:
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise ShapeMismatch(f"parameter names differ from config: missing={missing} extra={extra}")
    for name, shape in expected.items():
        if tuple(params[name].shape) != tuple(shape):
            raise ShapeMismatch(f"{name}: expected {tuple(shape)}, got {tuple(params[name].shape)}")


def init_linear(rng: np.random.Generator, prefix: str, d_in: int, d_out: int) -> ParamSet:
    return {f"{prefix}.weight": _he_uniform(rng, (d_in, d_out), d_in), f"{prefix}.bias": _zeros(d_out)}


def linear(params: ParamSet, prefix: str, x: torch.Tensor) -> torch.Tensor:
    return x @ params[f"{prefix}.weight"] + params[f"{prefix}.bias"]


# --- patches ---------------------------------------------------------------


def patchify(image, patch_size: int):
    """Split ``[H, W, C]`` (or batched ``[B, H, W, C]``) into raster-ordered patches.

    Each patch vector is laid out as (row, col, channel) inside the patch.
    """
    batched = image.ndim == 4
    x = image if batched else image[None]
    b, h, w, c = x.shape
    if h % patch_size or w % patch_size:
        raise SizeMismatch(f"image {h}x{w} not divisible by patch size {patch_size}")
    gh, gw = h // patch_size, w // patch_size
    x = x.reshape(b, gh, patch_size, gw, patch_size, c)
    x = x.transpose(2, 3) if isinstance(x, torch.Tensor) else x.transpose(0, 1, 3, 2, 4, 5)
    x = x.reshape(b, gh * gw, patch_size * patch_size * c)
    return x if batched else x[0]


def unpatchify(patches, patch_size: int, height: int, width: int, channels: int):
    gh, gw = height // patch_size, width // patch_size
    x = patches.reshape(gh, gw, patch_size, patch_size, channels)
    return x.transpose(0, 2, 1, 3, 4).reshape(height, width, channels)


# --- ViT -------------------------------------------------------------------


@dataclass(frozen=True)
class VitConfig:
    patch_size: int = 8
    n_layers: int = 2
    n_heads: int = 4
    hidden_dim: int = 64
    mlp_ratio: float = 4.0
    out_dim: int = 64
    image_size: int = 64
    channels: int = 3
    kind: str = field(default="vit", init=False)

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise ValueError("image_size must be divisible by patch_size")
        if self.hidden_dim % self.n_heads:
            raise ValueError("hidden_dim must be divisible by n_heads")

    @property
    def n_patches(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def mlp_dim(self) -> int:
        return int(round(self.hidden_dim * self.mlp_ratio))

    def to_json(self) -> dict:
        return asdict(self)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        d, m = self.hidden_dim, self.mlp_dim
        shapes = {
            "patch_embed.weight": (self.patch_size**2 * self.channels, d),
            "patch_embed.bias": (d,),
            "pos_embed": (self.n_patches, d),
            "norm.weight": (d,),
            "norm.bias": (d,),
            "head.weight": (d, self.out_dim),
            "head.bias": (self.out_dim,),
        }
        for i in range(self.n_layers):
            p = f"blocks.{i}"
            shapes.update(
                {
                    f"{p}.ln1.weight": (d,),
                    f"{p}.ln1.bias": (d,),
                    f"{p}.attn.qkv.weight": (d, 3 * d),
                    f"{p}.attn.qkv.bias": (3 * d,),
                    f"{p}.attn.out.weight": (d, d),
                    f"{p}.attn.out.bias": (d,),
                    f"{p}.ln2.weight": (d,),
                    f"{p}.ln2.bias": (d,),
                    f"{p}.mlp.fc1.weight": (d, m),
                    f"{p}.mlp.fc1.bias": (m,),
                    f"{p}.mlp.fc2.weight": (m, d),
                    f"{p}.mlp.fc2.bias": (d,),
                }
            )
        return shapes

    def init(self, seed: int) -> ParamSet:
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in sorted(self.param_shapes().items()):
            if name.endswith("ln1.weight") or name.endswith("ln2.weight") or name == "norm.weight":
                params[name] = _ones(*shape)
            elif name.endswith(".weight"):
                params[name] = _he_uniform(rng, shape, shape[0])
            else:
                params[name] = _zeros(*shape)
        return params

    def forward(self, params: ParamSet, batch: torch.Tensor) -> torch.Tensor:
        _check(params, self.param_shapes())
        if batch.ndim != 4 or tuple(batch.shape[1:]) != (self.image_size, self.image_size, self.channels):
            raise ShapeMismatch(f"batch shape {tuple(batch.shape)} does not fit config")
        b = batch.shape[0]
        d, nh = self.hidden_dim, self.n_heads
        dh = d // nh
        h = linear(params, "patch_embed", patchify(batch, self.patch_size)) + params["pos_embed"]
        n = h.shape[1]
        for i in range(self.n_layers):
            p = f"blocks.{i}"
            y = F.layer_norm(h, (d,), params[f"{p}.ln1.weight"], params[f"{p}.ln1.bias"])
            qkv = linear(params, f"{p}.attn.qkv", y).reshape(b, n, 3, nh, dh).permute(2, 0, 3, 1, 4)
            q, k, v = qkv[0], qkv[1], qkv[2]
            att = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(dh), dim=-1)
            o = (att @ v).transpose(1, 2).reshape(b, n, d)
            h = h + linear(params, f"{p}.attn.out", o)
            y = F.layer_norm(h, (d,), params[f"{p}.ln2.weight"], params[f"{p}.ln2.bias"])
            h = h + linear(params, f"{p}.mlp.fc2", F.gelu(linear(params, f"{p}.mlp.fc1", y)))
        h = F.layer_norm(h, (d,), params["norm.weight"], params["norm.bias"])
        return linear(params, "head", h.mean(dim=1))


VIT_DESK = VitConfig()
VIT_FULL = VitConfig(patch_size=8, n_layers=7, n_heads=8, hidden_dim=512, out_dim=512)


# --- CNN -------------------------------------------------------------------


@dataclass(frozen=True)
class CnnConfig:
    stage_channels: tuple[int, ...] = (16, 32, 64)
    block: str = "residual"
    out_dim: int = 64
    image_size: int = 64
    channels: int = 3
    kind: str = field(default="cnn", init=False)

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(self.stage_channels))
        if len(self.stage_channels) < 2:
            raise ValueError("CNN needs at least two stages")
        if self.block not in ("plain", "residual"):
            raise ValueError("block must be 'plain' or 'residual'")
        if self.image_size % (2 ** len(self.stage_channels)):
            raise ValueError("image_size must be divisible by the total stride")

    @property
    def total_stride(self) -> int:
        return 2 ** len(self.stage_channels)

    def to_json(self) -> dict:
        out = asdict(self)
        out["stage_channels"] = list(self.stage_channels)
        return out

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {}
        c_in = self.channels
        for i, c in enumerate(self.stage_channels):
            p = f"stages.{i}"
            shapes[f"{p}.down.weight"] = (c, c_in, 3, 3)
            shapes[f"{p}.down.bias"] = (c,)
            for j in (1, 2):
                shapes[f"{p}.conv{j}.weight"] = (c, c, 3, 3)
                shapes[f"{p}.conv{j}.bias"] = (c,)
            c_in = c
        shapes["head.weight"] = (c_in, self.out_dim)
        shapes["head.bias"] = (self.out_dim,)
        return shapes

    def init(self, seed: int) -> ParamSet:
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in sorted(self.param_shapes().items()):
            if name.endswith(".weight"):
                fan_in = shape[0] if len(shape) == 2 else shape[1] * shape[2] * shape[3]
                params[name] = _he_uniform(rng, shape, fan_in)
            else:
                params[name] = _zeros(*shape)
        return params

    def forward(self, params: ParamSet, batch: torch.Tensor) -> torch.Tensor:
        return self._forward(params, batch, None)

    def relu_signs(self, params: ParamSet, batch: torch.Tensor) -> torch.Tensor:
        """Sign pattern of every ReLU input; constant on smooth pieces of the network."""
        record: list[torch.Tensor] = []
        with torch.no_grad():
            self._forward(params, batch, record)
        return torch.cat([r.reshape(-1) > 0 for r in record])

    def _forward(self, params, batch, record):
        _check(params, self.param_shapes())
        if batch.ndim != 4 or tuple(batch.shape[1:]) != (self.image_size, self.image_size, self.channels):
            raise ShapeMismatch(f"batch shape {tuple(batch.shape)} does not fit config")

        def relu(z):
            if record is not None:
                record.append(z)
            return F.relu(z)

        x = batch.permute(0, 3, 1, 2)
        for i in range(len(self.stage_channels)):
            p = f"stages.{i}"
            x = relu(F.conv2d(x, params[f"{p}.down.weight"], params[f"{p}.down.bias"], stride=2, padding=1))
            y = relu(F.conv2d(x, params[f"{p}.conv1.weight"], params[f"{p}.conv1.bias"], padding=1))
            y = F.conv2d(y, params[f"{p}.conv2.weight"], params[f"{p}.conv2.bias"], padding=1)
            x = relu(x + y if self.block == "residual" else y)
        return linear(params, "head", x.mean(dim=(2, 3)))


CNN_DESK = CnnConfig()
# roughly ResNet-18 widths; expressible, not exercised at desk scale
CNN_FULL = CnnConfig(stage_channels=(64, 128, 256, 512), out_dim=512)


@dataclass(frozen=True)
class StubConfig:
    """Constant-embedding encoder for pipeline tests."""

    out_dim: int = 8
    image_size: int = 64
    channels: int = 3
    kind: str = field(default="stub", init=False)

    def to_json(self) -> dict:
        return asdict(self)

    def param_shapes(self) -> dict:
        return {}

    def init(self, seed: int) -> ParamSet:
        return {}

    def forward(self, params: ParamSet, batch: torch.Tensor) -> torch.Tensor:
        return torch.ones(batch.shape[0], self.out_dim, dtype=batch.dtype)


PRESETS = {
    ("vit", "desk"): VIT_DESK,
    ("vit", "full"): VIT_FULL,
    ("cnn", "desk"): CNN_DESK,
    ("cnn", "full"): CNN_FULL,
    ("stub", "desk"): StubConfig(),
}


def config_from_json(obj: dict):
    obj = dict(obj)
    kind = obj.pop("kind")
    cls = {"vit": VitConfig, "cnn": CnnConfig, "stub": StubConfig}[kind]
    return cls(**obj)
