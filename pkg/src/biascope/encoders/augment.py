"""Random-resized-crop / flip / jitter augmentation on channels-last batches."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F

_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class AugmentationScheme:
    crop_scale_min: float = 0.08
    crop_scale_max: float = 1.0
    hflip_prob: float = 0.5
    color_jitter: bool = False
    grayscale_prob: float = 0.0
    jitter_strength: float = 0.4
    jitter_prob: float = 0.8
    blur_prob: float = 0.0
    blur_sigma: tuple[float, float] = (0.1, 2.0)
    rotation_deg: float = 0.0

    def __post_init__(self):
        if not 0 < self.crop_scale_min <= self.crop_scale_max <= 1:
            raise ValueError("need 0 < crop_scale_min <= crop_scale_max <= 1")
        object.__setattr__(self, "blur_sigma", tuple(float(v) for v in self.blur_sigma))
        if not 0 < self.blur_sigma[0] <= self.blur_sigma[1]:
            raise ValueError("need 0 < blur_sigma[0] <= blur_sigma[1]")

    def to_json(self) -> dict:
        return asdict(self)


SCHEMES = {
    "none": AugmentationScheme(1.0, 1.0, 0.0),
    "fractal": AugmentationScheme(0.08, 1.0, 0.5),
    "simclr": AugmentationScheme(0.08, 1.0, 0.5, color_jitter=True, grayscale_prob=0.2, blur_prob=0.5),
}


def _crop_box(rng: np.random.Generator, h: int, w: int, scheme: AugmentationScheme):
    area = h * w
    for _ in range(10):
        target = area * rng.uniform(scheme.crop_scale_min, scheme.crop_scale_max)
        ratio = math.exp(rng.uniform(math.log(3 / 4), math.log(4 / 3)))
        cw = math.sqrt(target * ratio)
        ch = math.sqrt(target / ratio)
        if cw <= w and ch <= h:
            return rng.uniform(0, h - ch), rng.uniform(0, w - cw), ch, cw
    return 0.0, 0.0, float(h), float(w)


def _jitter(x: torch.Tensor, rng: np.random.Generator, s: float) -> torch.Tensor:
    luma = torch.tensor(_LUMA[: x.shape[-1]] if x.shape[-1] == 3 else (1.0,), dtype=x.dtype)
    luma = luma / luma.sum()
    x = x * rng.uniform(1 - s, 1 + s)
    gray_mean = (x @ luma).mean()
    x = (x - gray_mean) * rng.uniform(1 - s, 1 + s) + gray_mean
    if x.shape[-1] == 3:
        gray = (x @ luma)[..., None]
        x = gray + (x - gray) * rng.uniform(1 - s, 1 + s)
    return x.clamp(0.0, 1.0)


def _blur(x: torch.Tensor, sigma: float) -> torch.Tensor:
    # separable gaussian, reflect padding, kernel radius 3 sigma
    r = max(1, int(math.ceil(3 * sigma)))
    t = torch.arange(-r, r + 1, dtype=x.dtype)
    k = torch.exp(-0.5 * (t / sigma) ** 2)
    k = k / k.sum()
    c = x.shape[-1]
    y = x.permute(2, 0, 1)[None]
    r = min(r, x.shape[0] - 1, x.shape[1] - 1)
    k = k[len(k) // 2 - r : len(k) // 2 + r + 1]
    k = k / k.sum()
    y = F.pad(y, (r, r, r, r), mode="reflect")
    y = F.conv2d(y, k.view(1, 1, 1, -1).expand(c, 1, 1, -1), groups=c)
    y = F.conv2d(y, k.view(1, 1, -1, 1).expand(c, 1, -1, 1), groups=c)
    return y[0].permute(1, 2, 0)


def augment_batch(images: torch.Tensor, scheme: AugmentationScheme, rng: np.random.Generator) -> torch.Tensor:
    """One random view of every image in ``images`` [B, H, W, C]."""
    b, h, w, c = images.shape
    thetas = []
    resample = False
    flips = []
    for _ in range(b):
        y0, x0, ch, cw = _crop_box(rng, h, w, scheme)
        flip = rng.random() < scheme.hflip_prob
        angle = math.radians(rng.uniform(-scheme.rotation_deg, scheme.rotation_deg)) if scheme.rotation_deg else 0.0
        flips.append(flip)
        full = ch == h and cw == w and angle == 0.0
        resample |= not full
        # affine map from output normalized coords to input normalized coords (half-pixel centers);
        # rotation turns the crop about its center in pixel units
        sx, sy = cw / w, ch / h
        fx = -sx if flip else sx
        tx = (2 * x0 + cw) / w - 1
        ty = (2 * y0 + ch) / h - 1
        cs, sn = math.cos(angle), math.sin(angle)
        thetas.append([[fx * cs, -sy * sn * h / w, tx], [fx * sn * w / h, sy * cs, ty]])
    if resample:
        theta = torch.tensor(thetas, dtype=images.dtype)
        grid = F.affine_grid(theta, [b, c, h, w], align_corners=False)
        out = F.grid_sample(
            images.permute(0, 3, 1, 2), grid, mode="bilinear", padding_mode="border", align_corners=False
        )
        out = out.permute(0, 2, 3, 1)
    else:
        out = torch.stack([img.flip(1) if f else img for img, f in zip(images, flips)])

    if scheme.color_jitter or scheme.grayscale_prob > 0 or scheme.blur_prob > 0:
        views = []
        for x in out:
            if scheme.color_jitter and rng.random() < scheme.jitter_prob:
                x = _jitter(x, rng, scheme.jitter_strength)
            if c == 3 and rng.random() < scheme.grayscale_prob:
                x = (x @ torch.tensor(_LUMA, dtype=x.dtype))[..., None].expand(h, w, 3)
            if scheme.blur_prob > 0 and rng.random() < scheme.blur_prob:
                x = _blur(x, rng.uniform(*scheme.blur_sigma))
            views.append(x)
        out = torch.stack(views)
    return out.contiguous()


def augment_pair(image, scheme: AugmentationScheme, seed: int):
    """Two independent views of one ``[H, W, C]`` image, deterministic in ``seed``."""
    x = torch.as_tensor(np.asarray(image, dtype=np.float32))[None]
    rng = np.random.default_rng(seed)
    a = augment_batch(x, scheme, rng)[0]
    b = augment_batch(x, scheme, rng)[0]
    return a.numpy(), b.numpy()
