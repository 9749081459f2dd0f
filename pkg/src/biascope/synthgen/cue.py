"""Procedural cue-conflict images: a silhouette of one class filled with a texture of another."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from matplotlib.path import Path
from scipy.ndimage import binary_erosion, zoom

SHAPES = ("circle", "triangle", "square", "star", "cross", "ring", "crescent", "hbar")
TEXTURES = ("stripes0", "stripes45", "checker", "dots", "perlin", "rings", "zigzag", "speckle")
N_CLASSES = 8
SCALE_RANGE = (0.4, 0.8)

# rotational symmetry period of each silhouette, radians (0 = fully symmetric)
_SYMMETRY = {
    "circle": 0.0,
    "triangle": 2 * np.pi / 3,
    "square": np.pi / 2,
    "star": 2 * np.pi / 5,
    "cross": np.pi / 2,
    "ring": 0.0,
    "crescent": 2 * np.pi,
    "hbar": np.pi,
}


def _regular_polygon(n: int, radius: float = 1.0, phase: float = np.pi / 2) -> np.ndarray:
    t = phase + 2 * np.pi * np.arange(n) / n
    return np.stack([radius * np.cos(t), radius * np.sin(t)], axis=1)


def _star() -> np.ndarray:
    outer = _regular_polygon(5, 1.0)
    inner = _regular_polygon(5, 0.45, np.pi / 2 + np.pi / 5)
    return np.stack([outer, inner], axis=1).reshape(10, 2)


_POLYGONS = {
    "triangle": Path(_regular_polygon(3)),
    "square": Path(_regular_polygon(4, phase=np.pi / 4)),
    "star": Path(_star()),
}


def shape_membership(shape: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Boolean membership of unit-frame points; every silhouette fits the unit disk."""
    name = SHAPES[shape]
    r2 = u * u + v * v
    if name == "circle":
        return r2 <= 1.0
    if name == "ring":
        return (r2 <= 1.0) & (r2 >= 0.55**2)
    if name == "crescent":
        return (r2 <= 1.0) & ((u - 0.45) ** 2 + v * v > 0.8**2)
    if name == "cross":
        au, av = np.abs(u), np.abs(v)
        return ((au <= 0.3) & (av <= 0.95)) | ((av <= 0.3) & (au <= 0.95))
    if name == "hbar":
        au, av = np.abs(u), np.abs(v)
        return ((au >= 0.35) & (au <= 0.7) & (av <= 0.7)) | ((au < 0.35) & (av <= 0.15))
    pts = np.stack([u.ravel(), v.ravel()], axis=1)
    return _POLYGONS[name].contains_points(pts).reshape(u.shape)


@dataclass(frozen=True)
class Pose:
    cx: float
    cy: float
    radius: float
    angle: float


def _pixel_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    # x to the right, y up, pixel centers
    yy, xx = np.meshgrid(np.arange(size) + 0.5, np.arange(size) + 0.5, indexing="ij")
    return xx, size - yy


def render_mask(shape: int, pose: Pose, size: int) -> np.ndarray:
    x, y = _pixel_grid(size)
    dx, dy = (x - pose.cx) / pose.radius, (y - pose.cy) / pose.radius
    c, s = np.cos(pose.angle), np.sin(pose.angle)
    return shape_membership(shape, c * dx + s * dy, -s * dx + c * dy)


def sample_pose(rng: np.random.Generator, size: int) -> Pose:
    radius = rng.uniform(*SCALE_RANGE) * size / 2
    cx, cy = rng.uniform(radius, size - radius, size=2)
    return Pose(float(cx), float(cy), float(radius), float(rng.uniform(0, 2 * np.pi)))


def _contrasting_colors(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    weights = np.array([0.299, 0.587, 0.114])
    while True:
        a, b = rng.random(3), rng.random(3)
        if abs(a @ weights - b @ weights) >= 0.35:
            return a, b


def _square_wave(phase: np.ndarray) -> np.ndarray:
    return 0.5 + 0.5 * np.tanh(4 * np.sin(phase))


def texture_field(texture: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Scalar pattern in [0, 1] over the whole frame, [size, size]."""
    name = TEXTURES[texture]
    x, y = _pixel_grid(size)
    period = rng.uniform(5.0, 9.0)
    phase = rng.uniform(0, 2 * np.pi)
    w = 2 * np.pi / period
    if name == "stripes0":
        return _square_wave(w * y + phase)
    if name == "stripes45":
        return _square_wave(w * (x + y) / np.sqrt(2) + phase)
    if name == "checker":
        return (np.sin(w * x + phase) * np.sin(w * y + rng.uniform(0, 2 * np.pi)) > 0).astype(float)
    if name == "dots":
        ox, oy = rng.uniform(0, period, size=2)
        fx = np.mod(x + ox, period) - period / 2
        fy = np.mod(y + oy, period) - period / 2
        return (np.hypot(fx, fy) <= 0.3 * period).astype(float)
    if name == "perlin":
        field = np.zeros((size, size))
        for octave, amp in ((4, 1.0), (8, 0.5)):
            grid = rng.normal(size=(octave + 1, octave + 1))
            up = zoom(grid, size / (octave + 1), order=3, mode="grid-wrap", grid_mode=True)
            field += amp * up[:size, :size]
        return (field - field.min()) / (np.ptp(field) + 1e-12)
    if name == "rings":
        cx, cy = rng.uniform(0, size, size=2)
        return _square_wave(w * np.hypot(x - cx, y - cy) + phase)
    if name == "zigzag":
        tri = np.abs(np.mod(x / period, 1.0) - 0.5) * period
        return _square_wave(w * (y + tri) + phase)
    if name == "speckle":
        return (rng.random((size, size)) < 0.5).astype(float)
    raise ValueError(name)


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    grid = rng.normal(size=(5, 5))
    smooth = zoom(grid, size / 5, order=3, grid_mode=True, mode="nearest")[:size, :size]
    level = rng.uniform(0.4, 0.6)
    return np.clip(level + 0.04 * smooth, 0, 1)


@dataclass(frozen=True)
class CueSample:
    image: np.ndarray  # [size, size, 3]
    mask: np.ndarray  # [size, size] bool
    shape_label: int
    texture_label: int
    pose: Pose


def render_cue_conflict(shape_class: int, texture_class: int, seed: int, size: int = 64) -> CueSample:
    if not (0 <= shape_class < N_CLASSES and 0 <= texture_class < N_CLASSES):
        raise ValueError("shape_class and texture_class must be in 0..7")
    if size < 16:
        raise ValueError("size must be >= 16")
    rng = np.random.default_rng(seed)
    pose = sample_pose(rng, size)
    mask = render_mask(shape_class, pose, size)
    pattern = texture_field(texture_class, rng, size)
    c1, c2 = _contrasting_colors(rng)
    fill = pattern[:, :, None] * c1 + (1 - pattern[:, :, None]) * c2
    bg = _background(rng, size)[:, :, None].repeat(3, axis=2)
    img = np.where(mask[:, :, None], fill, bg)
    return CueSample(np.clip(img, 0.0, 1.0), mask, shape_class, texture_class, pose)


def gen_cue_conflict(shape_class: int, texture_class: int, seed: int, size: int = 64):
    s = render_cue_conflict(shape_class, texture_class, seed, size)
    return s.image, s.shape_label, s.texture_label


# --- qualification oracles -------------------------------------------------


@lru_cache(maxsize=None)
def _template_stats(shape: int) -> tuple[float, float, float]:
    """(area, centroid_u, centroid_v) of the unit-frame silhouette."""
    n = 1200
    t = (np.arange(n) + 0.5) / n * 2 - 1
    u, v = np.meshgrid(t, t, indexing="xy")
    m = shape_membership(shape, u, v)
    cell = (2.0 / n) ** 2
    return float(m.sum() * cell), float(u[m].mean()), float(v[m].mean())


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


def _best_iou(shape: int, mask: np.ndarray) -> float:
    size = mask.shape[0]
    x, y = _pixel_grid(size)
    area_px = mask.sum()
    mx, my = x[mask].mean(), y[mask].mean()
    area_u, cu, cv = _template_stats(shape)
    radius = np.sqrt(area_px / area_u)

    def score(angle: float) -> float:
        c, s = np.cos(angle), np.sin(angle)
        # template centroid, rotated into the image frame, must land on the mask centroid
        cx = mx - radius * (c * cu - s * cv)
        cy = my - radius * (s * cu + c * cv)
        return _iou(render_mask(shape, Pose(cx, cy, radius, angle), size), mask)

    period = _SYMMETRY[SHAPES[shape]]
    if period == 0.0:
        return score(0.0)
    coarse = np.arange(0.0, period, np.deg2rad(6))
    scores = [score(a) for a in coarse]
    best = coarse[int(np.argmax(scores))]
    fine = best + np.deg2rad(np.arange(-3.0, 3.5, 1.0))
    return max(max(scores), max(score(a) for a in fine))


def shape_oracle(mask: np.ndarray) -> int:
    """Template matching of a known silhouette mask against every shape class."""
    return int(np.argmax([_best_iou(c, mask) for c in range(N_CLASSES)]))


def texture_features(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Orientation histogram plus masked autocorrelation of interior luminance."""
    lum = image @ np.array([0.299, 0.587, 0.114])
    inner = binary_erosion(mask, iterations=2)
    if inner.sum() < 16:
        inner = mask
    vals = lum[inner]
    mu, var = vals.mean(), vals.var() + 1e-9

    gy, gx = np.gradient(lum)
    mag = np.hypot(gx, gy)[inner]
    ang = np.mod(2 * np.arctan2(gy, gx)[inner], 2 * np.pi)
    hist = np.bincount((ang / (2 * np.pi) * 8).astype(int) % 8, weights=mag, minlength=8)
    hist = hist / (hist.sum() + 1e-9)

    z = np.where(inner, lum - mu, 0.0)
    acf = []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        for lag in range(1, 9):
            a, b = _shifted(z, inner, dy * lag, dx * lag)
            acf.append(a / (b * var) if b else 0.0)
    energy = np.mean(mag**2) / var
    return np.concatenate([hist, acf, [np.log(energy + 1e-9)]])


def _shifted(z: np.ndarray, m: np.ndarray, dy: int, dx: int) -> tuple[float, int]:
    h, w = z.shape
    ys, yd = slice(max(0, -dy), h - max(0, dy)), slice(max(0, dy), h - max(0, -dy))
    xs, xd = slice(max(0, -dx), w - max(0, dx)), slice(max(0, dx), w - max(0, -dx))
    both = m[ys, xs] & m[yd, xd]
    return float((z[ys, xs] * z[yd, xd])[both].sum()), int(both.sum())


class TextureOracle:
    """5-NN texture classifier over standardized statistics of a qualification set."""

    k = 5

    def __init__(self, size: int = 64, per_class: int = 80, seed: int = 12345):
        rng = np.random.default_rng(seed)
        feats, labels = [], []
        for t in range(N_CLASSES):
            for _ in range(per_class):
                s = int(rng.integers(0, N_CLASSES))
                sample = render_cue_conflict(s, t, int(rng.integers(0, 2**63)), size)
                feats.append(texture_features(sample.image, sample.mask))
                labels.append(t)
        x = np.array(feats)
        self.mean = x.mean(axis=0)
        self.std = x.std(axis=0) + 1e-6
        self.points = (x - self.mean) / self.std
        self.labels = np.array(labels)

    def __call__(self, image: np.ndarray, mask: np.ndarray) -> int:
        f = (texture_features(image, mask) - self.mean) / self.std
        d = ((self.points - f) ** 2).sum(axis=1)
        near = np.argsort(d, kind="stable")[: self.k]
        votes = np.bincount(self.labels[near], minlength=N_CLASSES)
        return int(np.argmax(votes))
