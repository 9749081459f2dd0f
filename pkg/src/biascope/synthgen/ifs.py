"""Iterated function systems and chaos-game rendering."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from biascope.errors import DegenerateAttractor, ResampleExhausted

MAX_ATTEMPTS = 1000
BURN_IN = 100
MARGIN = 0.05
OCCUPANCY_RANGE = (0.01, 0.5)
PROB_FLOOR = 0.01
CONTRACTION_BOUND = 0.95


@dataclass(frozen=True)
class AffineMap2D:
    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    p: float

    @property
    def linear(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def sigma_max(self) -> float:
        return float(np.linalg.norm(self.linear, 2))

    def __call__(self, xy):
        x, y = xy
        return (self.a * x + self.b * y + self.e, self.c * x + self.d * y + self.f)


@dataclass(frozen=True)
class IfsSystem:
    maps: tuple[AffineMap2D, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([m.p for m in self.maps])

    @property
    def weighted_contraction(self) -> float:
        return float(sum(m.p * m.sigma_max for m in self.maps))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (linear [n,2,2], offset [n,2], p [n])."""
        lin = np.array([m.linear for m in self.maps], dtype=np.float64)
        off = np.array([[m.e, m.f] for m in self.maps], dtype=np.float64)
        return lin, off, self.probabilities

    def check(self) -> None:
        n = len(self.maps)
        if not 2 <= n <= 8:
            raise ValueError(f"IFS needs 2..8 maps, got {n}")
        p = self.probabilities
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("map probabilities must be positive and sum to 1")
        if any(m.sigma_max > 1.0 + 1e-12 for m in self.maps):
            raise ValueError("a map is not a contraction")
        if self.weighted_contraction > CONTRACTION_BOUND:
            raise ValueError("weighted contraction above bound")

    def to_json(self) -> dict:
        return {
            "seed": int(self.seed),
            "maps": [[m.a, m.b, m.c, m.d, m.e, m.f, m.p] for m in self.maps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> IfsSystem:
        return cls(tuple(AffineMap2D(*row) for row in obj["maps"]), int(obj["seed"]))


def det_probabilities(linear: np.ndarray) -> np.ndarray:
    w = np.abs(np.linalg.det(linear)) + PROB_FLOOR
    return w / w.sum()


def sample_ifs(seed: int) -> IfsSystem:
    """Draw a random contractive IFS whose attractor renders to a usable image."""
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ATTEMPTS):
        n = int(rng.integers(2, 9))
        coeffs = rng.uniform(-1.0, 1.0, size=(n, 6))
        linear = coeffs[:, :4].reshape(n, 2, 2)
        sig = np.linalg.norm(linear, ord=2, axis=(1, 2))
        over = sig > 1.0
        linear[over] /= sig[over, None, None]
        sig = np.minimum(sig, 1.0)
        p = det_probabilities(linear)
        if float(p @ sig) > CONTRACTION_BOUND:
            continue
        maps = tuple(
            AffineMap2D(*(float(v) for v in (*linear[i].ravel(), *coeffs[i, 4:])), p=float(p[i]))
            for i in range(n)
        )
        ifs = IfsSystem(maps, seed)
        try:
            render_fractal(ifs, 64, 10 * 64 * 64, int(rng.integers(0, 2**63)))
        except DegenerateAttractor:
            continue
        return ifs
    raise ResampleExhausted(f"no valid IFS after {MAX_ATTEMPTS} attempts (seed={seed})")


@numba.njit(cache=True)
def _chaos_game(lin, off, choices, burn_in):
    n = choices.shape[0]
    pts = np.empty((n - burn_in, 2))
    x = 0.0
    y = 0.0
    for k in range(n):
        i = choices[k]
        nx = lin[i, 0, 0] * x + lin[i, 0, 1] * y + off[i, 0]
        ny = lin[i, 1, 0] * x + lin[i, 1, 1] * y + off[i, 1]
        x = nx
        y = ny
        if k >= burn_in:
            pts[k - burn_in, 0] = x
            pts[k - burn_in, 1] = y
    return pts


def chaos_points(ifs: IfsSystem, n_points: int, seed: int) -> np.ndarray:
    """Chaos-game orbit from the origin, burn-in discarded. Returns [n_points, 2]."""
    lin, off, p = ifs.as_arrays()
    rng = np.random.default_rng(seed)
    choices = rng.choice(len(p), size=n_points + BURN_IN, p=p)
    return _chaos_game(lin, off, choices, BURN_IN)


def _check_bounded(pts: np.ndarray) -> None:
    head = pts[:1000]
    lo, hi = head.min(axis=0), head.max(axis=0)
    center, half = (lo + hi) / 2, (hi - lo) / 2
    bound = 10 * np.maximum(half, 1e-12)
    if np.any(np.abs(pts - center) > bound + 1e-9):
        raise AssertionError("chaos-game orbit escaped its bounding region")


def render_fractal(
    ifs: IfsSystem,
    size: int = 64,
    n_points: int | None = None,
    seed: int = 0,
    max_rotation: float = 0.0,
) -> np.ndarray:
    """Render the attractor as a log-density grayscale image [size, size, 1].

    ``max_rotation`` (degrees) rotates the point cloud by an angle drawn from
    ``seed`` before rasterization; dataset builds use it for per-image variation.
    """
    if size < 16:
        raise ValueError("size must be >= 16")
    if n_points is None:
        n_points = 10 * size * size
    if n_points < 10 * size * size:
        raise ValueError("n_points must be >= 10*size^2")
    pts = chaos_points(ifs, n_points, seed)
    if not np.all(np.isfinite(pts)):
        raise DegenerateAttractor("non-finite orbit")
    _check_bounded(pts)
    if max_rotation:
        angle = np.deg2rad(np.random.default_rng([seed, 1]).uniform(-max_rotation, max_rotation))
        c, s = np.cos(angle), np.sin(angle)
        pts = pts @ np.array([[c, s], [-s, c]])

    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = float(np.max(hi - lo))
    if extent <= 0:
        counts = np.zeros((size, size))
        counts[size // 2, size // 2] = len(pts)
    else:
        span = extent * (1 + 2 * MARGIN)
        origin = (lo + hi) / 2 - span / 2
        ij = np.floor((pts - origin) / span * size).astype(np.int64)
        np.clip(ij, 0, size - 1, out=ij)
        # row index from y (flipped so +y is up), column from x
        flat = (size - 1 - ij[:, 1]) * size + ij[:, 0]
        counts = np.bincount(flat, minlength=size * size).reshape(size, size).astype(np.float64)

    occupied = float(np.mean(counts > 0))
    if not OCCUPANCY_RANGE[0] <= occupied <= OCCUPANCY_RANGE[1]:
        raise DegenerateAttractor(f"occupied fraction {occupied:.4f} outside {OCCUPANCY_RANGE}")
    img = np.log1p(counts) / np.log1p(counts.max())
    return img[:, :, None]


def sierpinski() -> IfsSystem:
    third = 1.0 / 3.0
    return IfsSystem(
        (
            AffineMap2D(0.5, 0, 0, 0.5, 0.0, 0.0, third),
            AffineMap2D(0.5, 0, 0, 0.5, 0.5, 0.0, third),
            AffineMap2D(0.5, 0, 0, 0.5, 0.0, 0.5, third),
        ),
        seed=0,
    )
