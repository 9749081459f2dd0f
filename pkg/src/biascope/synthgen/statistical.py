"""Procedural stand-ins for the untrained-generator image families.

Each generator is a pure function of ``(seed, size)`` and returns a float64
array of shape ``[size, size, 3]`` with values in [0, 1].
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import convolve

SPARSE_DENSITY = 0.02


def _rescale(img: np.ndarray) -> np.ndarray:
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-12:
        return np.full_like(img, 0.5)
    return (img - lo) / (hi - lo)


def _freq_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    # in cycles per image
    k = np.fft.fftfreq(size, d=1.0 / size)
    return np.meshgrid(k, k, indexing="ij")


def random_smooth(rng: np.random.Generator, size: int) -> np.ndarray:
    """Sum of a few random-phase low-frequency cosines with an affine color map."""
    cand = [
        (kx, ky)
        for kx in range(-4, 5)
        for ky in range(0, 5)
        if 0 < kx * kx + ky * ky <= 16 and (ky > 0 or kx > 0)
    ]
    n_modes = int(rng.integers(1, 13))
    picks = rng.choice(len(cand), size=n_modes, replace=False)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    img = np.zeros((size, size, 3))
    for idx in picks:
        kx, ky = cand[idx]
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.cos(2 * np.pi * (kx * xx + ky * yy) / size + phase)
        amp = rng.normal(size=3) / np.hypot(kx, ky)
        img += wave[:, :, None] * amp
    gain = rng.uniform(0.5, 1.5, size=3) * rng.choice([-1.0, 1.0], size=3)
    offset = rng.uniform(-0.5, 0.5, size=3)
    return _rescale(img * gain + offset)


def high_freq(rng: np.random.Generator, size: int) -> np.ndarray:
    """White noise through random annular band-pass filters (one per channel)."""
    fx, fy = _freq_grid(size)
    radius = np.hypot(fx, fy)
    noise = rng.normal(size=(3, size, size))
    mix = np.eye(3) + rng.uniform(-0.5, 0.5, size=(3, 3))
    out = np.empty((size, size, 3))
    for ch in range(3):
        center = rng.uniform(size * 0.2, size * 0.4)
        width = rng.uniform(2.0, 5.0)
        transfer = np.exp(-0.5 * ((radius - center) / width) ** 2)
        out[:, :, ch] = np.real(np.fft.ifft2(np.fft.fft2(noise[ch]) * transfer))
    return _rescale(out @ mix.T)


def sparse_coefficients(rng: np.random.Generator, size: int) -> np.ndarray:
    mask = rng.random((size, size)) < SPARSE_DENSITY
    return np.where(mask, rng.laplace(0.0, 1.0, size=(size, size)), 0.0)


def sparse(rng: np.random.Generator, size: int) -> np.ndarray:
    """Sparse Laplacian impulses blurred by random 5x5 kernels plus channel bias."""
    coeffs = sparse_coefficients(rng, size)
    out = np.empty((size, size, 3))
    for ch in range(3):
        kernel = rng.normal(size=(5, 5))
        out[:, :, ch] = convolve(coeffs, kernel, mode="wrap") + rng.uniform(-0.5, 0.5)
    return _rescale(out)


def oriented(rng: np.random.Generator, size: int) -> np.ndarray:
    """Gabor-like gratings that share one dominant orientation."""
    theta0 = rng.uniform(0, np.pi)
    yy, xx = np.meshgrid(np.arange(size) + 0.5, np.arange(size) + 0.5, indexing="ij")
    img = np.zeros((size, size, 3))
    for _ in range(int(rng.integers(4, 17))):
        theta = theta0 + rng.normal(0, np.deg2rad(8))
        freq = rng.uniform(2, 12) / size
        cx, cy = rng.uniform(0, size, size=2)
        sigma = rng.uniform(0.1, 0.4) * size
        phase = rng.uniform(0, 2 * np.pi)
        u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
        env = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
        g = env * np.cos(2 * np.pi * freq * u + phase)
        img += g[:, :, None] * rng.normal(size=3)
    return _rescale(img)


GENERATORS = {
    "RandomSmooth": random_smooth,
    "HighFreq": high_freq,
    "Sparse": sparse,
    "Oriented": oriented,
}


def radial_energy_fraction(channel: np.ndarray, cutoff: float, above: bool) -> float:
    """Fraction of non-DC spectral energy below (or strictly above) ``cutoff`` cycles/image."""
    size = channel.shape[0]
    power = np.abs(np.fft.fft2(channel - channel.mean())) ** 2
    fx, fy = _freq_grid(size)
    radius = np.hypot(fx, fy)
    total = power.sum()
    if total <= 0:
        return 0.0
    sel = radius > cutoff if above else radius <= cutoff
    return float(power[sel].sum() / total)
