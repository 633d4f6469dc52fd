"""Quality and rate metrics used in reports."""

from __future__ import annotations

import math

import numpy as np

PSNR_CAP = 99.0


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB over all RGB samples; identical images report 99 dB."""
    return psnr_from_mse(mse(a, b))


def psnr_from_mse(err: float) -> float:
    if err == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / err))


def bpp(total_bytes: int, dims: tuple[int, int]) -> float:
    height, width = dims
    if height <= 0 or width <= 0:
        raise ValueError(f"bad image dims {dims}")
    return total_bytes * 8.0 / (height * width)


def rd_cost(rate: float, distortion: float, lam: float) -> float:
    """``rate + lam * distortion`` (bpp, MSE on the 0..255 scale)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return rate + lam * distortion


def sample_variance(values) -> float:
    """Unbiased variance; NaN for fewer than two values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return float("nan")
    return float(np.var(values, ddof=1))
