"""Perceptual similarity scores between an original and a perturbed image.

Two scores gate the attack loop: the Pearson correlation coefficient over
all pixels (channels pooled) and the mean structural similarity index over
sliding Gaussian windows (11x11, sigma 1.5, K1=0.01, K2=0.03, dynamic
range 1.0; multi-channel images are scored per channel and averaged).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from advkit.errors import DegenerateImageError, ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 1.0


@dataclass(frozen=True)
class PerceptualScores:
    cr: float
    ssi: float


def correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson product-moment correlation over all flattened pixels."""
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    xf = np.asarray(x, dtype=np.float64).ravel()
    yf = np.asarray(y, dtype=np.float64).ravel()
    if xf.size < 2:
        raise ShapeError("correlation needs at least 2 elements")
    xc = xf - xf.mean()
    yc = yf - yf.mean()
    vx = np.dot(xc, xc)
    vy = np.dot(yc, yc)
    if vx == 0.0 or vy == 0.0:
        raise DegenerateImageError("constant image has undefined correlation")
    r = np.dot(xc, yc) / np.sqrt(vx * vy)
    return float(np.clip(r, -1.0, 1.0))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian weighting window."""
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_channel(x: np.ndarray, y: np.ndarray, window: np.ndarray) -> float:
    win = window.shape[0]
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    xw = sliding_window_view(x, (win, win))
    yw = sliding_window_view(y, (win, win))
    mu_x = np.einsum("ijkl,kl->ij", xw, window)
    mu_y = np.einsum("ijkl,kl->ij", yw, window)
    xx = np.einsum("ijkl,kl->ij", xw * xw, window)
    yy = np.einsum("ijkl,kl->ij", yw * yw, window)
    xy = np.einsum("ijkl,kl->ij", xw * yw, window)
    var_x = xx - mu_x ** 2
    var_y = yy - mu_y ** 2
    cov = xy - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean SSIM over sliding Gaussian windows; channels scored independently, then averaged."""
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
        y = y[None]
    if x.ndim != 3:
        raise ShapeError(f"expected [C,H,W] or [H,W] image, got shape {x.shape}")
    _, h, w = x.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ShapeError(f"image {h}x{w} smaller than SSIM window {SSIM_WINDOW}")
    window = gaussian_window()
    return float(np.mean([_ssim_channel(xc, yc, window) for xc, yc in zip(x, y)]))


def score_pair(x: np.ndarray, y: np.ndarray) -> PerceptualScores:
    return PerceptualScores(cr=correlation(x, y), ssi=ssim(x, y))
