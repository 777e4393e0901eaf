"""Full-reference quality metrics on [0, 1] float images.

Structural metrics run on luma; the error metrics treat channels directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .imgcore import Image, luma

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
ERGAS_MEAN_FLOOR = 1e-6


@dataclass(frozen=True)
class MetricReport:
    ms_ssim: float
    psnr: float
    ergas: float


def _check_pair(test: Image, ref: Image) -> None:
    if test.data.shape != ref.data.shape:
        raise InvalidInputError(
            f"image shapes differ: {test.data.shape} vs {ref.data.shape}")
    if test.color_space is not ref.color_space:
        raise InvalidInputError("images must share a color space")


def psnr(test: Image, ref: Image) -> float:
    """Peak signal-to-noise ratio in dB against peak 1.0, capped at 99."""
    _check_pair(test, ref)
    mse = float(np.mean((test.data - ref.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


_WINDOW = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)


def _valid_filter(arr: np.ndarray) -> np.ndarray:
    # separable windowed mean, then crop to where the window fit entirely
    out = ndimage.convolve1d(arr, _WINDOW, axis=0, mode="constant")
    out = ndimage.convolve1d(out, _WINDOW, axis=1, mode="constant")
    r = SSIM_WINDOW // 2
    return out[r:arr.shape[0] - r, r:arr.shape[1] - r]


def _ssim_parts(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Mean SSIM and mean contrast-structure term over the valid region."""
    c1 = SSIM_K1 * SSIM_K1
    c2 = SSIM_K2 * SSIM_K2
    mu_x = _valid_filter(x)
    mu_y = _valid_filter(y)
    sxx = _valid_filter(x * x) - mu_x * mu_x
    syy = _valid_filter(y * y) - mu_y * mu_y
    sxy = _valid_filter(x * y) - mu_x * mu_y
    lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    cs = (2.0 * sxy + c2) / (sxx + syy + c2)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def ssim(test: Image, ref: Image) -> float:
    """Mean structural similarity on luma, 11x11 Gaussian window."""
    _check_pair(test, ref)
    x = luma(test).data
    y = luma(ref).data
    if min(x.shape[0], x.shape[1]) < SSIM_WINDOW:
        raise InvalidInputError(
            f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window")
    return _ssim_parts(x, y)[0]


def _halve(arr: np.ndarray) -> np.ndarray:
    h = arr.shape[0] - arr.shape[0] % 2
    w = arr.shape[1] - arr.shape[1] % 2
    arr = arr[:h, :w]
    return 0.25 * (arr[0::2, 0::2] + arr[0::2, 1::2]
                   + arr[1::2, 0::2] + arr[1::2, 1::2])


def feasible_scales(height: int, width: int) -> int:
    """How many of the five scales keep both sides >= the ssim window."""
    count = 0
    d = min(height, width)
    while count < len(MS_SSIM_WEIGHTS) and d >= SSIM_WINDOW:
        count += 1
        d //= 2
    return count


def ms_ssim(test: Image, ref: Image) -> float:
    """Multi-scale structural similarity on luma.

    Small images use however many of the five scales fit, with the scale
    weights renormalized over the ones used.
    """
    _check_pair(test, ref)
    x = luma(test).data
    y = luma(ref).data
    scales = feasible_scales(x.shape[0], x.shape[1])
    if scales == 0:
        raise InvalidInputError(
            f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window")
    weights = np.asarray(MS_SSIM_WEIGHTS[:scales], dtype=np.float64)
    weights = weights / weights.sum()
    value = 1.0
    for level in range(scales):
        full, cs = _ssim_parts(x, y)
        part = full if level == scales - 1 else cs
        # negative covariance terms can push cs below 0; clamp so the
        # fractional power stays real
        value *= max(part, 0.0) ** weights[level]
        if level != scales - 1:
            x = _halve(x)
            y = _halve(y)
    return float(value)


def ergas(test: Image, ref: Image, ratio: float = 1.0) -> float:
    """Relative dimensionless global error, per-channel RMSE over channel mean.

    Channels whose reference mean is at or below the floor are skipped with a
    warning; skipping all of them is an error.
    """
    _check_pair(test, ref)
    t = test.data
    r = ref.data
    if t.ndim == 2:
        t = t[..., None]
        r = r[..., None]
    terms = []
    for c in range(r.shape[-1]):
        mean_c = float(np.mean(r[..., c]))
        if mean_c <= ERGAS_MEAN_FLOOR:
            warnings.warn(
                f"ergas: channel {c} reference mean {mean_c:.3g} too small, "
                "skipping", RuntimeWarning, stacklevel=2)
            continue
        rmse_c = float(np.sqrt(np.mean((t[..., c] - r[..., c]) ** 2)))
        terms.append((rmse_c / mean_c) ** 2)
    if not terms:
        raise InvalidInputError("ergas: all channels skipped, no usable means")
    return float(100.0 * ratio * np.sqrt(np.mean(terms)))


def evaluate(test: Image, ref: Image) -> MetricReport:
    """All three metrics in one report."""
    return MetricReport(ms_ssim=ms_ssim(test, ref),
                        psnr=psnr(test, ref),
                        ergas=ergas(test, ref))
