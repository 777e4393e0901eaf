"""Gaussian and Laplacian pyramids with exact collapse.

The classic 5-tap binomial kernel [1, 4, 6, 4, 1] / 16 with replicate edges
drives both reduction and expansion. Odd dimensions halve with ceil
semantics and the expansion is generated on the parent's exact grid, so
collapse reconstructs the input to floating-point accuracy at any depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .imgcore import Image

KERNEL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


class PyramidKind(Enum):
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"


@dataclass(frozen=True, eq=False)
class Pyramid:
    """Ordered levels, full resolution first, each ceil-half the previous."""

    kind: PyramidKind
    levels: tuple[Image, ...]

    def __post_init__(self) -> None:
        levels = tuple(self.levels)
        if not levels:
            raise InvalidInputError("pyramid needs at least one level")
        channels = levels[0].channels
        prev = None
        for level in levels:
            if level.channels != channels:
                raise InvalidInputError("pyramid levels must share channel count")
            if prev is not None:
                want = ((prev.height + 1) // 2, (prev.width + 1) // 2)
                if (level.height, level.width) != want:
                    raise InvalidInputError(
                        f"level size {(level.height, level.width)} does not "
                        f"ceil-halve its parent, expected {want}")
            prev = level
        object.__setattr__(self, "levels", levels)

    @property
    def depth(self) -> int:
        return len(self.levels)


def default_depth(width: int, height: int) -> int:
    """Depth that leaves the coarsest level's smaller side at >= 4 pixels."""
    if width < 1 or height < 1:
        raise InvalidInputError("dimensions must be positive")
    return max(1, min(width, height).bit_length() - 1 - 2)


def _blur5(arr: np.ndarray) -> np.ndarray:
    # separable binomial blur; taps are exact binary fractions summing to 1,
    # so constants pass through bit-exactly
    out = ndimage.convolve1d(arr, KERNEL5, axis=0, mode="nearest")
    return ndimage.convolve1d(out, KERNEL5, axis=1, mode="nearest")


def _downsample2(arr: np.ndarray) -> np.ndarray:
    return arr[::2, ::2]


def _upsample2(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Zero-stuff onto the (height, width) parent grid and blur with 4x gain.

    The half-size plane is replicate-extended on its own grid before
    stuffing, so border outputs see the same sample pattern as the interior
    and constants survive expansion exactly.
    """
    pad = [(1, 2), (1, 2)] + [(0, 0)] * (arr.ndim - 2)
    ext = np.pad(arr, pad, mode="edge")
    shape = (2 * ext.shape[0] - 1, 2 * ext.shape[1] - 1) + arr.shape[2:]
    stuffed = np.zeros(shape, dtype=np.float64)
    stuffed[::2, ::2] = ext
    out = ndimage.convolve1d(stuffed, 2.0 * KERNEL5, axis=0, mode="constant")
    out = ndimage.convolve1d(out, 2.0 * KERNEL5, axis=1, mode="constant")
    return out[2:2 + height, 2:2 + width]


def _check_depth(img: Image, depth: int) -> None:
    if depth < 1:
        raise InvalidInputError(f"pyramid depth must be >= 1, got {depth}")
    if 2 ** (depth - 1) > min(img.width, img.height):
        raise InvalidInputError(
            f"depth {depth} too deep for a {img.width}x{img.height} image")


def gaussian_pyramid(img: Image, depth: int) -> Pyramid:
    """Level 0 is the input; each next level is blur5 then keep-even rows/cols."""
    _check_depth(img, depth)
    levels = [img]
    arr = img.data
    for _ in range(depth - 1):
        arr = _downsample2(_blur5(arr))
        levels.append(Image(arr, img.color_space))
    return Pyramid(PyramidKind.GAUSSIAN, tuple(levels))


def laplacian_pyramid(img: Image, depth: int) -> Pyramid:
    """Band-pass differences against the expanded next level; low-pass on top."""
    _check_depth(img, depth)
    gauss = [img.data]
    for _ in range(depth - 1):
        gauss.append(_downsample2(_blur5(gauss[-1])))
    levels = []
    for k in range(depth - 1):
        up = _upsample2(gauss[k + 1], gauss[k].shape[0], gauss[k].shape[1])
        levels.append(Image(gauss[k] - up, img.color_space))
    levels.append(Image(gauss[-1], img.color_space))
    return Pyramid(PyramidKind.LAPLACIAN, tuple(levels))


def collapse(pyr: Pyramid) -> Image:
    """Rebuild the full-resolution image from a band-pass decomposition.

    No clamping happens here; band-pass sums legitimately overshoot and the
    caller decides when to clip.
    """
    if pyr.kind is not PyramidKind.LAPLACIAN:
        raise InvalidInputError("collapse needs a Laplacian pyramid")
    recon = pyr.levels[-1].data
    for level in reversed(pyr.levels[:-1]):
        recon = _upsample2(recon, level.height, level.width) + level.data
    return Image(recon, pyr.levels[0].color_space)
