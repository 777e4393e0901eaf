"""Per-pixel quality measures and the weight-combination algebra."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, InvalidInputError
from .imgcore import ColorSpace, Image, luma

SIGMA_WELL_EXPOSED = 0.2  # width of the mid-gray preference curve
NORM_EPS = 1e-12          # denominator guard in per-pixel normalization
ZERO_SUM_FALLBACK = 1e-9  # below this per-pixel total, split weight uniformly

_LAPLACIAN = np.array([[0, 1, 0],
                       [1, -4, 1],
                       [0, 1, 0]], dtype=np.float64)


class WeightKind(Enum):
    CONTRAST = "C"
    SATURATION = "S"
    EXPOSURE = "E"


_KIND_ORDER = (WeightKind.CONTRAST, WeightKind.SATURATION, WeightKind.EXPOSURE)


@dataclass
class WeightConfig:
    """Which quality measures to combine, each raised to an exponent in [0, 1].

    An exponent of 0 removes a measure entirely: its map is neither computed
    nor multiplied in, so exclusion is exact rather than a pow(x, 0) round trip.
    """

    included: frozenset[WeightKind]
    exponents: Mapping[WeightKind, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.included = frozenset(self.included)
        if not self.included:
            raise ConfigurationError("weight config needs at least one measure")
        self.exponents = {k: float(v) for k, v in self.exponents.items()}
        for kind, k in self.exponents.items():
            if not 0.0 <= k <= 1.0:
                raise ConfigurationError(
                    f"exponent for {kind.name} must be in [0, 1], got {k}")
        if not self.effective:
            raise ConfigurationError(
                "every measure has exponent 0; nothing left to combine")

    def exponent(self, kind: WeightKind) -> float:
        return self.exponents.get(kind, 1.0)

    @property
    def effective(self) -> tuple[WeightKind, ...]:
        """Included kinds with a positive exponent, in C, S, E order."""
        return tuple(k for k in _KIND_ORDER
                     if k in self.included and self.exponent(k) > 0.0)

    @classmethod
    def from_letters(cls, text: str) -> "WeightConfig":
        """Parse a '+'-joined letter set such as 'C+S+E' or 'C+E'."""
        kinds = set()
        for part in text.split("+"):
            try:
                kinds.add(WeightKind(part.strip()))
            except ValueError:
                raise ConfigurationError(
                    f"unknown weight letter {part.strip()!r} (use C, S, E)") from None
        return cls(frozenset(kinds))

    def letters(self) -> str:
        """Canonical 'C+S+E'-style label of the effective measures."""
        return "+".join(k.value for k in self.effective)


@dataclass(frozen=True, eq=False)
class WeightMaps:
    """One single-channel weight plane per frame, optionally normalized."""

    maps: tuple[Image, ...]
    normalized: bool = False

    def __post_init__(self) -> None:
        maps = tuple(self.maps)
        if not maps:
            raise InvalidInputError("weight stack is empty")
        shape = maps[0].data.shape
        for m in maps:
            if m.channels != 1:
                raise InvalidInputError("weight maps must be single-channel")
            if m.data.shape != shape:
                raise InvalidInputError("weight maps must share dimensions")
            if (m.data < 0).any():
                raise InvalidInputError("weight maps must be non-negative")
        object.__setattr__(self, "maps", maps)

    def __len__(self) -> int:
        return len(self.maps)


def contrast_weight(img: Image) -> Image:
    """Absolute response of the 4-neighbor Laplacian on the luma plane."""
    plane = luma(img).data
    response = ndimage.convolve(plane, _LAPLACIAN, mode="nearest")
    return Image(np.abs(response), ColorSpace.GRAY)


def saturation_weight(img: Image) -> Image:
    """Per-pixel population standard deviation of the R, G, B samples."""
    if img.color_space is not ColorSpace.RGB:
        raise InvalidInputError("saturation weight needs an RGB image")
    return Image(np.std(img.data, axis=2), ColorSpace.GRAY)


def exposure_weight(img: Image, sigma: float = SIGMA_WELL_EXPOSED) -> Image:
    """Product over channels of a Gaussian preference for mid-gray samples."""
    score = np.exp(-((img.data - 0.5) ** 2) / (2.0 * sigma * sigma))
    if score.ndim == 3:
        score = score[..., 0] * score[..., 1] * score[..., 2]
    return Image(score, ColorSpace.GRAY)


def compute_weight(kind: WeightKind, img: Image) -> Image:
    if kind is WeightKind.CONTRAST:
        return contrast_weight(img)
    if kind is WeightKind.SATURATION:
        return saturation_weight(img)
    return exposure_weight(img)


def combine_weights(per_kind: Mapping[WeightKind, Image],
                    cfg: WeightConfig) -> Image:
    """Elementwise product of the configured maps raised to their exponents."""
    kinds = cfg.effective
    for kind in kinds:
        if kind not in per_kind:
            raise ConfigurationError(f"missing weight map for {kind.name}")
    if len({per_kind[k].data.shape for k in kinds}) > 1:
        raise InvalidInputError("weight maps must share dimensions")
    if len(kinds) == 1 and cfg.exponent(kinds[0]) == 1.0:
        return per_kind[kinds[0]]
    result = None
    for kind in kinds:
        k = cfg.exponent(kind)
        term = per_kind[kind].data if k == 1.0 else np.power(per_kind[kind].data, k)
        result = term if result is None else result * term
    return Image(result, ColorSpace.GRAY)


def normalize_weights(stack: WeightMaps) -> WeightMaps:
    """Rescale so the weights at each pixel sum to 1 across frames.

    Pixels where every frame scores (near) zero fall back to the uniform
    1 / N split, keeping the downstream blend a convex combination instead
    of dividing by ~0.
    """
    if stack.normalized:
        raise InvalidInputError("weight stack is already normalized")
    arr = np.stack([m.data for m in stack.maps], axis=0)
    total = arr.sum(axis=0)
    out = arr / (total + NORM_EPS)
    dead = total < ZERO_SUM_FALLBACK
    if dead.any():
        out[:, dead] = 1.0 / len(stack.maps)
    return WeightMaps(tuple(Image(plane, ColorSpace.GRAY) for plane in out),
                      normalized=True)
