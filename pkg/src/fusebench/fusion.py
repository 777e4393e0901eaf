"""The four fusion methods and the EV-positive stacking step."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, InvalidInputError
from .imgcore import ColorSpace, FrameSequence, Image, rgb_to_yuv, yuv_to_rgb
from .pyramid import (
    Pyramid,
    PyramidKind,
    collapse,
    default_depth,
    gaussian_pyramid,
    laplacian_pyramid,
)
from .weights import (
    WeightConfig,
    WeightKind,
    WeightMaps,
    combine_weights,
    compute_weight,
    normalize_weights,
)


class FusionMethod(Enum):
    MERTENS = "mertens"
    FAST_YUV = "fast-yuv"
    SSF_RGB = "ssf-rgb"
    SSF_YUV = "ssf-yuv"

    @property
    def rgb_weights(self) -> bool:
        """True when weights are measured on RGB frames (saturation legal)."""
        return self in (FusionMethod.MERTENS, FusionMethod.SSF_RGB)

    @property
    def allowed_kinds(self) -> frozenset[WeightKind]:
        if self.rgb_weights:
            return frozenset((WeightKind.CONTRAST, WeightKind.SATURATION,
                              WeightKind.EXPOSURE))
        return frozenset((WeightKind.CONTRAST, WeightKind.EXPOSURE))


class StackingMethod(Enum):
    MEAN = "mean"
    MEDIAN = "median"
    NONE = "none"


@dataclass
class FusionConfig:
    """One point in the benchmark variable space.

    pyramid_depth None derives the depth from the frame size; the SSF sigmas
    default to min(W, H) / 32 for the base band and min(W, H) / 8 for the
    weight masks.
    """

    method: FusionMethod
    weights: WeightConfig
    n_positive: int = 1
    stacking: StackingMethod = StackingMethod.NONE
    pyramid_depth: int | None = None
    ssf_sigma_base: float | None = None
    ssf_sigma_weight: float | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.n_positive <= 5:
            raise ConfigurationError(
                f"n_positive must be in 1..5, got {self.n_positive}")
        if self.n_positive == 1 and self.stacking is not StackingMethod.NONE:
            raise ConfigurationError(
                f"stacking {self.stacking.value} needs more than one EV>=0 frame")
        illegal = set(self.weights.effective) - self.method.allowed_kinds
        if illegal:
            names = "+".join(sorted(k.value for k in illegal))
            raise ConfigurationError(
                f"weight {names} only applies to mertens and ssf-rgb, "
                f"not {self.method.value}")
        if self.pyramid_depth is not None and self.pyramid_depth < 1:
            raise ConfigurationError("pyramid_depth must be >= 1")
        for name in ("ssf_sigma_base", "ssf_sigma_weight"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigurationError(f"{name} must be >= 0")


def stack_frames(frames: Sequence[Image], method: StackingMethod) -> Image:
    """Reduce same-size frames to one by per-pixel mean or median.

    Median over an even count resolves to the mean of the two middle order
    statistics.
    """
    if method is StackingMethod.NONE:
        raise InvalidInputError("stacking 'none' keeps frames separate")
    frames = list(frames)
    if not frames:
        raise InvalidInputError("no frames to stack")
    first = frames[0]
    for frame in frames[1:]:
        if (frame.data.shape != first.data.shape
                or frame.color_space is not first.color_space):
            raise InvalidInputError(
                "stacked frames must share dimensions and color space")
    block = np.stack([f.data for f in frames], axis=0)
    if method is StackingMethod.MEAN:
        out = block.mean(axis=0)
    else:
        out = np.median(block, axis=0)
    return Image(out, first.color_space)


def prepare_inputs(seq: FrameSequence, cfg: FusionConfig) -> list[Image]:
    """Select the negative frame plus the n lowest EV>=0 frames, in EV order.

    With stacking enabled the positive frames collapse to their stacked
    image, so the fusion proper always sees [negative, positives...] or
    [negative, stacked].
    """
    negatives = [f for f in seq if f.ev < 0]
    if len(negatives) != 1:
        raise InvalidInputError(
            f"need exactly one EV<0 frame, sequence has {len(negatives)}")
    positives = [f for f in seq if f.ev >= 0]  # already EV-ascending
    if len(positives) < cfg.n_positive:
        raise InvalidInputError(
            f"need {cfg.n_positive} EV>=0 frames, sequence has {len(positives)}")
    chosen = [f.image for f in positives[:cfg.n_positive]]
    if cfg.stacking is not StackingMethod.NONE and cfg.n_positive >= 2:
        chosen = [stack_frames(chosen, cfg.stacking)]
    return [negatives[0].image] + chosen


def _check_inputs(inputs: Sequence[Image], wcfg: WeightConfig,
                  allowed: frozenset[WeightKind], label: str) -> list[Image]:
    imgs = list(inputs)
    if len(imgs) < 2:
        raise InvalidInputError("fusion needs at least two frames")
    first = imgs[0]
    for img in imgs:
        if img.color_space is not ColorSpace.RGB:
            raise InvalidInputError(f"{label} fuses RGB frames")
        if img.data.shape != first.data.shape:
            raise InvalidInputError("input frames must share dimensions")
    illegal = set(wcfg.effective) - allowed
    if illegal:
        names = "+".join(sorted(k.value for k in illegal))
        raise ConfigurationError(f"weight {names} is not available for {label}")
    return imgs


def _combined_weight_maps(planes: Sequence[Image],
                          wcfg: WeightConfig) -> WeightMaps:
    # only the effective kinds are ever computed: dropping a measure saves
    # its whole map, it is not multiplied in as x**0
    per_frame = []
    for img in planes:
        per_kind = {kind: compute_weight(kind, img) for kind in wcfg.effective}
        per_frame.append(combine_weights(per_kind, wcfg))
    return normalize_weights(WeightMaps(tuple(per_frame)))


def _pyramid_blend(planes: Sequence[Image], weights: WeightMaps,
                   depth: int) -> np.ndarray:
    """Sum over frames of Gaussian(weight) x Laplacian(plane), collapsed."""
    blended: list[np.ndarray] | None = None
    for img, wmap in zip(planes, weights.maps):
        wpyr = gaussian_pyramid(wmap, depth)
        ipyr = laplacian_pyramid(img, depth)
        terms = []
        for wlevel, ilevel in zip(wpyr.levels, ipyr.levels):
            w = wlevel.data
            if ilevel.data.ndim == 3:
                w = w[..., None]
            terms.append(w * ilevel.data)
        blended = terms if blended is None else [
            a + b for a, b in zip(blended, terms)]
    levels = tuple(Image(a, planes[0].color_space) for a in blended)
    return collapse(Pyramid(PyramidKind.LAPLACIAN, levels)).data


def _box_length(sigma: float) -> int:
    # three box passes of length l have variance 3 (l^2 - 1) / 12; matching
    # sigma^2 gives l = sqrt(4 sigma^2 + 1), rounded to the nearest odd
    radius = int(round((math.sqrt(4.0 * sigma * sigma + 1.0) - 1.0) / 2.0))
    return 2 * radius + 1


def approx_gaussian_blur(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur approximated by three box passes of matched variance.

    Sigmas too small to need a 3-tap box return the input array unchanged.
    """
    size = _box_length(sigma)
    if sigma <= 0 or size <= 1:
        return arr
    out = arr
    for _ in range(3):
        out = ndimage.uniform_filter1d(out, size, axis=0, mode="nearest")
        out = ndimage.uniform_filter1d(out, size, axis=1, mode="nearest")
    return out


def _ssf_sigmas(img: Image, sigma_base: float | None,
                sigma_weight: float | None) -> tuple[float, float]:
    side = min(img.width, img.height)
    if sigma_base is None:
        sigma_base = side / 32.0
    if sigma_weight is None:
        sigma_weight = side / 8.0
    return sigma_base, sigma_weight


def _ssf_blend(planes: Sequence[Image], weights: WeightMaps,
               sigma_base: float, sigma_weight: float) -> np.ndarray:
    """Two-band blend: sharp weights steer detail, blurred weights the base.

    The weight masks sum to 1 before blurring, and blurring preserves that
    sum, so identical inputs pass through unchanged.
    """
    out: np.ndarray | None = None
    for img, wmap in zip(planes, weights.maps):
        base = approx_gaussian_blur(img.data, sigma_base)
        detail = img.data - base
        mask = approx_gaussian_blur(wmap.data, sigma_weight)
        w = wmap.data
        if img.data.ndim == 3:
            w = w[..., None]
            mask = mask[..., None]
        term = w * detail + mask * base
        out = term if out is None else out + term
    return out


_RGB_KINDS = frozenset((WeightKind.CONTRAST, WeightKind.SATURATION,
                        WeightKind.EXPOSURE))
_YUV_KINDS = frozenset((WeightKind.CONTRAST, WeightKind.EXPOSURE))


def fuse_mertens(inputs: Sequence[Image], wcfg: WeightConfig,
                 depth: int | None = None) -> Image:
    """Multi-scale blend of RGB frames steered by their quality weights."""
    imgs = _check_inputs(inputs, wcfg, _RGB_KINDS, "mertens")
    weights = _combined_weight_maps(imgs, wcfg)
    if depth is None:
        depth = default_depth(imgs[0].width, imgs[0].height)
    fused = _pyramid_blend(imgs, weights, depth)
    return Image(np.clip(fused, 0.0, 1.0), ColorSpace.RGB)


def _split_yuv(imgs: Sequence[Image]) -> tuple[list[Image], np.ndarray,
                                               np.ndarray]:
    """Y planes plus the per-pixel max-chroma (U, V) selection.

    Chroma strength is |U - 0.5| + |V - 0.5| and the pair is taken jointly
    from one frame; independent per-channel maxima would shift hue. The
    lowest frame index wins ties (strict > keeps the earlier frame). The
    selection runs frame by frame so no more than one full YUV copy is ever
    alive; that keeps the YUV methods' footprint below the RGB ones.
    """
    planes: list[Image] = []
    best_u: np.ndarray | None = None
    best_v: np.ndarray | None = None
    best_mag: np.ndarray | None = None
    for img in imgs:
        yuv = rgb_to_yuv(img).data
        # plane slices are strided views; Image copies them contiguous,
        # releasing the 3-channel parent
        planes.append(Image(yuv[..., 0], ColorSpace.GRAY))
        u = np.ascontiguousarray(yuv[..., 1])
        v = np.ascontiguousarray(yuv[..., 2])
        magnitude = np.abs(u - 0.5) + np.abs(v - 0.5)
        if best_mag is None:
            best_u, best_v, best_mag = u, v, magnitude
        else:
            better = magnitude > best_mag
            best_u = np.where(better, u, best_u)
            best_v = np.where(better, v, best_v)
            best_mag = np.where(better, magnitude, best_mag)
    return planes, best_u, best_v


def fuse_fast_yuv(inputs: Sequence[Image], wcfg: WeightConfig,
                  depth: int | None = None) -> Image:
    """Pyramid blend on the Y plane only; chroma by per-pixel max reduction."""
    imgs = _check_inputs(inputs, wcfg, _YUV_KINDS, "fast-yuv")
    planes, u, v = _split_yuv(imgs)
    weights = _combined_weight_maps(planes, wcfg)
    if depth is None:
        depth = default_depth(imgs[0].width, imgs[0].height)
    y = _pyramid_blend(planes, weights, depth)
    del planes, weights
    return yuv_to_rgb(Image(np.stack([y, u, v], axis=-1), ColorSpace.YUV))


def fuse_ssf_rgb(inputs: Sequence[Image], wcfg: WeightConfig,
                 sigma_base: float | None = None,
                 sigma_weight: float | None = None) -> Image:
    """Single-scale two-band blend of RGB frames."""
    imgs = _check_inputs(inputs, wcfg, _RGB_KINDS, "ssf-rgb")
    weights = _combined_weight_maps(imgs, wcfg)
    sigma_base, sigma_weight = _ssf_sigmas(imgs[0], sigma_base, sigma_weight)
    fused = _ssf_blend(imgs, weights, sigma_base, sigma_weight)
    return Image(np.clip(fused, 0.0, 1.0), ColorSpace.RGB)


def fuse_ssf_yuv(inputs: Sequence[Image], wcfg: WeightConfig,
                 sigma_base: float | None = None,
                 sigma_weight: float | None = None) -> Image:
    """Single-scale blend on the Y plane; chroma by per-pixel max reduction."""
    imgs = _check_inputs(inputs, wcfg, _YUV_KINDS, "ssf-yuv")
    planes, u, v = _split_yuv(imgs)
    weights = _combined_weight_maps(planes, wcfg)
    sigma_base, sigma_weight = _ssf_sigmas(imgs[0], sigma_base, sigma_weight)
    y = _ssf_blend(planes, weights, sigma_base, sigma_weight)
    del planes, weights
    return yuv_to_rgb(Image(np.stack([y, u, v], axis=-1), ColorSpace.YUV))


def fuse(seq: FrameSequence, cfg: FusionConfig) -> Image:
    """Run one full fusion: frame selection, optional stacking, the method."""
    try:
        inputs = prepare_inputs(seq, cfg)
    except (InvalidInputError, ConfigurationError) as exc:
        raise type(exc)(f"input selection: {exc}") from exc
    try:
        if cfg.method is FusionMethod.MERTENS:
            return fuse_mertens(inputs, cfg.weights, cfg.pyramid_depth)
        if cfg.method is FusionMethod.FAST_YUV:
            return fuse_fast_yuv(inputs, cfg.weights, cfg.pyramid_depth)
        if cfg.method is FusionMethod.SSF_RGB:
            return fuse_ssf_rgb(inputs, cfg.weights,
                                cfg.ssf_sigma_base, cfg.ssf_sigma_weight)
        return fuse_ssf_yuv(inputs, cfg.weights,
                            cfg.ssf_sigma_base, cfg.ssf_sigma_weight)
    except (InvalidInputError, ConfigurationError) as exc:
        raise type(exc)(f"{cfg.method.value}: {exc}") from exc
