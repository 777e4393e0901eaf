"""Image containers, color conversion, file I/O, and synthetic exposure brackets."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
from PIL import Image as PilImage
from PIL import UnidentifiedImageError

from .errors import (
    ConfigurationError,
    ImageIOError,
    InvalidInputError,
    UnsupportedFormatError,
)


class ColorSpace(Enum):
    RGB = "rgb"
    YUV = "yuv"
    GRAY = "gray"


# full-range BT.601: Y from RGB, chroma differences recentered on 0.5
_KR, _KG, _KB = 0.299, 0.587, 0.114
_U_SCALE = 1.772  # 2 * (1 - Kb)
_V_SCALE = 1.402  # 2 * (1 - Kr)


@dataclass(frozen=True, eq=False)
class Image:
    """Planar float64 raster, (H, W) grayscale or (H, W, 3) color.

    Samples are nominally in [0, 1], but only finiteness is enforced:
    band-pass pyramid levels and radiance maps legitimately leave that
    range. The constructor adopts the buffer and marks it read-only, so
    callers must not mutate the array they passed in afterwards.
    """

    data: np.ndarray
    color_space: ColorSpace | None = None  # inferred from shape when omitted

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim == 2:
            channels = 1
        elif arr.ndim == 3 and arr.shape[2] == 3:
            channels = 3
        else:
            raise InvalidInputError(
                f"expected (H, W) or (H, W, 3) samples, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"image has no pixels: shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidInputError("image samples must all be finite")
        space = self.color_space
        if space is None:
            space = ColorSpace.GRAY if channels == 1 else ColorSpace.RGB
        if channels == 1 and space is not ColorSpace.GRAY:
            raise InvalidInputError("single-channel images must be GRAY")
        if channels == 3 and space is ColorSpace.GRAY:
            raise InvalidInputError("GRAY images must have a single channel")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "color_space", space)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3


@dataclass(frozen=True, eq=False)
class Frame:
    """An image tagged with its integer exposure-value label."""

    image: Image
    ev: int


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Frames of identical geometry ordered by strictly ascending EV."""

    frames: tuple[Frame, ...]

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if not frames:
            raise InvalidInputError("frame sequence is empty")
        first = frames[0].image
        for frame in frames[1:]:
            img = frame.image
            same = (img.width == first.width and img.height == first.height
                    and img.channels == first.channels
                    and img.color_space is first.color_space)
            if not same:
                raise InvalidInputError(
                    "all frames must share dimensions and color space")
        evs = [f.ev for f in frames]
        if any(b <= a for a, b in zip(evs, evs[1:])):
            raise InvalidInputError(f"EV labels must be strictly ascending, got {evs}")
        object.__setattr__(self, "frames", frames)

    @property
    def evs(self) -> tuple[int, ...]:
        return tuple(f.ev for f in self.frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)


@dataclass(frozen=True, eq=False)
class SceneSpec:
    """A linear radiance map plus the exposure model that renders it.

    `radiance` may exceed 1: that headroom is what short exposures recover
    and long exposures clip. Rendering at EV e is
    clamp((radiance * ev_to_gain[e]) ** (1 / gamma) + noise).
    """

    radiance: Image
    ev_to_gain: Mapping[int, float]
    gamma: float = 2.2
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.radiance.color_space is ColorSpace.YUV:
            raise InvalidInputError("radiance must be GRAY or RGB")
        if (self.radiance.data < 0).any():
            raise InvalidInputError("radiance must be non-negative")
        gains = dict(self.ev_to_gain)
        if any(g <= 0 for g in gains.values()):
            raise InvalidInputError("every exposure gain must be positive")
        if self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise_sigma must be non-negative")
        object.__setattr__(self, "ev_to_gain", gains)


def default_ev_gains(evs: Iterable[int]) -> dict[int, float]:
    """Map EV labels to linear gains at one stop per 8 EV units."""
    return {ev: 2.0 ** (ev / 8.0) for ev in evs}


def rgb_to_yuv(img: Image) -> Image:
    """Full-range BT.601 RGB -> YUV with chroma recentered on 0.5."""
    if img.channels != 3 or img.color_space is not ColorSpace.RGB:
        raise InvalidInputError("rgb_to_yuv needs a 3-channel RGB image")
    r = img.data[..., 0]
    g = img.data[..., 1]
    b = img.data[..., 2]
    y = _KR * r + _KG * g + _KB * b
    u = (b - y) / _U_SCALE + 0.5
    v = (r - y) / _V_SCALE + 0.5
    out = np.clip(np.stack([y, u, v], axis=-1), 0.0, 1.0)
    return Image(out, ColorSpace.YUV)


def yuv_to_rgb(img: Image) -> Image:
    """Algebraic inverse of rgb_to_yuv; the result is clamped to [0, 1]."""
    if img.channels != 3 or img.color_space is not ColorSpace.YUV:
        raise InvalidInputError("yuv_to_rgb needs a 3-channel YUV image")
    y = img.data[..., 0]
    u = img.data[..., 1]
    v = img.data[..., 2]
    b = y + (u - 0.5) * _U_SCALE
    r = y + (v - 0.5) * _V_SCALE
    g = (y - _KR * r - _KB * b) / _KG
    out = np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)
    return Image(out, ColorSpace.RGB)


def luma(img: Image) -> Image:
    """BT.601 luma plane; for YUV input this is simply the Y channel."""
    if img.color_space is ColorSpace.GRAY:
        return img
    if img.color_space is ColorSpace.YUV:
        return Image(img.data[..., 0], ColorSpace.GRAY)
    d = img.data
    return Image(_KR * d[..., 0] + _KG * d[..., 1] + _KB * d[..., 2],
                 ColorSpace.GRAY)


_PIL_MODES = {"L": ColorSpace.GRAY, "RGB": ColorSpace.RGB}
_FORMATS = {"PNG", "PPM"}  # Pillow reports binary PGM/PPM both as "PPM"


def load_image(path) -> Image:
    """Read an 8-bit grayscale or RGB PNG / binary PPM / PGM file."""
    path = Path(path)
    try:
        with PilImage.open(path) as im:
            if im.format not in _FORMATS:
                raise UnsupportedFormatError(
                    f"{path}: unsupported format {im.format!r} "
                    "(need 8-bit PNG, PPM or PGM)")
            if im.mode not in _PIL_MODES:
                raise UnsupportedFormatError(
                    f"{path}: unsupported pixel mode {im.mode!r} "
                    "(need 8-bit grayscale or RGB)")
            arr = np.asarray(im, dtype=np.float64) / 255.0
            space = _PIL_MODES[im.mode]
    except FileNotFoundError as exc:
        raise ImageIOError(f"cannot read {path}: file not found") from exc
    except UnidentifiedImageError as exc:
        raise ImageIOError(f"cannot decode {path}: {exc}") from exc
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    return Image(arr, space)


def save_image(img: Image, path) -> None:
    """Write clamped 8-bit codes, round(v * 255), as PNG / PPM / PGM."""
    path = Path(path)
    if img.color_space is ColorSpace.YUV:
        raise InvalidInputError("convert YUV to RGB before saving")
    suffix = path.suffix.lower()
    if suffix == ".png":
        fmt = "PNG"
    elif suffix in (".ppm", ".pgm"):
        fmt = "PPM"
    else:
        raise UnsupportedFormatError(
            f"{path}: unsupported extension {suffix!r} (use .png, .ppm or .pgm)")
    codes = np.rint(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    mode = "L" if img.channels == 1 else "RGB"
    try:
        PilImage.fromarray(codes, mode=mode).save(path, format=fmt)
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


_EV_FILE = re.compile(r"^ev_(-?\d+)\.png$")


def load_scene(scene_dir, require_negative: bool = True) -> FrameSequence:
    """Load the ev_<label>.png frames of a scene directory, ordered by EV."""
    root = Path(scene_dir)
    if not root.is_dir():
        raise ImageIOError(f"scene directory not found: {root}")
    frames = []
    for entry in sorted(root.iterdir()):
        match = _EV_FILE.match(entry.name)
        if match:
            frames.append(Frame(load_image(entry), int(match.group(1))))
    if not frames:
        raise ImageIOError(f"no ev_<label>.png frames in {root}")
    frames.sort(key=lambda f: f.ev)
    if require_negative and all(f.ev >= 0 for f in frames):
        raise ImageIOError(
            f"missing negative-EV frame (e.g. ev_-24.png) in {root}")
    return FrameSequence(tuple(frames))


def load_ground_truth(scene_dir) -> Image:
    """Load the gt.png reference of a scene directory."""
    return load_image(Path(scene_dir) / "gt.png")


def synth_bracket(spec: SceneSpec, evs: Iterable[int], seed: int = 0) -> FrameSequence:
    """Render one frame per EV from a scene spec, deterministically per seed."""
    evs = list(evs)
    if not evs:
        raise InvalidInputError("EV list is empty")
    if any(b <= a for a, b in zip(evs, evs[1:])):
        raise InvalidInputError(f"EV list must be strictly ascending, got {evs}")
    missing = [ev for ev in evs if ev not in spec.ev_to_gain]
    if missing:
        raise ConfigurationError(f"no gain configured for EV {missing}")
    rng = np.random.default_rng(seed)
    frames = []
    for ev in evs:
        exposed = np.power(spec.radiance.data * spec.ev_to_gain[ev], 1.0 / spec.gamma)
        if spec.noise_sigma > 0:
            exposed = exposed + rng.normal(0.0, spec.noise_sigma, size=exposed.shape)
        frame = Image(np.clip(exposed, 0.0, 1.0), spec.radiance.color_space)
        frames.append(Frame(frame, ev))
    return FrameSequence(tuple(frames))


def ground_truth(spec: SceneSpec) -> Image:
    """Noise-free unit-gain rendering of the radiance: the reference output."""
    out = np.clip(np.power(spec.radiance.data, 1.0 / spec.gamma), 0.0, 1.0)
    return Image(out, spec.radiance.color_space)


def random_radiance(width: int, height: int, rng: np.random.Generator,
                    peak: float = 6.0) -> Image:
    """Random RGB radiance: mid-gray gradient, dark patches, bright blobs.

    Tuned so the unit-gain rendering is roughly well exposed; compact blob
    amplitudes run up to `peak`, well past 1, so only short exposures keep
    highlight detail that longer exposures clip away.
    """
    if width < 1 or height < 1:
        raise InvalidInputError("radiance dimensions must be positive")
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy /= max(height - 1, 1)
    xx /= max(width - 1, 1)
    tilt = rng.uniform(-1.0, 1.0, size=2)
    base = (0.2 + 0.08 * (tilt[0] * (xx - 0.5) + tilt[1] * (yy - 0.5))
            + rng.uniform(-0.03, 0.03))
    img = base[..., None] * rng.uniform(0.75, 1.0, size=3)
    for _ in range(int(rng.integers(1, 4))):  # shadow patches
        cx, cy = rng.uniform(0.0, 1.0, size=2)
        radius = rng.uniform(0.05, 0.15)
        dip = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * radius * radius))
        img = img * (1.0 - rng.uniform(0.4, 0.7) * dip[..., None])
    for _ in range(int(rng.integers(2, 6))):  # compact blown highlights
        cx, cy = rng.uniform(0.0, 1.0, size=2)
        radius = rng.uniform(0.012, 0.04)
        amp = rng.uniform(0.4, peak)
        tint = rng.uniform(0.4, 1.0, size=3)
        tint /= tint.max()
        bump = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * radius * radius))
        img = img + amp * bump[..., None] * tint
    # 4-pixel blocks of multiplicative noise give the contrast weight edges to find
    th, tw = (height + 3) // 4, (width + 3) // 4
    tex = rng.normal(0.0, 1.0, size=(th, tw))
    tex = np.repeat(np.repeat(tex, 4, axis=0), 4, axis=1)[:height, :width]
    img = img * (1.0 + 0.06 * tex[..., None])
    return Image(np.clip(img, 1e-4, None), ColorSpace.RGB)


def random_scene(width: int, height: int, evs: Iterable[int], seed: int = 0,
                 gamma: float = 2.2, noise_sigma: float = 0.002) -> SceneSpec:
    """A seeded random SceneSpec covering the given EV labels."""
    rng = np.random.default_rng(seed)
    radiance = random_radiance(width, height, rng)
    return SceneSpec(radiance, default_ev_gains(evs), gamma, noise_sigma)
