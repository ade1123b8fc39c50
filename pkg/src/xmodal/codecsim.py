"""Blockwise-DCT transform-coding simulators and declarative degradation chains.

Two quantizers are modeled on top of a shared orthonormal 8x8 DCT: a
JPEG-style integer-table quantizer and a video-codec-style uniform deadzone
quantizer. ChainSpec composes them with the pixel primitives into a
blur -> resize -> codec -> color pipeline.

The simulators are approximations: no entropy coding, no chroma
subsampling, no inter-frame prediction. HEIF/WebP-style compression is
represented by deadzone-quantizer presets, not real encoders.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .core import ImageBuffer
from .errors import (
    EmptyChainDrawnError,
    InvalidRangeError,
    QualityOutOfRangeError,
    UnknownStepError,
)
from .pixelops import (
    Boundary,
    ColorRange,
    gaussian_blur,
    motion_blur,
    quantize_8bit,
    rgb_to_ycbcr,
    round_half_away,
    shorter_side_resize,
    to_luma,
    ycbcr_to_rgb,
)

# --- 8x8 orthonormal DCT-II ---------------------------------------------------

BLOCK = 8


def _dct_matrix() -> np.ndarray:
    n = np.arange(BLOCK)
    basis = np.cos(np.pi * (2.0 * n[None, :] + 1.0) * n[:, None] / (2.0 * BLOCK))
    scale = np.full(BLOCK, math.sqrt(2.0 / BLOCK))
    scale[0] = math.sqrt(1.0 / BLOCK)
    return basis * scale[:, None]


_DCT = _dct_matrix()


def dct8x8_forward(pixels: np.ndarray, centered: bool = False) -> np.ndarray:
    """Orthonormal 2D DCT-II of one 8x8 block.

    With ``centered`` the block is shifted by -0.5 first (the [0,1]-domain
    analog of the -128 shift at 8-bit scale).
    """
    block = np.asarray(pixels, dtype=np.float64)
    if block.shape != (BLOCK, BLOCK):
        raise ValueError(f"expected an 8x8 block, got shape {block.shape}")
    if centered:
        block = block - 0.5
    return _DCT @ block @ _DCT.T


def dct8x8_inverse(coeffs: np.ndarray, centered: bool = False) -> np.ndarray:
    """Exact inverse of dct8x8_forward (round trip error <= 1e-10)."""
    block = np.asarray(coeffs, dtype=np.float64)
    if block.shape != (BLOCK, BLOCK):
        raise ValueError(f"expected an 8x8 block, got shape {block.shape}")
    out = _DCT.T @ block @ _DCT
    if centered:
        out = out + 0.5
    return out


def _blocks_forward(plane: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
    """Edge-pad a 2D plane to a multiple of 8 and DCT every block.

    Returns (coeffs with shape (nby, nbx, 8, 8), original (h, w)).
    """
    h, w = plane.shape
    pad_h = (-h) % BLOCK
    pad_w = (-w) % BLOCK
    if pad_h or pad_w:
        plane = np.pad(plane, ((0, pad_h), (0, pad_w)), mode="edge")
    ph, pw = plane.shape
    tiles = plane.reshape(ph // BLOCK, BLOCK, pw // BLOCK, BLOCK).transpose(0, 2, 1, 3)
    coeffs = np.einsum("ij,abjk,lk->abil", _DCT, tiles, _DCT, optimize=True)
    return coeffs, (h, w)


def _blocks_inverse(coeffs: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Inverse of _blocks_forward, cropping back to the original size."""
    tiles = np.einsum("ji,abjk,kl->abil", _DCT, coeffs, _DCT, optimize=True)
    nby, nbx = tiles.shape[:2]
    plane = tiles.transpose(0, 2, 1, 3).reshape(nby * BLOCK, nbx * BLOCK)
    h, w = size
    return plane[:h, :w]


# --- quantizers ---------------------------------------------------------------

# ITU-T T.81 Annex K example tables
JPEG_LUMA_BASE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

JPEG_CHROMA_BASE = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class QuantTable:
    """8x8 positive-integer quantization table, optionally tagged with its Q."""

    table: np.ndarray
    quality: int | None = None

    def __post_init__(self):
        tbl = np.ascontiguousarray(self.table, dtype=np.int64)
        if tbl.shape != (BLOCK, BLOCK):
            raise ValueError(f"table must be 8x8, got {tbl.shape}")
        if tbl.min() < 1 or tbl.max() > 255:
            raise ValueError("table entries must lie in [1, 255]")
        tbl.setflags(write=False)
        object.__setattr__(self, "table", tbl)


def quant_table_from_quality(quality: int, channel: str = "luma") -> QuantTable:
    """Scale the standard base table by the reference quality convention.

    scale = 5000/Q for Q < 50, else 200 - 2Q;
    entry = clamp(floor((base*scale + 50)/100), 1, 255).
    """
    if not 1 <= quality <= 100:
        raise QualityOutOfRangeError(f"quality must lie in [1, 100], got {quality}")
    if channel not in ("luma", "chroma"):
        raise ValueError(f"channel must be 'luma' or 'chroma', got {channel!r}")
    base = JPEG_LUMA_BASE if channel == "luma" else JPEG_CHROMA_BASE
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    scaled = (base * scale + 50) // 100
    return QuantTable(np.clip(scaled, 1, 255), quality=quality)


def quantize_coefficients(coeffs: np.ndarray, table: QuantTable) -> np.ndarray:
    """Divide by the table and round half-away-from-zero to integer indices."""
    return round_half_away(np.asarray(coeffs, dtype=np.float64) / table.table)


def dequantize_coefficients(indices: np.ndarray, table: QuantTable) -> np.ndarray:
    return np.asarray(indices, dtype=np.float64) * table.table


@dataclass(frozen=True)
class VideoQuantModel:
    """Uniform deadzone quantizer standing in for video-codec quantization.

    qstep is the step at 8-bit coefficient scale; deadzone is the fraction
    of qstep below which AC coefficients are zeroed outright.
    """

    qstep: float
    deadzone: float = 0.0

    def __post_init__(self):
        if not self.qstep > 0:
            raise ValueError(f"qstep must be > 0, got {self.qstep}")
        if not 0.0 <= self.deadzone < 1.0:
            raise ValueError(f"deadzone must lie in [0, 1), got {self.deadzone}")


def deadzone_quantize_block(coeffs: np.ndarray, model: VideoQuantModel) -> np.ndarray:
    """Reconstruction values of one coefficient block under the deadzone rule.

    DC gets a plain round; AC is zeroed inside deadzone*qstep, otherwise
    rounded to the nearest multiple of qstep.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    q = model.qstep
    rec = round_half_away(coeffs / q) * q
    ac_dead = np.abs(coeffs) < model.deadzone * q
    rec = np.where(ac_dead, 0.0, rec)
    # DC is exempt from the deadzone
    rec_dc = round_half_away(coeffs[..., 0, 0] / q) * q
    rec[..., 0, 0] = rec_dc
    return rec


# --- image-level simulators -----------------------------------------------------


LUMA_OFFSET = 128.0
CHROMA_OFFSET = 127.5  # chroma neutral is 0.5 in float, i.e. 127.5 at 8-bit scale


def _codec_channels(img: ImageBuffer) -> tuple[list[tuple[np.ndarray, float]], bool]:
    """Split into codec channels with their centering offsets.

    Color input goes through YCbCr; chroma is centered on its neutral so a
    neutral-gray image has exactly-zero chroma coefficients.
    """
    if img.channels == 3:
        ycbcr = rgb_to_ycbcr(img, ColorRange.FULL)
        return [
            (ycbcr.data[0], LUMA_OFFSET),
            (ycbcr.data[1], CHROMA_OFFSET),
            (ycbcr.data[2], CHROMA_OFFSET),
        ], True
    return [(img.data[0], LUMA_OFFSET)], False


def _reassemble(channels: list[np.ndarray], was_color: bool) -> ImageBuffer:
    if was_color:
        ycbcr = ImageBuffer(np.stack(channels))
        return ycbcr_to_rgb(ycbcr, ColorRange.FULL)
    return ImageBuffer(np.clip(np.stack(channels), 0.0, 1.0))


def jpeg_simulate(
    img: ImageBuffer, quality: int, quantize_output: bool = True
) -> ImageBuffer:
    """JPEG-style transform coding round trip at the given quality.

    Full-range YCbCr, 4:4:4 (no chroma subsampling), blockwise centered
    DCT, integer-table quantization, inverse, back to RGB. With
    ``quantize_output`` the result is snapped to the 8-bit grid like a
    decoded file; pass False to keep the float reconstruction, which
    preserves exactly-zero AC coefficients for analysis.
    """
    channels, was_color = _codec_channels(img)
    tables = [quant_table_from_quality(quality, "luma")]
    if was_color:
        chroma = quant_table_from_quality(quality, "chroma")
        tables += [chroma, chroma]
    out_channels = []
    for (plane, offset), table in zip(channels, tables):
        coeffs, size = _blocks_forward(plane * 255.0 - offset)
        rec = dequantize_coefficients(quantize_coefficients(coeffs, table), table)
        out_channels.append((_blocks_inverse(rec, size) + offset) / 255.0)
    result = _reassemble(out_channels, was_color)
    if quantize_output:
        result = quantize_8bit(result)
    return result


def video_codec_simulate(img: ImageBuffer, model: VideoQuantModel) -> ImageBuffer:
    """Deadzone-quantize the 8x8 DCT of every channel; float reconstruction.

    Unlike jpeg_simulate this works directly on the stored channels and
    skips the final 8-bit snap, approximating a codec's internal
    reconstruction rather than a decoded file.
    """
    out_channels = []
    for plane in img.data:
        coeffs, size = _blocks_forward(plane * 255.0 - 128.0)
        rec = deadzone_quantize_block(coeffs, model)
        out_channels.append((_blocks_inverse(rec, size) + 128.0) / 255.0)
    return ImageBuffer(np.clip(np.stack(out_channels), 0.0, 1.0))


def tv_range_squeeze(img: ImageBuffer) -> ImageBuffer:
    """Round trip through 8-bit limited-range coding and back to full range.

    Stretching the 219 limited luma codes back over 256 slots leaves
    periodic empty histogram bins: the comb signature of TV-range video.
    """
    if img.channels == 3:
        limited = quantize_8bit(rgb_to_ycbcr(img, ColorRange.LIMITED))
        return quantize_8bit(ycbcr_to_rgb(limited, ColorRange.LIMITED))
    y = np.clip(img.data, 0.0, 1.0)
    y = round_half_away(((16.0 + 219.0 * y) / 255.0) * 255.0) / 255.0
    y = np.clip((255.0 * y - 16.0) / 219.0, 0.0, 1.0)
    y = round_half_away(y * 255.0) / 255.0
    return ImageBuffer(y)


# --- declarative degradation chains ----------------------------------------------


@dataclass(frozen=True)
class MotionBlurStep:
    length: int
    angle_deg: float = 0.0

    def __post_init__(self):
        if self.length < 1:
            raise InvalidRangeError(f"motion blur length must be >= 1, got {self.length}")

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return motion_blur(img, self.length, self.angle_deg)


@dataclass(frozen=True)
class GaussianBlurStep:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidRangeError(f"sigma must be >= 0, got {self.sigma}")

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return gaussian_blur(img, self.sigma)


@dataclass(frozen=True)
class ResizeStep:
    shorter_side: int

    def __post_init__(self):
        if self.shorter_side < 1:
            raise InvalidRangeError(
                f"shorter_side must be >= 1, got {self.shorter_side}"
            )

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return shorter_side_resize(img, self.shorter_side)


@dataclass(frozen=True)
class JpegSimStep:
    quality: int

    def __post_init__(self):
        if not 1 <= self.quality <= 100:
            raise InvalidRangeError(f"quality must lie in [1, 100], got {self.quality}")

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return jpeg_simulate(img, self.quality)


@dataclass(frozen=True)
class VideoCodecSimStep:
    qstep: float
    deadzone: float = 0.0

    def __post_init__(self):
        VideoQuantModel(self.qstep, self.deadzone)  # domain check

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return video_codec_simulate(img, VideoQuantModel(self.qstep, self.deadzone))


@dataclass(frozen=True)
class TvRangeSqueezeStep:
    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return tv_range_squeeze(img)


@dataclass(frozen=True)
class Quantize8BitStep:
    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        return quantize_8bit(img)


def _check_factor_range(name: str, rng_pair: tuple[float, float]) -> None:
    lo, hi = rng_pair
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi or lo < 0:
        raise InvalidRangeError(f"{name} range must satisfy 0 <= lo <= hi, got {rng_pair}")


@dataclass(frozen=True)
class ColorJitterStep:
    """Random brightness/contrast/saturation factors, each uniform in range."""

    brightness: tuple[float, float] = (1.0, 1.0)
    contrast: tuple[float, float] = (1.0, 1.0)
    saturation: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "brightness", tuple(self.brightness))
        object.__setattr__(self, "contrast", tuple(self.contrast))
        object.__setattr__(self, "saturation", tuple(self.saturation))
        _check_factor_range("brightness", self.brightness)
        _check_factor_range("contrast", self.contrast)
        _check_factor_range("saturation", self.saturation)

    def apply(self, img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
        b = float(rng.uniform(*self.brightness))
        c = float(rng.uniform(*self.contrast))
        s = float(rng.uniform(*self.saturation))
        data = img.data * b
        mean = float(to_luma(ImageBuffer(np.clip(data, 0.0, 1.0))).data.mean())
        data = data * c + (1.0 - c) * mean
        if img.channels == 3:
            luma = to_luma(ImageBuffer(np.clip(data, 0.0, 1.0))).data
            data = data * s + (1.0 - s) * luma
        return ImageBuffer(np.clip(data, 0.0, 1.0))


ChainStep = Union[
    MotionBlurStep,
    GaussianBlurStep,
    ResizeStep,
    JpegSimStep,
    VideoCodecSimStep,
    TvRangeSqueezeStep,
    ColorJitterStep,
    Quantize8BitStep,
]

_STEP_NAMES: dict[type, str] = {
    MotionBlurStep: "motion_blur",
    GaussianBlurStep: "gaussian_blur",
    ResizeStep: "resize",
    JpegSimStep: "jpeg",
    VideoCodecSimStep: "video_codec",
    TvRangeSqueezeStep: "tv_range_squeeze",
    ColorJitterStep: "color_jitter",
    Quantize8BitStep: "quantize_8bit",
}
_STEP_TYPES = {name: cls for cls, name in _STEP_NAMES.items()}


@dataclass(frozen=True)
class ChainSpec:
    """Ordered, validated list of degradation steps."""

    steps: tuple[ChainStep, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise EmptyChainDrawnError("chain must contain at least one step")

    def to_json(self) -> str:
        docs = []
        for step in self.steps:
            doc: dict = {"step": _STEP_NAMES[type(step)]}
            for key, value in vars(step).items():
                doc[key] = list(value) if isinstance(value, tuple) else value
            docs.append(doc)
        return json.dumps({"steps": docs}, indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "ChainSpec":
        doc = json.loads(text)
        if not isinstance(doc, dict) or "steps" not in doc:
            raise InvalidRangeError("chain document must be {'steps': [...]}")
        steps = []
        for entry in doc["steps"]:
            if not isinstance(entry, dict) or "step" not in entry:
                raise InvalidRangeError(f"bad chain step entry: {entry!r}")
            name = entry["step"]
            if name not in _STEP_TYPES:
                raise UnknownStepError(name)
            kwargs = {k: v for k, v in entry.items() if k != "step"}
            for key, value in kwargs.items():
                if isinstance(value, list):
                    kwargs[key] = tuple(value)
            try:
                steps.append(_STEP_TYPES[name](**kwargs))
            except TypeError as exc:
                raise InvalidRangeError(f"step {name!r}: {exc}") from None
        return cls(tuple(steps))

    @classmethod
    def load(cls, path: str | Path) -> "ChainSpec":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def apply_chain(
    img: ImageBuffer, chain: ChainSpec, rng: np.random.Generator
) -> ImageBuffer:
    """Apply the steps in order; randomized steps draw from rng."""
    out = img
    for step in chain.steps:
        out = step.apply(out, rng)
    return out


def derive_sample_seed(master_seed: int, sample_id: str) -> int:
    """Stable per-sample seed, so parallel corpus order cannot change outputs."""
    digest = hashlib.sha256(f"{master_seed}:{sample_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class ChainSamplerConfig:
    """Per-step inclusion probabilities and parameter ranges for random chains.

    Ranges are inclusive; integer parameters are drawn uniformly over the
    integer range, floats uniformly over the interval. HEIF/WebP-style
    compression is covered by the video_codec (deadzone quantizer) entry.
    """

    p_motion_blur: float = 0.5
    motion_blur_length: tuple[int, int] = (3, 9)
    motion_blur_angle: tuple[float, float] = (0.0, 180.0)
    p_gaussian_blur: float = 0.3
    gaussian_sigma: tuple[float, float] = (0.5, 2.0)
    p_resize: float = 0.5
    resize_target: tuple[int, int] = (128, 256)
    p_jpeg: float = 0.5
    jpeg_quality: tuple[int, int] = (30, 95)
    p_video_codec: float = 0.5
    video_qstep: tuple[float, float] = (4.0, 32.0)
    video_deadzone: tuple[float, float] = (0.0, 0.9)
    p_color_jitter: float = 0.5
    brightness: tuple[float, float] = (0.8, 1.2)
    contrast: tuple[float, float] = (0.8, 1.2)
    saturation: tuple[float, float] = (0.8, 1.2)
    allow_identity: bool = False

    def __post_init__(self):
        for name in (
            "p_motion_blur",
            "p_gaussian_blur",
            "p_resize",
            "p_jpeg",
            "p_video_codec",
            "p_color_jitter",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidRangeError(f"{name} must lie in [0, 1], got {p}")
        for name in (
            "motion_blur_length",
            "motion_blur_angle",
            "gaussian_sigma",
            "resize_target",
            "jpeg_quality",
            "video_qstep",
            "video_deadzone",
            "brightness",
            "contrast",
            "saturation",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidRangeError(f"{name} range {lo}..{hi} is empty")
        if self.motion_blur_length[0] < 1:
            raise InvalidRangeError("motion_blur_length must be >= 1")
        if self.resize_target[0] < 1:
            raise InvalidRangeError("resize_target must be >= 1")
        if not 1 <= self.jpeg_quality[0] <= self.jpeg_quality[1] <= 100:
            raise InvalidRangeError("jpeg_quality must lie within [1, 100]")
        if self.video_qstep[0] <= 0:
            raise InvalidRangeError("video_qstep must be > 0")
        if not 0.0 <= self.video_deadzone[0] <= self.video_deadzone[1] < 1.0:
            raise InvalidRangeError("video_deadzone must lie within [0, 1)")


def _draw_int(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _draw_float(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi)) if lo < hi else float(lo)


def sample_random_chain(
    config: ChainSamplerConfig, rng: np.random.Generator
) -> ChainSpec:
    """Draw a chain; step order is fixed as blur -> resize -> codec -> color."""
    steps: list[ChainStep] = []
    if rng.random() < config.p_motion_blur:
        steps.append(
            MotionBlurStep(
                length=_draw_int(rng, *config.motion_blur_length),
                angle_deg=_draw_float(rng, *config.motion_blur_angle),
            )
        )
    if rng.random() < config.p_gaussian_blur:
        steps.append(GaussianBlurStep(sigma=_draw_float(rng, *config.gaussian_sigma)))
    if rng.random() < config.p_resize:
        steps.append(ResizeStep(shorter_side=_draw_int(rng, *config.resize_target)))
    if rng.random() < config.p_jpeg:
        steps.append(JpegSimStep(quality=_draw_int(rng, *config.jpeg_quality)))
    if rng.random() < config.p_video_codec:
        steps.append(
            VideoCodecSimStep(
                qstep=_draw_float(rng, *config.video_qstep),
                deadzone=_draw_float(rng, *config.video_deadzone),
            )
        )
    if rng.random() < config.p_color_jitter:
        steps.append(
            ColorJitterStep(
                brightness=config.brightness,
                contrast=config.contrast,
                saturation=config.saturation,
            )
        )
    if not steps:
        if config.allow_identity:
            steps.append(MotionBlurStep(length=1))  # exact identity
        else:
            raise EmptyChainDrawnError(
                "random draw produced an empty chain (set allow_identity to permit)"
            )
    return ChainSpec(tuple(steps))
