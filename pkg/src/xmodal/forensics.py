"""Distribution-shift analyses: DCT AC histograms, RAPSD, luminance range,
and mean residual power spectra.

These are the measurement tools that expose what video pipelines do to
image statistics: sharper near-zero AC peaks, high-frequency decay, and
comb-patterned luminance histograms.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from .codecsim import BLOCK, ChainSpec, _blocks_forward, apply_chain, derive_sample_seed
from .core import ImageBuffer, Manifest, load_image
from .errors import (
    AllSamplesFailedError,
    EmptyInputError,
    ImageTooSmallError,
    WrongBinCountError,
    XmodalError,
)
from .pixelops import Boundary, Window, gaussian_blur, round_half_away, to_luma

ZERO_EPS = 1e-6  # |coefficient| below this counts as an exact post-quantization zero


@dataclass(frozen=True)
class Histogram:
    """Counts over strictly ascending bin edges; total == counts.sum()."""

    bin_edges: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        edges = np.ascontiguousarray(self.bin_edges, dtype=np.float64)
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.ndim != 1 or len(edges) != len(counts) + 1:
            raise ValueError("need n+1 edges for n counts")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly ascending")
        if counts.min(initial=0) < 0:
            raise ValueError("counts must be non-negative")
        if int(counts.sum()) != self.total:
            raise ValueError("total must equal the sum of counts")
        edges.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class RadialProfile:
    """Mean power per radial-frequency bin, radii normalized to (0, 0.5]."""

    radii: np.ndarray
    power: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        radii = np.ascontiguousarray(self.radii, dtype=np.float64)
        power = np.ascontiguousarray(self.power, dtype=np.float64)
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if not (len(radii) == len(power) == len(counts)):
            raise ValueError("radii, power, counts must have equal length")
        if np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be strictly ascending")
        if not np.all(np.isfinite(power)) or power.min(initial=0.0) < 0:
            raise ValueError("power must be finite and non-negative")
        for arr in (radii, power, counts):
            arr.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class SpectrumImage:
    """Log-scaled mean 2D power spectrum with DC shifted to the center bin."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise ValueError("values shape must be (height, width)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class DctAcResult:
    histogram: Histogram
    zero_fraction: float
    total_ac: int
    n_images: int


def _luma_plane(img: ImageBuffer) -> np.ndarray:
    return to_luma(img).data[0]


def dct_ac_histogram(
    images: Iterable[ImageBuffer],
    value_range: float = 64.0,
    nbins: int = 129,
    zero_eps: float = ZERO_EPS,
) -> DctAcResult:
    """Pool the 63 AC coefficients of every 8x8 luma block.

    Coefficients are at 8-bit scale (luma*255 - 128 before the DCT). Bins
    are symmetric around zero over [-value_range, value_range];
    zero_fraction counts |a| < zero_eps over all coefficients, in or out
    of the histogram range.
    """
    if value_range <= 0:
        raise ValueError("value_range must be positive")
    edges = np.linspace(-value_range, value_range, nbins + 1)
    counts = np.zeros(nbins, dtype=np.int64)
    total_ac = 0
    n_zero = 0
    n_images = 0
    ac_mask = np.ones((BLOCK, BLOCK), dtype=bool)
    ac_mask[0, 0] = False
    for img in images:
        if img.height < BLOCK or img.width < BLOCK:
            raise ImageTooSmallError(
                f"need at least {BLOCK}x{BLOCK} pixels, got {img.width}x{img.height}"
            )
        plane = _luma_plane(img) * 255.0 - 128.0
        h8 = (img.height // BLOCK) * BLOCK
        w8 = (img.width // BLOCK) * BLOCK
        coeffs, _ = _blocks_forward(plane[:h8, :w8])
        ac = coeffs[:, :, ac_mask].ravel()
        hist, _ = np.histogram(ac, bins=edges)
        counts += hist
        total_ac += ac.size
        n_zero += int(np.count_nonzero(np.abs(ac) < zero_eps))
        n_images += 1
    if n_images == 0:
        raise EmptyInputError("dct_ac_histogram needs at least one image")
    histogram = Histogram(edges, counts, int(counts.sum()))
    return DctAcResult(
        histogram=histogram,
        zero_fraction=n_zero / total_ac,
        total_ac=total_ac,
        n_images=n_images,
    )


def rapsd(
    img: ImageBuffer, window: Window = Window.NONE, nbins: int = 32
) -> RadialProfile:
    """Radially averaged power spectral density of the luma plane.

    Mean-subtracted, optionally Hann-windowed; power = |FFT|^2 / (W*H),
    binned by normalized radial frequency into nbins equal-width bins over
    (0, 0.5]. DC and corner frequencies beyond 0.5 are excluded.
    """
    if img.height < 16 or img.width < 16:
        raise ImageTooSmallError(
            f"rapsd needs at least 16x16 pixels, got {img.width}x{img.height}"
        )
    if nbins < 1:
        raise ValueError("nbins must be >= 1")
    plane = _luma_plane(img)
    plane = plane - plane.mean()
    if window is Window.HANN:
        plane = plane * np.outer(np.hanning(img.height), np.hanning(img.width))
    spectrum = np.fft.fft2(plane)
    power = (spectrum.real**2 + spectrum.imag**2) / (img.width * img.height)
    fy = np.fft.fftfreq(img.height)[:, None]
    fx = np.fft.fftfreq(img.width)[None, :]
    radius = np.sqrt(fx * fx + fy * fy)
    mask = (radius > 0.0) & (radius <= 0.5)
    bin_width = 0.5 / nbins
    idx = np.ceil(radius[mask] / bin_width).astype(int) - 1
    idx = np.clip(idx, 0, nbins - 1)
    sums = np.bincount(idx, weights=power[mask], minlength=nbins)
    counts = np.bincount(idx, minlength=nbins).astype(np.int64)
    mean_power = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    radii = (np.arange(nbins) + 0.5) * bin_width
    return RadialProfile(radii=radii, power=mean_power, counts=counts)


@dataclass(frozen=True)
class DatasetAnalysis:
    """Aggregate result plus the bookkeeping of skipped samples."""

    n_used: int
    n_failed: int
    failed_ids: tuple[str, ...]


@dataclass(frozen=True)
class DatasetRapsd(DatasetAnalysis):
    profile: RadialProfile


@dataclass(frozen=True)
class DatasetSpectrum(DatasetAnalysis):
    spectrum: SpectrumImage


def _iter_manifest_images(
    manifest: Manifest,
    limit: Optional[int],
    loader: Callable[[str], ImageBuffer],
):
    records = manifest.records[:limit] if limit else manifest.records
    for rec in records:
        yield rec, loader(rec.path)


def dataset_mean_rapsd(
    manifest: Manifest,
    preprocess: Optional[ChainSpec | Callable[[ImageBuffer, str], ImageBuffer]] = None,
    nbins: int = 32,
    window: Window = Window.NONE,
    limit: Optional[int] = None,
    loader: Callable[[str], ImageBuffer] = load_image,
    seed: int = 0,
) -> DatasetRapsd:
    """Arithmetic mean of per-image RAPSD profiles over the manifest.

    Samples that fail to load or analyze are counted and skipped; only a
    fully failing manifest raises. ``preprocess`` is either a degradation
    ChainSpec (applied with a per-sample generator derived from ``seed`` and
    the sample id) or a callable receiving (image, id).
    """
    if isinstance(preprocess, ChainSpec):
        chain = preprocess

        def preprocess(img: ImageBuffer, sample_id: str) -> ImageBuffer:
            rng = np.random.default_rng(derive_sample_seed(seed, sample_id))
            return apply_chain(img, chain, rng)

    power_sum: Optional[np.ndarray] = None
    count_sum: Optional[np.ndarray] = None
    radii: Optional[np.ndarray] = None
    n_used = 0
    failed: list[str] = []
    records = manifest.records[: limit if limit else None]
    for rec in records:
        try:
            img = loader(rec.path)
            if preprocess is not None:
                img = preprocess(img, rec.id)
            profile = rapsd(img, window=window, nbins=nbins)
        except (XmodalError, OSError):
            failed.append(rec.id)
            continue
        if power_sum is None:
            power_sum = profile.power.copy()
            count_sum = profile.counts.copy()
            radii = profile.radii.copy()
        else:
            power_sum += profile.power
            count_sum += profile.counts
        n_used += 1
    if n_used == 0 or power_sum is None:
        raise AllSamplesFailedError(
            f"all {len(failed)} samples failed RAPSD analysis"
        )
    profile = RadialProfile(radii=radii, power=power_sum / n_used, counts=count_sum)
    return DatasetRapsd(
        n_used=n_used, n_failed=len(failed), failed_ids=tuple(failed), profile=profile
    )


def luminance_histogram(images: Iterable[ImageBuffer]) -> Histogram:
    """Pool 8-bit-quantized luma codes of all pixels into 256 bins."""
    counts = np.zeros(256, dtype=np.int64)
    n_images = 0
    for img in images:
        luma = np.clip(_luma_plane(img), 0.0, 1.0)
        codes = round_half_away(luma * 255.0).astype(np.int64)
        counts += np.bincount(codes.ravel(), minlength=256)
        n_images += 1
    if n_images == 0:
        raise EmptyInputError("luminance_histogram needs at least one image")
    edges = (np.arange(257) - 0.5) / 255.0
    return Histogram(edges, counts, int(counts.sum()))


class TvRangeVerdict(Enum):
    FULL = "full"
    LIMITED = "limited"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class TvRangeEvidence:
    tail_mass: float
    comb_score: float


TAIL_FULL_THRESHOLD = 0.01
COMB_THRESHOLD = 0.02


def detect_tv_range(hist: Histogram) -> tuple[TvRangeVerdict, TvRangeEvidence]:
    """Classify a 256-bin luma histogram as full range, limited, or unclear.

    tail_mass is the mass at codes [0,15] and [236,255]. comb_score is the
    fraction of empty bins inside the central mass window (5th..95th mass
    percentile codes, clipped to [16,235]): rescaling limited-range codes
    over 256 slots leaves periodic gaps across the whole support, whereas
    natural sparse histograms only thin out at the support edges. A comb
    outranks tail evidence; content that never exercises the tails and
    shows no comb stays indeterminate (e.g. a constant image).
    """
    if len(hist.counts) != 256:
        raise WrongBinCountError(f"expected 256 bins, got {len(hist.counts)}")
    counts = hist.counts
    total = int(counts.sum())
    if total == 0:
        raise EmptyInputError("histogram is empty")
    tail_mass = float((counts[:16].sum() + counts[236:].sum()) / total)
    cumulative = np.cumsum(counts)
    lo = int(np.searchsorted(cumulative, 0.05 * total))
    hi = int(np.searchsorted(cumulative, 0.95 * total))
    lo = max(lo, 16)
    hi = min(hi, 235)
    if hi > lo:
        window = counts[lo : hi + 1]
        comb_score = float(np.count_nonzero(window == 0) / len(window))
    else:
        comb_score = 0.0
    evidence = TvRangeEvidence(tail_mass=tail_mass, comb_score=comb_score)
    if comb_score > COMB_THRESHOLD:
        return TvRangeVerdict.LIMITED, evidence
    if tail_mass > TAIL_FULL_THRESHOLD:
        return TvRangeVerdict.FULL, evidence
    return TvRangeVerdict.INDETERMINATE, evidence


def _fit_to_square(plane: np.ndarray, size: int) -> np.ndarray:
    """Center-crop to size, edge-padding first if the plane is smaller."""
    h, w = plane.shape
    pad_h = max(size - h, 0)
    pad_w = max(size - w, 0)
    if pad_h or pad_w:
        plane = np.pad(
            plane,
            (
                (pad_h // 2, pad_h - pad_h // 2),
                (pad_w // 2, pad_w - pad_w // 2),
            ),
            mode="edge",
        )
        h, w = plane.shape
    y0 = (h - size) // 2
    x0 = (w - size) // 2
    return plane[y0 : y0 + size, x0 : x0 + size]


def residual_spectrum(
    manifest: Manifest,
    denoise_sigma: float = 1.0,
    size: int = 64,
    limit: Optional[int] = None,
    loader: Callable[[str], ImageBuffer] = load_image,
) -> DatasetSpectrum:
    """Mean 2D power spectrum of high-pass residuals, log-scaled, DC centered.

    The residual is image minus its Gaussian blur (a denoiser stand-in);
    the per-image |FFT|^2 spectra are averaged and reported as
    log10(1 + mean_power) with the DC bin shifted to the center.
    """
    if denoise_sigma <= 0:
        raise ValueError("denoise_sigma must be > 0")
    if size < 8:
        raise ValueError("size must be >= 8")
    acc = np.zeros((size, size))
    n_used = 0
    failed: list[str] = []
    records = manifest.records[: limit if limit else None]
    for rec in records:
        try:
            img = loader(rec.path)
            luma = _fit_to_square(_luma_plane(img), size)
            buf = ImageBuffer(luma[None, :, :])
            blurred = gaussian_blur(buf, denoise_sigma, Boundary.REFLECT)
            residual = luma - blurred.data[0]
            spectrum = np.fft.fft2(residual)
            acc += spectrum.real**2 + spectrum.imag**2
        except (XmodalError, OSError):
            failed.append(rec.id)
            continue
        n_used += 1
    if n_used == 0:
        raise AllSamplesFailedError(
            f"all {len(failed)} samples failed spectrum analysis"
        )
    mean_power = acc / n_used
    values = np.fft.fftshift(np.log10(1.0 + mean_power))
    return DatasetSpectrum(
        n_used=n_used,
        n_failed=len(failed),
        failed_ids=tuple(failed),
        spectrum=SpectrumImage(width=size, height=size, values=values),
    )
