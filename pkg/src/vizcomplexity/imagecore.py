"""Image decoding, color-space conversion, and shared low-level structures.

Everything here is a pure function on immutable arrays; callers may
evaluate images in parallel. Grayscale uses ITU-R BT.601 weights, Lab
conversion assumes sRGB with a D65 white point.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import gaussian_filter


class UnsupportedFormat(ValueError):
    """Byte stream is not a raster format we decode (PNG, JPEG)."""


class CorruptImage(ValueError):
    """Byte stream looks like a supported format but cannot be decoded."""


class TooManyLevels(ValueError):
    """Pyramid depth exceeds what the image dimensions allow."""


_SUPPORTED_FORMATS = {"PNG", "JPEG"}

# BT.601 luma weights
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class ImageRaster:
    """Decoded 8-bit RGB image, row-major (height, width, 3)."""

    pixels: np.ndarray
    id: str = ""

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError("pixels must be a (h, w, 3) uint8 array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        px.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class GrayRaster:
    """Single-channel luminance image, values in [0, 255]."""

    intensity: np.ndarray

    def __post_init__(self):
        if self.intensity.ndim != 2:
            raise ValueError("intensity must be a 2-d array")
        self.intensity.setflags(write=False)

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]


@dataclass(frozen=True)
class LabRaster:
    """CIELAB image: L in [0, 100], a/b signed chroma axes."""

    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for ch in (self.L, self.a, self.b):
            ch.setflags(write=False)


@dataclass
class Histogram:
    """Count histogram with probability view."""

    bins: np.ndarray
    binning: str = "unit"

    @property
    def total(self) -> int:
        return int(self.bins.sum())

    @property
    def probabilities(self) -> np.ndarray:
        total = self.bins.sum()
        if total == 0:
            return np.zeros_like(self.bins, dtype=float)
        return self.bins / total

    def entropy_bits(self) -> float:
        """Shannon entropy of the bin distribution, with 0*log0 = 0."""
        p = self.probabilities
        p = p[p > 0]
        if p.size == 0:
            return 0.0
        return float(-np.sum(p * np.log2(p)))


def decode_image(data: bytes, image_id: str = "") -> ImageRaster:
    """Decode PNG or JPEG bytes; alpha is composited over white."""
    looks_supported = data.startswith(b"\x89PNG\r\n\x1a\n") or data.startswith(
        b"\xff\xd8\xff"
    )
    try:
        img = Image.open(io.BytesIO(data))
        fmt = img.format
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        if looks_supported:
            raise CorruptImage("truncated or corrupt image data") from exc
        raise UnsupportedFormat("not a recognized raster format") from exc
    if fmt not in _SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"unsupported format: {fmt}")
    try:
        if img.mode in ("RGBA", "LA", "PA") or (
            img.mode == "P" and "transparency" in img.info
        ):
            img = img.convert("RGBA")
            background = Image.new("RGBA", img.size, (255, 255, 255, 255))
            img = Image.alpha_composite(background, img)
        img = img.convert("RGB")
        pixels = np.asarray(img, dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptImage("truncated or corrupt image data") from exc
    return ImageRaster(pixels=pixels, id=image_id)


def to_gray(img: ImageRaster) -> GrayRaster:
    """BT.601 luminance, rounded to the nearest integer level."""
    lum = np.rint(img.pixels.astype(np.float64) @ _LUMA_WEIGHTS)
    return GrayRaster(intensity=lum)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1 / 2.4) - 0.055)

# sRGB -> XYZ (D65) matrix
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65 = np.array([0.95047, 1.0, 1.08883])


def _f_lab(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB (uint8 or float [0,1]) -> CIELAB, shape (..., 3)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.max(initial=0.0) > 1.0:
        rgb = rgb / 255.0
    linear = _srgb_to_linear(rgb)
    xyz = linear @ _RGB2XYZ.T
    fxyz = _f_lab(xyz / _D65)
    L = 116.0 * fxyz[..., 1] - 16.0
    a = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    b = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return np.stack([L, a, b], axis=-1)


def to_lab(img: ImageRaster) -> LabRaster:
    """Convert the raster to CIELAB (sRGB, D65)."""
    lab = rgb_to_lab(img.pixels)
    return LabRaster(L=lab[..., 0], a=lab[..., 1], b=lab[..., 2])


def delta_e_cie76(lab1: np.ndarray, lab2: np.ndarray) -> np.ndarray:
    """CIE76 Euclidean color difference between Lab triples."""
    d = np.asarray(lab1, dtype=np.float64) - np.asarray(lab2, dtype=np.float64)
    return np.sqrt(np.sum(d * d, axis=-1))


def gray_histogram(gray: GrayRaster, bins: int = 256) -> Histogram:
    """Histogram of intensities over [0, 255]."""
    counts, _ = np.histogram(gray.intensity, bins=bins, range=(0, 256))
    return Histogram(bins=counts, binning=f"{bins} equal bins over [0,256)")


def gaussian_pyramid(gray: GrayRaster, levels: int) -> list[GrayRaster]:
    """Level 0 is the input; each next level blurs (sigma=1) and halves."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    max_levels = int(np.log2(min(gray.width, gray.height))) + 1
    if levels > max_levels:
        raise TooManyLevels(
            f"{levels} levels requested but image supports at most {max_levels}"
        )
    out = [gray]
    current = gray.intensity.astype(np.float64)
    for _ in range(levels - 1):
        blurred = gaussian_filter(current, sigma=1.0, mode="nearest")
        current = blurred[::2, ::2]
        out.append(GrayRaster(intensity=current.copy()))
    return out
