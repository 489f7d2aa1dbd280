"""Synthetic image builders used by demos, tests, and attention checks."""

from __future__ import annotations

import colorsys

import numpy as np

from .imagecore import ImageRaster


def solid(width: int, height: int, rgb, image_id: str = "solid") -> ImageRaster:
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[:, :] = rgb
    return ImageRaster(pixels=px, id=image_id)


def checkerboard(
    width: int, height: int, cell: int = 8,
    rgb_a=(0, 0, 0), rgb_b=(255, 255, 255), image_id: str = "checkerboard",
) -> ImageRaster:
    yy, xx = np.mgrid[0:height, 0:width]
    pattern = ((yy // cell) + (xx // cell)) % 2
    px = np.where(pattern[..., None] == 0, np.uint8(rgb_a), np.uint8(rgb_b))
    return ImageRaster(pixels=px.astype(np.uint8), id=image_id)


def horizontal_gradient(
    width: int, height: int, rgb_from=(0, 0, 0), rgb_to=(255, 255, 255),
    image_id: str = "gradient",
) -> ImageRaster:
    t = np.linspace(0.0, 1.0, width)[None, :, None]
    lo = np.array(rgb_from, dtype=np.float64)
    hi = np.array(rgb_to, dtype=np.float64)
    row = lo[None, None, :] * (1 - t) + hi[None, None, :] * t
    px = np.rint(np.broadcast_to(row, (height, width, 3))).astype(np.uint8)
    return ImageRaster(pixels=px.copy(), id=image_id)


def noise(width: int, height: int, seed: int = 0, image_id: str = "noise") -> ImageRaster:
    rng = np.random.default_rng(seed)
    px = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return ImageRaster(pixels=px, id=image_id)


def gray_noise(width: int, height: int, seed: int = 0, image_id: str = "gray-noise") -> ImageRaster:
    rng = np.random.default_rng(seed)
    g = rng.integers(0, 256, size=(height, width, 1), dtype=np.uint8)
    return ImageRaster(pixels=np.repeat(g, 3, axis=2), id=image_id)


def rectangles(
    width: int, height: int, rects, fill=(0, 0, 0), background=(255, 255, 255),
    image_id: str = "rects",
) -> ImageRaster:
    """rects: iterable of (x, y, w, h) filled boxes on a plain background."""
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[:, :] = background
    for x, y, w, h in rects:
        px[y : y + h, x : x + w] = fill
    return ImageRaster(pixels=px, id=image_id)


def near_blank_control(width: int = 256, height: int = 256, image_id: str = "attention-control") -> ImageRaster:
    """Almost-empty stimulus used as the obvious loser in attention trials."""
    px = np.full((height, width, 3), 250, dtype=np.uint8)
    cy, cx = height // 2, width // 2
    px[cy - 2 : cy + 2, cx - 2 : cx + 2] = 235
    return ImageRaster(pixels=px, id=image_id)


def family_shades(hue: float, count: int, sat: float = 0.85,
                  v_lo: float = 0.35, v_hi: float = 0.95) -> list:
    """RGB shades of one hue family, spanning dark to light."""
    out = []
    for v in np.linspace(v_lo, v_hi, count):
        r, g, b = colorsys.hsv_to_rgb(hue, sat, float(v))
        out.append((int(round(r * 255)), int(round(g * 255)), int(round(b * 255))))
    return out


# Hue families used by the shipped dictionary and the colormap fixture;
# (name prefix, HSV hue, shade count on the reference colormap).
COLORMAP_FAMILIES = (
    ("blue", 0.61, 8),
    ("green", 0.33, 8),
    ("yellow", 0.155, 8),
    ("orange", 0.065, 8),
    ("red", 0.975, 9),
)


def colormap_reconstruction(width: int = 64, rows_per_family: int = 120,
                            image_id: str = "colormap-recon") -> ImageRaster:
    """Reconstruction of a banded continuous colormap.

    Stacks one smooth dark-to-light gradient band per hue family, with a
    perceptual jump between families. Used with the shipped dictionary to
    exercise the full meaningful-color merging pipeline.
    """
    bands = []
    for _, hue, count in COLORMAP_FAMILIES:
        shades = np.array(family_shades(hue, count), dtype=np.float64)
        t = np.linspace(0, count - 1, rows_per_family)
        i0 = np.clip(t.astype(int), 0, count - 2)
        frac = (t - i0)[:, None]
        rows = shades[i0] * (1 - frac) + shades[i0 + 1] * frac
        bands.append(rows)
    column = np.rint(np.vstack(bands)).astype(np.uint8)
    px = np.repeat(column[:, None, :], width, axis=1)
    return ImageRaster(pixels=px.copy(), id=image_id)
