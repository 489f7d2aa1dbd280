"""The ten literature-derived image complexity metrics.

Each metric is a pure function of an :class:`ImageRaster`. Parameters that
the source literature leaves open (compressor level, wavelet depth, Canny
and Harris constants, quantization bins) are frozen here and recorded in
:data:`METRIC_PARAMS` so batch outputs can cite them.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import (
    binary_propagation,
    gaussian_filter,
    maximum_filter,
    sobel,
    uniform_filter,
)

from .imagecore import (
    GrayRaster,
    Histogram,
    ImageRaster,
    gray_histogram,
    to_gray,
    to_lab,
)

METRIC_NAMES = (
    "ie", "kc", "se", "ig", "fc", "h", "cf", "ergb", "ed", "fp", "tir", "mec",
)

# Column labels used by the published dataset export.
METRIC_COLUMNS = {
    "ie": "O.IE", "kc": "O.KC", "se": "O.SE", "ig": "O.IG",
    "fc": "O.FC", "h": "O.H", "cf": "O.CF", "ergb": "O.ERGB",
    "ed": "O.ED", "fp": "O.FP", "tir": "O.TiR", "mec": "O.MeC",
}

METRIC_PARAMS = {
    "kc_compressor": "zlib",
    "kc_level": 9,
    "se_wavelet": "haar",
    "se_levels": 3,
    "se_bins": 16,
    "ig_color_bins": 64,
    "h_gray_levels": 64,
    "cf_kappa": 0.3,
    "canny_sigma": 1.4,
    "canny_low": 0.10,
    "canny_high": 0.30,
    "harris_k": 0.04,
    "harris_sigma": 1.0,
    "harris_rel_threshold": 0.01,
    "fc_scales": 3,
    "fc_orientations": 4,
}


class ImageTooSmall(ValueError):
    """Image is below the minimum size a metric needs."""


class MetricError(RuntimeError):
    """Wraps a failure in one metric so the batch runner can name it."""

    def __init__(self, metric: str, cause: Exception):
        super().__init__(f"metric '{metric}' failed: {cause}")
        self.metric = metric
        self.cause = cause


@dataclass
class MetricVector:
    """All twelve metric values for one image."""

    image_id: str
    width: int
    height: int
    ie: float = 0.0
    kc: float = 0.0
    se: float = 0.0
    ig: float = 0.0
    fc: float = 0.0
    h: float = 0.0
    cf: float = 0.0
    ergb: float = 0.0
    ed: float = 0.0
    fp: float = 0.0
    tir: float = 0.0
    mec: float = 1.0
    tir_available: bool = False
    notes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"image_id": self.image_id, "width": self.width, "height": self.height}
        for name in METRIC_NAMES:
            d[METRIC_COLUMNS[name]] = getattr(self, name)
        return d


@dataclass
class GlcmMatrix:
    """Symmetric, normalized gray-level co-occurrence matrix."""

    P: np.ndarray
    levels: int


@dataclass
class FeatureEnergyMap:
    """Per-feature energies pooled over scales (color, luminance, 4 orientations)."""

    energies: np.ndarray
    names: tuple


def metric_ie(img: ImageRaster) -> float:
    """Shannon entropy of the 256-bin grayscale intensity histogram (bits)."""
    return gray_histogram(to_gray(img)).entropy_bits()


def metric_kc(img: ImageRaster) -> float:
    """Length in bytes of the raw RGB buffer after zlib level-9 compression."""
    raw = np.ascontiguousarray(img.pixels).tobytes()
    return float(len(zlib.compress(raw, level=METRIC_PARAMS["kc_level"])))


def _haar_dwt2(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One level of the separable orthonormal Haar transform (edge-padded to even)."""
    if a.shape[0] % 2:
        a = np.vstack([a, a[-1:]])
    if a.shape[1] % 2:
        a = np.hstack([a, a[:, -1:]])
    s = np.sqrt(2.0)
    lo_r = (a[:, 0::2] + a[:, 1::2]) / s
    hi_r = (a[:, 0::2] - a[:, 1::2]) / s
    ll = (lo_r[0::2] + lo_r[1::2]) / s
    lh = (lo_r[0::2] - lo_r[1::2]) / s
    hl = (hi_r[0::2] + hi_r[1::2]) / s
    hh = (hi_r[0::2] - hi_r[1::2]) / s
    return ll, lh, hl, hh


def _subband_entropy(coeffs: np.ndarray, bins: int) -> float:
    counts, _ = np.histogram(coeffs, bins=bins)
    return Histogram(bins=counts, binning=f"{bins} bins over coeff range").entropy_bits()


def metric_se(img: ImageRaster) -> float:
    """Mean entropy of wavelet detail-coefficient histograms.

    Three-level Haar decomposition of the Lab lightness plus both
    chrominance channels; 16-bin histogram per detail subband.
    """
    if min(img.width, img.height) < 8:
        raise ImageTooSmall("subband entropy needs at least 8x8")
    lab = to_lab(img)
    bins = METRIC_PARAMS["se_bins"]
    entropies = []
    for channel in (lab.L, lab.a, lab.b):
        ll = np.asarray(channel, dtype=np.float64)
        for _ in range(METRIC_PARAMS["se_levels"]):
            ll, lh, hl, hh = _haar_dwt2(ll)
            for detail in (lh, hl, hh):
                entropies.append(_subband_entropy(detail, bins))
    return float(np.mean(entropies))


def _quantize_colors(img: ImageRaster, bins_per_channel: int = 4) -> np.ndarray:
    shift = 8 - int(np.log2(bins_per_channel))
    q = img.pixels >> shift
    return (
        q[..., 0].astype(np.int64) * bins_per_channel**2
        + q[..., 1].astype(np.int64) * bins_per_channel
        + q[..., 2].astype(np.int64)
    )


def metric_ig(img: ImageRaster) -> float:
    """Mean information gain: conditional entropy of a 4-neighbor's color.

    Colors are quantized to 64 bins (4 levels per RGB channel); every
    ordered neighbor pair contributes.
    """
    if img.width < 2 or img.height < 2:
        raise ImageTooSmall("information gain needs at least 2x2")
    n_colors = METRIC_PARAMS["ig_color_bins"]
    idx = _quantize_colors(img)
    pairs_a = []
    pairs_b = []
    # horizontal and vertical adjacencies, both directions
    pairs_a.append(idx[:, :-1].ravel()); pairs_b.append(idx[:, 1:].ravel())
    pairs_a.append(idx[:, 1:].ravel()); pairs_b.append(idx[:, :-1].ravel())
    pairs_a.append(idx[:-1, :].ravel()); pairs_b.append(idx[1:, :].ravel())
    pairs_a.append(idx[1:, :].ravel()); pairs_b.append(idx[:-1, :].ravel())
    a = np.concatenate(pairs_a)
    b = np.concatenate(pairs_b)
    joint = np.bincount(a * n_colors + b, minlength=n_colors**2).astype(np.float64)
    joint = joint.reshape(n_colors, n_colors)
    total = joint.sum()
    p_ij = joint / total
    p_i = p_ij.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = p_ij / p_i[:, None]
        terms = np.where(p_ij > 0, p_ij * np.log2(cond), 0.0)
    return float(-terms.sum())


def _local_std(a: np.ndarray, size: int = 5) -> np.ndarray:
    mean = uniform_filter(a, size=size, mode="nearest")
    mean_sq = uniform_filter(a * a, size=size, mode="nearest")
    return np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))


def feature_energy_map(img: ImageRaster) -> FeatureEnergyMap:
    """Six feature energies: Lab chroma variation, luminance contrast, and
    four orientation energies, each averaged over three pyramid scales.

    All channels are expressed in comparable amplitude units (Lab local
    standard deviation, mean absolute oriented gradient) so no single
    channel dominates the energy distribution by construction.
    """
    lab = to_lab(img)
    n_orient = METRIC_PARAMS["fc_orientations"]
    scales = METRIC_PARAMS["fc_scales"]
    color_e = 0.0
    lum_e = 0.0
    orient_e = np.zeros(n_orient)
    L = np.asarray(lab.L, dtype=np.float64)
    a = np.asarray(lab.a, dtype=np.float64)
    b = np.asarray(lab.b, dtype=np.float64)
    for _ in range(scales):
        color_e += float(np.mean(np.sqrt(_local_std(a) ** 2 + _local_std(b) ** 2)))
        lum_e += float(np.mean(_local_std(L)))
        gx = sobel(L, axis=1, mode="nearest") / 4.0
        gy = sobel(L, axis=0, mode="nearest") / 4.0
        for k in range(n_orient):
            theta = np.pi * k / n_orient
            orient_e[k] += float(np.mean(np.abs(gx * np.cos(theta) + gy * np.sin(theta))))
        L = gaussian_filter(L, sigma=1.0, mode="nearest")[::2, ::2]
        a = gaussian_filter(a, sigma=1.0, mode="nearest")[::2, ::2]
        b = gaussian_filter(b, sigma=1.0, mode="nearest")[::2, ::2]
    energies = np.array([color_e, lum_e, *orient_e]) / scales
    names = ("color_variance", "luminance_contrast") + tuple(
        f"orientation_{k}" for k in range(n_orient)
    )
    return FeatureEnergyMap(energies=energies, names=names)


def metric_fc(img: ImageRaster) -> float:
    """Feature-congestion clutter: entropy over relative feature energies,
    scaled by the log of the total energy. Zero energy maps to zero."""
    if min(img.width, img.height) < 16:
        raise ImageTooSmall("feature congestion needs at least 16x16")
    fem = feature_energy_map(img)
    total = float(fem.energies.sum())
    if total <= 0.0:
        return 0.0
    p = fem.energies / total
    p = p[p > 0]
    entropy = float(-np.sum(p * np.log2(p)))
    return entropy * float(np.log2(1.0 + total))


def glcm(img: ImageRaster, levels: int = 64) -> GlcmMatrix:
    """Symmetrized, normalized co-occurrence matrix, offset (1, 0)."""
    gray = to_gray(img).intensity
    q = np.clip((gray * levels / 256.0).astype(np.int64), 0, levels - 1)
    left = q[:, :-1].ravel()
    right = q[:, 1:].ravel()
    counts = np.bincount(left * levels + right, minlength=levels**2).astype(np.float64)
    P = counts.reshape(levels, levels)
    P = P + P.T
    total = P.sum()
    if total > 0:
        P /= total
    return GlcmMatrix(P=P, levels=levels)


def metric_h(img: ImageRaster, invert: bool = False) -> float:
    """Texture homogeneity sum P(i,j) / (1 + (i-j)^2) over a 64-level GLCM.

    The cited formula is a homogeneity (inverse difference) form; pass
    ``invert=True`` to report 1 - value for a heterogeneity reading.
    """
    if img.width < 2:
        # no horizontal neighbor pairs; treat the single column as uniform
        return 0.0 if invert else 1.0
    m = glcm(img, levels=METRIC_PARAMS["h_gray_levels"])
    i = np.arange(m.levels)
    weights = 1.0 / (1.0 + (i[:, None] - i[None, :]) ** 2)
    value = float(np.sum(m.P * weights))
    return 1.0 - value if invert else value


def metric_cf(img: ImageRaster) -> float:
    """Hasler-Suesstrunk colorfulness over opponent axes rg and yb."""
    px = img.pixels.astype(np.float64)
    rg = px[..., 0] - px[..., 1]
    yb = 0.5 * (px[..., 0] + px[..., 1]) - px[..., 2]
    sigma = np.sqrt(rg.var() + yb.var())
    mu = np.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return float(sigma + METRIC_PARAMS["cf_kappa"] * mu)


def metric_ergb(img: ImageRaster) -> float:
    """Shannon entropy over exact 24-bit colors (bits)."""
    packed = (
        img.pixels[..., 0].astype(np.uint32) << 16
        | img.pixels[..., 1].astype(np.uint32) << 8
        | img.pixels[..., 2].astype(np.uint32)
    )
    _, counts = np.unique(packed, return_counts=True)
    return Histogram(bins=counts, binning="one bin per distinct color").entropy_bits()


def canny_edges(gray: GrayRaster, sigma: float, low_frac: float, high_frac: float) -> np.ndarray:
    """Canny edge map: Gaussian smoothing, Sobel gradients, non-maximum
    suppression, and hysteresis with thresholds relative to the max
    gradient magnitude."""
    smoothed = gaussian_filter(gray.intensity.astype(np.float64), sigma=sigma, mode="nearest")
    gx = sobel(smoothed, axis=1, mode="nearest")
    gy = sobel(smoothed, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    if mag.max() == 0:
        return np.zeros_like(mag, dtype=bool)
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    # quantize direction into 4 sectors
    sector = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(int) % 4
    padded = np.pad(mag, 1, mode="constant")
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    nms = np.zeros_like(mag)
    for s, (dy, dx) in offsets.items():
        fwd = padded[1 + dy : 1 + dy + mag.shape[0], 1 + dx : 1 + dx + mag.shape[1]]
        bwd = padded[1 - dy : 1 - dy + mag.shape[0], 1 - dx : 1 - dx + mag.shape[1]]
        keep = (sector == s) & (mag >= fwd) & (mag >= bwd)
        nms[keep] = mag[keep]
    high = high_frac * mag.max()
    low = low_frac * mag.max()
    strong = nms >= high
    weak = nms >= low
    return binary_propagation(strong, mask=weak)


def metric_ed(img: ImageRaster) -> float:
    """Fraction of pixels the Canny detector marks as edges."""
    if min(img.width, img.height) < 3:
        raise ImageTooSmall("edge density needs at least 3x3")
    edges = canny_edges(
        to_gray(img),
        sigma=METRIC_PARAMS["canny_sigma"],
        low_frac=METRIC_PARAMS["canny_low"],
        high_frac=METRIC_PARAMS["canny_high"],
    )
    return float(edges.sum()) / img.pixel_count


def harris_response(gray: GrayRaster, k: float, sigma: float) -> np.ndarray:
    """Harris corner response over the smoothed structure tensor."""
    g = gray.intensity.astype(np.float64)
    ix = sobel(g, axis=1, mode="nearest")
    iy = sobel(g, axis=0, mode="nearest")
    sxx = gaussian_filter(ix * ix, sigma=sigma, mode="nearest")
    syy = gaussian_filter(iy * iy, sigma=sigma, mode="nearest")
    sxy = gaussian_filter(ix * iy, sigma=sigma, mode="nearest")
    det = sxx * syy - sxy * sxy
    trace = sxx + syy
    return det - k * trace * trace


def harris_corners(img: ImageRaster) -> np.ndarray:
    """Boolean corner map: thresholded Harris maxima after 3x3 suppression."""
    resp = harris_response(
        to_gray(img), k=METRIC_PARAMS["harris_k"], sigma=METRIC_PARAMS["harris_sigma"]
    )
    peak = resp.max()
    if peak <= 0:
        return np.zeros_like(resp, dtype=bool)
    threshold = METRIC_PARAMS["harris_rel_threshold"] * peak
    local_max = resp == maximum_filter(resp, size=3, mode="nearest")
    return (resp > threshold) & local_max


def metric_fp(img: ImageRaster) -> float:
    """Fraction of pixels that are Harris corner maxima."""
    if min(img.width, img.height) < 7:
        raise ImageTooSmall("feature points need at least 7x7")
    return float(harris_corners(img).sum()) / img.pixel_count


def compute_all(
    img: ImageRaster,
    textboxes=None,
    color_dict=None,
    tir_mode: str = "ink",
) -> MetricVector:
    """Populate all twelve metrics; object metrics need their inputs.

    ``tir`` defaults to 0 with ``tir_available=False`` when no text boxes
    are supplied; ``mec`` defaults to 1 when no dictionary is supplied.
    Per-metric failures are re-raised as :class:`MetricError` naming the
    metric.
    """
    from . import objmetrics

    vec = MetricVector(image_id=img.id, width=img.width, height=img.height)
    pixel_funcs = {
        "ie": metric_ie, "kc": metric_kc, "se": metric_se, "ig": metric_ig,
        "fc": metric_fc, "h": metric_h, "cf": metric_cf, "ergb": metric_ergb,
        "ed": metric_ed, "fp": metric_fp,
    }
    for name, fn in pixel_funcs.items():
        try:
            setattr(vec, name, float(fn(img)))
        except Exception as exc:
            raise MetricError(name, exc) from exc
    if textboxes is not None:
        try:
            vec.tir = objmetrics.metric_tir(img, textboxes, mode=tir_mode)
            vec.tir_available = True
            vec.notes["tir_mode"] = tir_mode
        except Exception as exc:
            raise MetricError("tir", exc) from exc
    else:
        vec.notes["tir_mode"] = "unavailable"
    if color_dict is not None:
        try:
            vec.mec = float(objmetrics.metric_mec(img, color_dict).merged_count)
        except Exception as exc:
            raise MetricError("mec", exc) from exc
    return vec


def normalize_columns(values: np.ndarray) -> np.ndarray:
    """Min-max normalize each column; constant columns map to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = hi - lo
    out = np.zeros_like(values)
    np.divide(values - lo, span, out=out, where=span != 0)
    return out
