"""Object-level metrics: text-ink ratio and meaningful-color count.

The color dictionary is external and swappable (CSV: name,r,g,b,group);
a curated default with similarity groups ships with the package. Color
differences use CIE76 Euclidean distance in Lab.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .imagecore import ImageRaster, delta_e_cie76, rgb_to_lab, to_gray

TEXT_LABELS = ("annotation", "title", "legend", "axis", "other")


class BoxOutOfBounds(ValueError):
    """A text box extends past the image bounds."""


class EmptyDictionary(ValueError):
    """Color dictionary has no usable entries."""


@dataclass(frozen=True)
class TextBox:
    x: int
    y: int
    w: int
    h: int
    label: str = "other"

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError("text box must be at least 1x1")


@dataclass
class TextBoxSet:
    image_id: str
    boxes: list

    def validate_against(self, img: ImageRaster) -> None:
        for box in self.boxes:
            if box.x < 0 or box.y < 0 or box.x + box.w > img.width or box.y + box.h > img.height:
                raise BoxOutOfBounds(
                    f"box ({box.x},{box.y},{box.w},{box.h}) outside {img.width}x{img.height}"
                )


@dataclass
class ColorDictionary:
    names: list
    rgb: np.ndarray       # (n, 3) uint8
    groups: list

    def __post_init__(self):
        if len(self.names) == 0:
            raise EmptyDictionary("dictionary has no entries")
        if len(set(self.names)) != len(self.names):
            raise ValueError("dictionary names must be unique")
        if len(set(self.groups)) < 2:
            raise ValueError("a usable dictionary needs at least 2 groups")
        self.lab = rgb_to_lab(self.rgb)

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_csv(cls, path) -> "ColorDictionary":
        names, rgbs, groups = [], [], []
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                names.append(row["name"])
                rgbs.append((int(row["r"]), int(row["g"]), int(row["b"])))
                groups.append(row["group"])
        return cls(names=names, rgb=np.array(rgbs, dtype=np.uint8), groups=groups)


def default_dictionary() -> ColorDictionary:
    """The curated namable-color table shipped with the package."""
    ref = resources.files("vizcomplexity").joinpath("data/namable_colors.csv")
    with resources.as_file(ref) as path:
        return ColorDictionary.from_csv(path)


@dataclass
class MecReport:
    namable_count: int
    merged_count: int
    clusters: list          # list of dicts: names, representative rgb, pixel share
    delta_e_max: float
    min_share: float


def _otsu_threshold(values: np.ndarray) -> float:
    """Otsu's threshold over a 256-bin histogram of [0, 255] intensities."""
    counts, edges = np.histogram(values, bins=256, range=(0, 256))
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    centers = (edges[:-1] + edges[1:]) / 2
    omega = np.cumsum(p)
    mu = np.cumsum(p * centers)
    mu_t = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu_t * omega - mu) ** 2 / (omega * (1 - omega))
    between[~np.isfinite(between)] = -1
    return float(centers[int(np.argmax(between))])


def metric_tir(img: ImageRaster, boxes: TextBoxSet, mode: str = "ink") -> float:
    """Text pixels over total pixels.

    mode="ink": pixels in any box that fall in the darker Otsu class of
    that box. mode="box-area": union area of the boxes. Overlapping boxes
    count once.
    """
    if mode not in ("ink", "box-area"):
        raise ValueError(f"unknown mode: {mode}")
    boxes.validate_against(img)
    if not boxes.boxes:
        return 0.0
    mask = np.zeros((img.height, img.width), dtype=bool)
    if mode == "box-area":
        for b in boxes.boxes:
            mask[b.y : b.y + b.h, b.x : b.x + b.w] = True
        return float(mask.sum()) / img.pixel_count
    gray = to_gray(img).intensity
    for b in boxes.boxes:
        patch = gray[b.y : b.y + b.h, b.x : b.x + b.w]
        if np.unique(patch).size < 2:
            continue  # flat box carries no ink
        threshold = _otsu_threshold(patch)
        mask[b.y : b.y + b.h, b.x : b.x + b.w] |= patch <= threshold
    return float(mask.sum()) / img.pixel_count


def name_colors(img: ImageRaster, dictionary: ColorDictionary) -> dict:
    """Assign every pixel to its nearest dictionary color (CIE76 in Lab).

    Ties go to the lexicographically smaller name. Returns name -> pixel
    count for names that received at least one pixel.
    """
    # order entries by name so argmin resolves ties lexicographically
    order = np.argsort(np.array(dictionary.names, dtype=object))
    sorted_names = [dictionary.names[i] for i in order]
    sorted_lab = dictionary.lab[order]

    flat = img.pixels.reshape(-1, 3)
    unique_rgb, counts = np.unique(flat, axis=0, return_counts=True)
    pix_lab = rgb_to_lab(unique_rgb)
    # distances: (n_unique, n_entries)
    d = np.linalg.norm(pix_lab[:, None, :] - sorted_lab[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)
    out: dict = {}
    for entry_idx, count in zip(nearest, counts):
        name = sorted_names[entry_idx]
        out[name] = out.get(name, 0) + int(count)
    return out


def _single_linkage_clusters(adjacency: np.ndarray) -> list:
    """Connected components of the merge graph, as lists of indices."""
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    clusters = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            node = stack.pop()
            comp.append(node)
            for nbr in np.nonzero(adjacency[node])[0]:
                if not seen[nbr]:
                    seen[nbr] = True
                    stack.append(int(nbr))
        clusters.append(sorted(comp))
    return clusters


def metric_mec(
    img: ImageRaster,
    dictionary: ColorDictionary,
    delta_e_max: float = 14.0,
    min_share: float = 0.005,
    region_mask: np.ndarray | None = None,
) -> MecReport:
    """Meaningful-color count.

    Names every pixel, drops names whose pixel share is below the noise
    floor, then single-linkage merges surviving names that are in the
    same similarity group or within ``delta_e_max`` of each other. The
    cluster count is the metric; each cluster reports the member color
    nearest its centroid as representative.
    """
    if delta_e_max <= 0:
        raise ValueError("delta_e_max must be positive")
    source = img
    if region_mask is not None:
        masked = img.pixels[region_mask]
        if masked.size == 0:
            raise ValueError("region mask selects no pixels")
        source = ImageRaster(
            pixels=np.ascontiguousarray(masked.reshape(-1, 1, 3)), id=img.id
        )
    counts = name_colors(source, dictionary)
    total = sum(counts.values())
    namable = len(counts)
    surviving = {n: c for n, c in counts.items() if c / total >= min_share}
    if not surviving:
        # everything is below the floor; keep the dominant name
        top = max(counts, key=counts.get)
        surviving = {top: counts[top]}
    names = sorted(surviving)
    idx = {name: dictionary.names.index(name) for name in names}
    lab = np.array([dictionary.lab[idx[n]] for n in names])
    group = [dictionary.groups[idx[n]] for n in names]
    n = len(names)
    adjacency = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            same_group = group[i] == group[j]
            close = delta_e_cie76(lab[i], lab[j]) <= delta_e_max
            adjacency[i, j] = adjacency[j, i] = same_group or close
    clusters = []
    for comp in _single_linkage_clusters(adjacency):
        member_lab = lab[comp]
        centroid = member_lab.mean(axis=0)
        rep_local = int(np.argmin(delta_e_cie76(member_lab, centroid)))
        rep_name = names[comp[rep_local]]
        share = sum(surviving[names[i]] for i in comp) / total
        clusters.append(
            {
                "names": [names[i] for i in comp],
                "representative": rep_name,
                "representative_rgb": tuple(int(v) for v in dictionary.rgb[idx[rep_name]]),
                "pixel_share": share,
            }
        )
    return MecReport(
        namable_count=namable,
        merged_count=len(clusters),
        clusters=clusters,
        delta_e_max=delta_e_max,
        min_share=min_share,
    )


def load_textbox_annotations(path) -> dict:
    """Read line-delimited JSON annotation records.

    Each line: {"image_id": ..., "boxes": [{"x","y","w","h","label"}]}.
    Returns image_id -> TextBoxSet.
    """
    import json

    out = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            boxes = [
                TextBox(
                    x=int(b["x"]), y=int(b["y"]), w=int(b["w"]), h=int(b["h"]),
                    label=b.get("label", "other"),
                )
                for b in rec["boxes"]
            ]
            out[rec["image_id"]] = TextBoxSet(image_id=rec["image_id"], boxes=boxes)
    return out
