import io

import numpy as np
import pytest
from PIL import Image

from vizcomplexity.imagecore import ImageRaster


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(pixels: np.ndarray, quality: int = 95) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def raster(pixels, image_id="test") -> ImageRaster:
    return ImageRaster(pixels=np.asarray(pixels, dtype=np.uint8), id=image_id)


@pytest.fixture
def tmp_catalog(tmp_path):
    """A small on-disk catalog of synthetic images; returns (csv_path, ids)."""
    import csv

    from vizcomplexity import synth

    images = {
        "img-noise-0": synth.noise(48, 48, seed=0),
        "img-noise-1": synth.noise(48, 48, seed=1),
        "img-rects": synth.rectangles(48, 48, [(4, 4, 10, 8), (20, 12, 12, 16)]),
        "img-grad": synth.horizontal_gradient(48, 48, (0, 0, 0), (255, 255, 255)),
        "img-solid": synth.solid(48, 48, (200, 30, 30)),
        "img-check": synth.checkerboard(48, 48, 8),
    }
    imgdir = tmp_path / "imgs"
    imgdir.mkdir()
    rows = []
    for i, (img_id, img) in enumerate(images.items()):
        path = imgdir / f"{img_id}.png"
        Image.fromarray(img.pixels).save(path)
        tag = "node-link" if i % 2 == 0 else "heatmap-continuous"
        rows.append((img_id, str(path), tag))
    path = tmp_path / "catalog.csv"
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "path", "tags"])
        writer.writerows(rows)
    return path, [r[0] for r in rows]
