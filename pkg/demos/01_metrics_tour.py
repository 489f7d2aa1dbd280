"""Tour of the twelve complexity metrics on synthetic images.

Shows how each metric responds as image structure changes: constant ->
gradient -> rectangles -> noise, plus the object-level text-ink ratio and
meaningful-color count.
"""

import numpy as np

from vizcomplexity import objmetrics, pixmetrics, synth
from vizcomplexity.imagecore import ImageRaster


def main():
    images = {
        "constant": synth.solid(128, 128, (200, 200, 200)),
        "gradient": synth.horizontal_gradient(128, 128, (0, 0, 0),
                                              (255, 255, 255)),
        "rects": synth.rectangles(
            128, 128, [(x, y, 14, 10) for x in (10, 50, 90)
                       for y in (10, 60, 110)]
        ),
        "checker": synth.checkerboard(128, 128, 16),
        "noise": synth.noise(128, 128, seed=0),
    }
    dictionary = objmetrics.default_dictionary()
    columns = list(pixmetrics.METRIC_COLUMNS.values())
    print(f"{'image':>10} " + " ".join(f"{c:>9}" for c in columns))
    rows = []
    for name, img in images.items():
        vec = pixmetrics.compute_all(img, color_dict=dictionary)
        d = vec.as_dict()
        rows.append([d[c] for c in columns])
        print(f"{name:>10} " + " ".join(f"{d[c]:9.3f}" for c in columns))

    print("\nCatalog min-max normalized (per column):")
    norm = pixmetrics.normalize_columns(np.array(rows))
    for (name, _), r in zip(images.items(), norm):
        print(f"{name:>10} " + " ".join(f"{v:9.3f}" for v in r))

    # text-ink ratio needs text-box annotations
    px = np.full((128, 128, 3), 255, np.uint8)
    px[20:36, 20:84:4] = 0  # fake glyph strokes
    labeled = ImageRaster(pixels=px, id="with-text")
    boxes = objmetrics.TextBoxSet(
        image_id="with-text",
        boxes=[objmetrics.TextBox(x=20, y=20, w=64, h=16, label="title")],
    )
    print("\ntext-ink ratio (ink mode):   ",
          objmetrics.metric_tir(labeled, boxes, mode="ink"))
    print("text-ink ratio (box-area):   ",
          objmetrics.metric_tir(labeled, boxes, mode="box-area"))

    # meaningful-color merging on a banded colormap reconstruction
    report = objmetrics.metric_mec(synth.colormap_reconstruction(), dictionary)
    print(f"\ncolormap reconstruction: {report.namable_count} namable colors "
          f"merge into {report.merged_count} clusters:")
    for cluster in report.clusters:
        print(f"  {cluster['representative']:>10}: "
              f"{len(cluster['names'])} names, "
              f"{cluster['pixel_share']:.1%} of pixels")


if __name__ == "__main__":
    main()
