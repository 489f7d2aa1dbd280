import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vizcomplexity import pixmetrics as pm
from vizcomplexity import synth
from vizcomplexity.imagecore import ImageRaster

from .conftest import raster

# ------------------------------------------------------------- oracles --
# Independent brute-force evaluations of the defining sums, written with
# plain Python loops so they share no code with the implementations.


def _oracle_gray(px):
    h, w, _ = px.shape
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            r, g, b = (int(v) for v in px[y, x])
            out[y][x] = int(round(0.299 * r + 0.587 * g + 0.114 * b))
    return out


def _entropy(counts):
    total = sum(counts)
    e = 0.0
    for c in counts:
        if c:
            p = c / total
            e -= p * math.log2(p)
    return e


def oracle_ie(px):
    gray = _oracle_gray(px)
    counts = [0] * 256
    for row in gray:
        for v in row:
            counts[v] += 1
    return _entropy(counts)


def oracle_ergb(px):
    counts = {}
    for y in range(px.shape[0]):
        for x in range(px.shape[1]):
            key = tuple(int(v) for v in px[y, x])
            counts[key] = counts.get(key, 0) + 1
    return _entropy(list(counts.values()))


def oracle_ig(px):
    h, w, _ = px.shape
    quant = [
        [(int(px[y, x, 0]) // 64, int(px[y, x, 1]) // 64, int(px[y, x, 2]) // 64)
         for x in range(w)]
        for y in range(h)
    ]
    joint = {}
    total = 0
    for y in range(h):
        for x in range(w):
            for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w:
                    key = (quant[y][x], quant[ny][nx])
                    joint[key] = joint.get(key, 0) + 1
                    total += 1
    marginal = {}
    for (i, _), c in joint.items():
        marginal[i] = marginal.get(i, 0) + c
    out = 0.0
    for (i, _), c in joint.items():
        p_ij = c / total
        p_j_given_i = c / marginal[i]
        out -= p_ij * math.log2(p_j_given_i)
    return out


def oracle_h(px, levels=64):
    gray = _oracle_gray(px)
    h, w = len(gray), len(gray[0])
    quant = [[min(v * levels // 256, levels - 1) for v in row] for row in gray]
    counts = {}
    total = 0
    for y in range(h):
        for x in range(w - 1):
            for a, b in ((quant[y][x], quant[y][x + 1]),
                         (quant[y][x + 1], quant[y][x])):
                counts[(a, b)] = counts.get((a, b), 0) + 1
                total += 1
    return sum(c / total / (1 + (i - j) ** 2) for (i, j), c in counts.items())


small_images = st.integers(2, 8).flatmap(
    lambda h: st.integers(2, 8).flatmap(
        lambda w: st.binary(min_size=h * w * 3, max_size=h * w * 3).map(
            lambda data: np.frombuffer(data, np.uint8).reshape(h, w, 3).copy()
        )
    )
)


class TestBruteForceEquivalence:
    @settings(max_examples=60, deadline=None)
    @given(small_images)
    def test_ie_matches_enumeration(self, px):
        assert abs(pm.metric_ie(raster(px)) - oracle_ie(px)) < 1e-9

    @settings(max_examples=60, deadline=None)
    @given(small_images)
    def test_ergb_matches_enumeration(self, px):
        assert abs(pm.metric_ergb(raster(px)) - oracle_ergb(px)) < 1e-9

    @settings(max_examples=60, deadline=None)
    @given(small_images)
    def test_ig_matches_enumeration(self, px):
        assert abs(pm.metric_ig(raster(px)) - oracle_ig(px)) < 1e-9

    @settings(max_examples=60, deadline=None)
    @given(small_images)
    def test_h_matches_enumeration(self, px):
        assert abs(pm.metric_h(raster(px)) - oracle_h(px)) < 1e-9


class TestGrayEntropy:
    def test_constant_zero(self):
        assert pm.metric_ie(synth.solid(16, 16, (40, 40, 40))) == 0.0

    def test_two_equal_intensities_one_bit(self):
        px = np.zeros((4, 4, 3), np.uint8)
        px[:2] = 255
        assert pm.metric_ie(raster(px)) == pytest.approx(1.0)

    def test_all_256_intensities_eight_bits(self):
        vals = np.arange(256, dtype=np.uint8).reshape(16, 16)
        px = np.stack([vals] * 3, axis=-1)
        assert pm.metric_ie(raster(px)) == pytest.approx(8.0)


class TestCompression:
    def test_constant_compresses_below_one_percent(self):
        kc = pm.metric_kc(synth.solid(256, 256, (128, 128, 128)))
        assert kc == 213.0  # frozen from the configured compressor
        assert kc < 0.01 * 256 * 256 * 3

    def test_noise_is_nearly_incompressible(self):
        kc = pm.metric_kc(synth.noise(256, 256, seed=5))
        assert kc >= 0.95 * 256 * 256 * 3

    def test_redundancy_ordering(self):
        const = pm.metric_kc(synth.solid(256, 256, (9, 9, 9)))
        grad = pm.metric_kc(
            synth.horizontal_gradient(256, 256, (0, 0, 0), (255, 255, 255))
        )
        noise = pm.metric_kc(synth.noise(256, 256, seed=1))
        assert const < grad < noise


class TestSubbandEntropy:
    def test_constant_zero(self):
        assert pm.metric_se(synth.solid(32, 32, (120, 5, 5))) == 0.0

    def test_noise_exceeds_constant(self):
        assert pm.metric_se(synth.noise(64, 64, seed=2)) > 0.0

    def test_frozen_noise_value(self):
        assert pm.metric_se(synth.noise(128, 128, seed=42)) == pytest.approx(
            3.44171810207568, abs=1e-9
        )

    def test_too_small(self):
        with pytest.raises(pm.ImageTooSmall):
            pm.metric_se(synth.noise(4, 4, seed=0))


class TestInformationGain:
    def test_constant_zero(self):
        assert pm.metric_ig(synth.solid(16, 16, (1, 2, 3))) == 0.0

    def test_pixel_checkerboard_is_deterministic(self):
        # at cell size 1 every neighbor's color is determined by the center
        assert pm.metric_ig(synth.checkerboard(16, 16, 1)) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_iid_two_color_limit(self):
        rng = np.random.default_rng(11)
        mask = rng.random((256, 256)) < 0.5
        px = np.broadcast_to(
            np.where(mask[..., None], 255, 0), (256, 256, 3)
        ).astype(np.uint8)
        assert pm.metric_ig(raster(px)) == pytest.approx(1.0, abs=0.05)


class TestFeatureCongestion:
    def test_constant_zero(self):
        assert pm.metric_fc(synth.solid(32, 32, (80, 80, 80))) == 0.0

    def test_ordering(self):
        const = pm.metric_fc(synth.solid(128, 128, (50, 50, 50)))
        grad = pm.metric_fc(
            synth.horizontal_gradient(128, 128, (0, 0, 0), (255, 255, 255))
        )
        noise = pm.metric_fc(synth.noise(128, 128, seed=3))
        assert const < grad < noise

    def test_frozen_collage_value(self):
        px = np.zeros((128, 128, 3), np.uint8)
        px[:64, :64] = synth.solid(64, 64, (30, 90, 200)).pixels
        px[:64, 64:] = synth.checkerboard(64, 64, 8).pixels
        px[64:, :64] = synth.horizontal_gradient(
            64, 64, (255, 0, 0), (0, 255, 0)
        ).pixels
        px[64:, 64:] = synth.noise(64, 64, seed=7).pixels
        assert pm.metric_fc(raster(px)) == pytest.approx(
            15.285765331655618, abs=1e-9
        )

    def test_too_small(self):
        with pytest.raises(pm.ImageTooSmall):
            pm.metric_fc(synth.noise(8, 8, seed=0))


class TestHeterogeneity:
    def test_constant_is_one(self):
        assert pm.metric_h(synth.solid(16, 16, (200, 200, 200))) == pytest.approx(1.0)

    def test_bounded_in_unit_interval(self):
        for seed in range(5):
            v = pm.metric_h(synth.noise(32, 32, seed=seed))
            assert 0.0 < v <= 1.0

    def test_invert_flag_flips_sense(self):
        img = synth.noise(32, 32, seed=9)
        assert pm.metric_h(img, invert=True) == pytest.approx(
            1.0 - pm.metric_h(img)
        )


class TestColorfulness:
    def test_grayscale_zero(self):
        assert pm.metric_cf(synth.gray_noise(32, 32, seed=4)) == 0.0

    def test_solid_red_closed_form(self):
        expected = 0.3 * math.sqrt(255.0**2 + 127.5**2)
        assert pm.metric_cf(synth.solid(16, 16, (255, 0, 0))) == pytest.approx(
            expected, abs=1e-9
        )

    def test_half_red_half_green_closed_form(self):
        px = np.zeros((16, 16, 3), np.uint8)
        px[:, :8] = (255, 0, 0)
        px[:, 8:] = (0, 255, 0)
        assert pm.metric_cf(raster(px)) == pytest.approx(293.25, abs=1e-9)


class TestColorEntropy:
    def test_constant_zero(self):
        assert pm.metric_ergb(synth.solid(16, 16, (3, 200, 90))) == 0.0

    def test_four_equal_colors_two_bits(self):
        px = np.zeros((4, 4, 3), np.uint8)
        px[:2, :2] = (255, 0, 0)
        px[:2, 2:] = (0, 255, 0)
        px[2:, :2] = (0, 0, 255)
        assert pm.metric_ergb(raster(px)) == pytest.approx(2.0)

    def test_256_equal_colors_eight_bits(self):
        px = np.zeros((16, 16, 3), np.uint8)
        px[..., 0] = np.arange(256, dtype=np.uint8).reshape(16, 16)
        assert pm.metric_ergb(raster(px)) == pytest.approx(8.0)


class TestEdgeDensity:
    def test_constant_zero(self):
        assert pm.metric_ed(synth.solid(32, 32, (77, 77, 77))) == 0.0

    def test_vertical_step_edge_single_column(self):
        px = np.zeros((64, 64, 3), np.uint8)
        px[:, 32:] = 255
        # one 64-pixel column fires at the step boundary
        assert pm.metric_ed(raster(px)) == pytest.approx(64 / 4096)

    def test_second_edge_does_not_decrease(self):
        one = np.zeros((64, 64, 3), np.uint8)
        one[:, 32:] = 255
        two = one.copy()
        two[:32, :] = np.where(two[:32, :] == 0, 128, two[:32, :])
        assert pm.metric_ed(raster(two)) >= pm.metric_ed(raster(one))

    def test_too_small(self):
        with pytest.raises(pm.ImageTooSmall):
            pm.metric_ed(synth.solid(2, 2, (0, 0, 0)))


class TestFeaturePoints:
    def test_constant_zero(self):
        assert pm.metric_fp(synth.solid(32, 32, (10, 10, 10))) == 0.0

    def test_single_rectangle_has_four_corners(self):
        img = synth.rectangles(64, 64, [(16, 16, 24, 20)])
        assert pm.metric_fp(img) == pytest.approx(4 / 4096)

    def test_more_rectangles_more_corners(self):
        one = synth.rectangles(64, 64, [(8, 8, 10, 10)])
        grid = synth.rectangles(
            64, 64,
            [(x, y, 6, 6) for x in (4, 16, 28, 40, 52) for y in (4, 16, 28, 40, 52)],
        )
        assert pm.metric_fp(grid) > pm.metric_fp(one)

    def test_too_small(self):
        with pytest.raises(pm.ImageTooSmall):
            pm.metric_fp(synth.solid(4, 4, (0, 0, 0)))


class TestInvariances:
    def test_determinism(self):
        img = synth.noise(48, 48, seed=17)
        first = [f(img) for f in (pm.metric_ie, pm.metric_kc, pm.metric_se,
                                  pm.metric_ig, pm.metric_fc, pm.metric_h,
                                  pm.metric_cf, pm.metric_ergb, pm.metric_ed,
                                  pm.metric_fp)]
        second = [f(img) for f in (pm.metric_ie, pm.metric_kc, pm.metric_se,
                                   pm.metric_ig, pm.metric_fc, pm.metric_h,
                                   pm.metric_cf, pm.metric_ergb, pm.metric_ed,
                                   pm.metric_fp)]
        assert first == second

    def test_histogram_metrics_permutation_invariant(self):
        rng = np.random.default_rng(23)
        px = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        flat = px.reshape(-1, 3)
        shuffled = flat[rng.permutation(len(flat))].reshape(16, 16, 3)
        for f in (pm.metric_ie, pm.metric_ergb, pm.metric_cf):
            assert f(raster(px)) == pytest.approx(f(raster(shuffled)), abs=1e-9)

    def test_spatial_metric_not_permutation_invariant(self):
        board = synth.checkerboard(32, 32, 8)
        rng = np.random.default_rng(5)
        flat = board.pixels.reshape(-1, 3)
        shuffled = flat[rng.permutation(len(flat))].reshape(32, 32, 3)
        assert pm.metric_ig(board) != pytest.approx(
            pm.metric_ig(raster(shuffled)), abs=1e-6
        )

    def test_cyclic_shift_on_periodic_image(self):
        board = synth.checkerboard(64, 64, 8)
        shifted = raster(np.roll(board.pixels, 8, axis=1))
        for f in (pm.metric_ie, pm.metric_ergb, pm.metric_cf):
            assert f(board) == pytest.approx(f(shifted), abs=1e-9)
        for f in (pm.metric_ig, pm.metric_ed, pm.metric_fp):
            a, b = f(board), f(shifted)
            assert b == pytest.approx(a, rel=0.02, abs=0.002)

    @settings(max_examples=30, deadline=None)
    @given(small_images)
    def test_bounds_hold_everywhere(self, px):
        img = raster(px)
        assert 0.0 <= pm.metric_ie(img) <= 8.0
        assert pm.metric_ergb(img) >= 0.0
        assert pm.metric_ig(img) >= 0.0
        assert 0.0 < pm.metric_h(img) <= 1.0 + 1e-12
        assert pm.metric_cf(img) >= 0.0
        assert pm.metric_kc(img) >= 0.0


class TestComputeAll:
    def test_constant_white_vector(self):
        vec = pm.compute_all(synth.solid(64, 64, (255, 255, 255)))
        assert vec.ie == 0.0
        assert vec.se == 0.0
        assert vec.ig == 0.0
        assert vec.fc == 0.0
        assert vec.cf == 0.0
        assert vec.ergb == 0.0
        assert vec.ed == 0.0
        assert vec.fp == 0.0
        assert vec.h == pytest.approx(1.0)
        assert vec.kc > 0
        assert vec.mec == 1
        assert vec.tir == 0.0 and vec.tir_available is False

    def test_error_names_failing_metric(self):
        with pytest.raises(pm.MetricError) as exc:
            pm.compute_all(synth.solid(4, 4, (0, 0, 0)))
        assert exc.value.metric == "se"

    def test_as_dict_uses_standard_column_names(self):
        vec = pm.compute_all(synth.noise(64, 64, seed=0))
        d = vec.as_dict()
        metric_keys = {
            "O.IE", "O.KC", "O.SE", "O.IG", "O.FC", "O.H", "O.CF",
            "O.ERGB", "O.ED", "O.FP", "O.TiR", "O.MeC",
        }
        assert metric_keys <= set(d)
        assert all(np.isfinite(d[k]) for k in metric_keys)


class TestNormalization:
    def test_min_max_columns(self):
        X = np.array([[0.0, 10.0], [5.0, 20.0], [10.0, 30.0]])
        norm = pm.normalize_columns(X)
        assert np.allclose(norm[:, 0], [0, 0.5, 1])
        assert np.allclose(norm[:, 1], [0, 0.5, 1])

    def test_constant_column_maps_to_zero(self):
        X = np.array([[3.0], [3.0], [3.0]])
        assert np.all(pm.normalize_columns(X) == 0.0)
