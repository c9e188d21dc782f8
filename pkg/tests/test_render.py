import io

import numpy as np
import pytest

from martensim.blocks import build_block, microstructure_from_polygons
from martensim.core import HORIZONTAL, MINUS, PLUS, UNRESOLVED, VERTICAL, InvalidParameter
from martensim.fragment import SimConfig, run
from martensim.geometry import Rect
from martensim.render import (COLORS, label_color, rasterize, rasterize_result, read_ppm,
                              write_ppm)

UNIT = Rect(0.0, 0.0, 1.0, 1.0)


def reference_ppm_reader(data):
    """Independent P6 parser that tolerates any whitespace between header fields."""
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    assert magic == b"P6" and maxval == 255
    body = data[pos + 1:]
    assert len(body) == w * h * 3
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def test_one_white_pixel_bytes():
    img = np.full((1, 1, 3), 255, np.uint8)
    assert write_ppm(img) == b"P6\n1 1\n255\n\xff\xff\xff"


def test_write_to_file_and_stream(tmp_path):
    img = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    buf = io.BytesIO()
    data = write_ppm(img, buf)
    write_ppm(img, tmp_path / "a.ppm")
    assert buf.getvalue() == data == (tmp_path / "a.ppm").read_bytes()
    assert data.startswith(b"P6\n3 2\n255\n")


def test_depth_zero_block_is_black(lib):
    z = build_block(1, lib.m, lib.wells, 0.4, 0)
    img = rasterize(z, 20, 8)
    assert np.all(img == 0)


def test_two_band_twin():
    polys = [UNIT.polygon() * [0.5, 1], UNIT.polygon() * [0.5, 1] + [0.5, 0]]
    ms = microstructure_from_polygons(UNIT, polys, [np.eye(2), np.eye(2)],
                                      family=[VERTICAL, VERTICAL], variant=[PLUS, MINUS])
    for w, h in ((2, 1), (6, 3), (64, 17)):
        img = rasterize(ms, w, h)
        assert np.all(img[:, : w // 2] == COLORS[(VERTICAL, PLUS)])
        assert np.all(img[:, w // 2:] == COLORS[(VERTICAL, MINUS)])


def test_area_fraction_matches_pixels(lib):
    z = lib.z1
    w, h = 512, 512
    img = rasterize(z, w, h)
    a = z.areas / z.areas.sum()
    for fam, var in [(HORIZONTAL, PLUS), (HORIZONTAL, MINUS), (VERTICAL, PLUS), (VERTICAL, MINUS)]:
        sel = (z.family == fam) & (z.variant == var)
        frac = np.all(img == COLORS[(fam, var)], axis=-1).mean()
        assert abs(frac - a[sel].sum()) <= 2 / min(w, h)


def test_labels_majority_horizontal(lib):
    img = rasterize(lib.z1, 256, 103)
    px = img.reshape(-1, 3)
    hor = sum(np.all(px == COLORS[(HORIZONTAL, v)], axis=1).sum() for v in (PLUS, MINUS))
    ver = sum(np.all(px == COLORS[(VERTICAL, v)], axis=1).sum() for v in (PLUS, MINUS))
    assert hor > ver


def test_round_trip_and_determinism(lib):
    img = rasterize(lib.z2, 40, 100)
    data = write_ppm(img)
    assert data == write_ppm(rasterize(lib.z2, 40, 100))
    np.testing.assert_array_equal(reference_ppm_reader(data), img)
    np.testing.assert_array_equal(read_ppm(data), img)


def test_color_totality():
    for fam in (HORIZONTAL, VERTICAL):
        for var in (PLUS, MINUS):
            assert len(label_color(fam, var)) == 3
    shades = [label_color(UNRESOLVED, 0, d) for d in range(8)]
    assert shades[0] == (0, 0, 0) and shades[3][0] > shades[1][0]
    with pytest.raises(InvalidParameter):
        label_color(HORIZONTAL, 7)


def test_bad_size(lib):
    with pytest.raises(InvalidParameter):
        rasterize(lib.z1, 0, 5)


def test_rasterize_result(lib):
    r = run(SimConfig(max_steps=3, seed=4))
    img = rasterize_result(r.placed, lib, 64, 64)
    white = np.all(img == 255, axis=-1).mean()
    assert white == pytest.approx(r.volume, abs=4 / 64)
