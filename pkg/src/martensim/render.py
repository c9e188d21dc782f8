"""Rasterise microstructures and simulation results to RGB images (PPM P6)."""

import numpy as np

from .blocks import PlacedBlocks
from .core import HORIZONTAL, MINUS, PLUS, UNRESOLVED, VERTICAL, InvalidParameter

WHITE = (255, 255, 255)
COLORS = {
    (HORIZONTAL, PLUS): (255, 0, 255),  # magenta
    (HORIZONTAL, MINUS): (255, 165, 0),  # orange
    (VERTICAL, PLUS): (0, 255, 255),  # cyan
    (VERTICAL, MINUS): (0, 200, 0),  # green
}
SHADE_STEP = 12
SHADE_MAX_DEPTH = 5


def label_color(family, variant, depth=0):
    """RGB of a label; Unresolved is black lightened a little per depth level."""
    if family == UNRESOLVED:
        g = SHADE_STEP * min(int(depth), SHADE_MAX_DEPTH)
        return (g, g, g)
    try:
        return COLORS[(int(family), int(variant))]
    except KeyError:
        raise InvalidParameter(f"no colour for family {family}, variant {variant}") from None


def _palette(family, variant, depth):
    fam = np.asarray(family)
    var = np.asarray(variant)
    dep = np.asarray(depth)
    out = np.empty((len(fam), 3), dtype=np.uint8)
    for i in range(len(fam)):
        out[i] = label_color(fam[i], var[i], dep[i])
    return out


def pixel_centers(domain, width, height):
    """Pixel-centre coordinates, rows from top to bottom."""
    if width < 1 or height < 1:
        raise InvalidParameter("width and height must be >= 1")
    xs = domain.x0 + (np.arange(width) + 0.5) / width * domain.l1
    ys = domain.y1 - (np.arange(height) + 0.5) / height * domain.l2
    X, Y = np.meshgrid(xs, ys)
    return X.ravel(), Y.ravel()


def rasterize(ms, width, height):
    """(height, width, 3) uint8 image; unclaimed pixels are white."""
    px, py = pixel_centers(ms.domain, width, height)
    idx = ms.locate(px, py)
    pal = _palette(ms.family, ms.variant, ms.depth_labels)
    img = np.full((len(px), 3), 255, dtype=np.uint8)
    ok = idx >= 0
    img[ok] = pal[idx[ok]]
    return img.reshape(height, width, 3)


def rasterize_result(placed, lib, width, height, domain=None):
    """Image of a run: placed blocks in their colours, untransformed area white."""
    pb = PlacedBlocks(placed["rect"], placed["orient"], placed["ncop"], lib, domain)
    px, py = pixel_centers(pb.domain, width, height)
    _, region, ori = pb.locate(px, py)
    img = np.full((len(px), 3), 255, dtype=np.uint8)
    for o in (1, 2):
        z = lib.block(o)
        pal = _palette(z.family, z.variant, z.depth_labels)
        sel = (ori == o) & (region >= 0)
        img[sel] = pal[region[sel]]
    return img.reshape(height, width, 3)


def write_ppm(img, fh=None):
    """Binary P6 bytes of an (h, w, 3) uint8 image; also written to ``fh`` if given."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape[:2]
    data = f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()
    if fh is not None:
        if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
            with open(fh, "wb") as out:
                out.write(data)
        else:
            fh.write(data)
    return data


def read_ppm(data):
    """Minimal P6 reader (no comments), returns an (h, w, 3) uint8 array."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 255:
        raise ValueError("only maxval 255 is supported")
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
