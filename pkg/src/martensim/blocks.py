"""Finite-depth building blocks and the Microstructure container.

A Microstructure is a partition of a rectangle into convex polygons, each
carrying a constant gradient and a label. Only the gradient field is ever
stored; the displacement itself is never reconstructed.

Block construction on the model rectangle (0,1)x(0,delta) (Horizontal) or
(0,delta)x(0,1) (Vertical):

* pack the rectangle dyadically with diamonds (depth + 1 generations);
* in every diamond, generation t keeps two tip triangles of axial length
  d * 2^(-t-3) at the ends of the long diagonal and laminates the rest:
  an outer rank-one split of M onto the first-order laminate boundary,
  then a twin split of each side into exact well matrices;
* uncovered packing triangles and the last tips stay Unresolved with M.

Every split cuts exact area fractions, so the area-weighted mean gradient
equals M up to rounding at every depth.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (HORIZONTAL, MINUS, NONE, PLUS, UNRESOLVED, VERTICAL, FAMILY_NAMES,
                   VARIANT_NAMES, GradientLabel, InvalidParameter, MartensimError,
                   lamination_split, twin_split)
from .geometry import (Rect, clip_axis, clip_slab, cut_at_fraction, dyadic_diamond_packing,
                       pad_polygons, poly_area)

SHAPE_RECT, SHAPE_DIAMOND, SHAPE_TRIANGLE, SHAPE_POLYGON = range(4)
SHAPE_NAMES = ("rect", "diamond", "triangle", "polygon")
ORIENTATIONS = {"Horizontal": 1, "Vertical": 2, "H": 1, "V": 2, 1: 1, 2: 2}


class InvalidPlacement(MartensimError, ValueError):
    pass


class GeometryError(MartensimError, ValueError):
    pass


def orientation_code(o):
    try:
        return ORIENTATIONS[o]
    except KeyError:
        raise InvalidParameter(f"unknown orientation {o!r}") from None


class GridIndex:
    """Uniform-grid candidate lists for point location among convex polygons."""

    def __init__(self, verts, bounds, gn=None):
        n = len(verts)
        x0, y0, x1, y1 = bounds
        if gn is None:
            gn = int(min(1024, max(4, 2 * np.sqrt(max(n, 1)))))
        self.gn = gn
        self.gx0 = float(x0)
        self.gy0 = float(y0)
        self.gdx = float(x1 - x0) / gn
        self.gdy = float(y1 - y0) / gn
        self.verts = np.ascontiguousarray(verts, dtype=np.float64)
        if n == 0:
            self.cell_start = np.zeros(gn * gn + 1, dtype=np.int64)
            self.cell_items = np.zeros(1, dtype=np.int64)
            return
        lo = self.verts.min(axis=1)
        hi = self.verts.max(axis=1)
        pad = 1e-12 * max(x1 - x0, y1 - y0)
        ix0 = np.clip(np.floor((lo[:, 0] - pad - self.gx0) / self.gdx), 0, gn - 1).astype(np.int64)
        ix1 = np.clip(np.floor((hi[:, 0] + pad - self.gx0) / self.gdx), 0, gn - 1).astype(np.int64)
        iy0 = np.clip(np.floor((lo[:, 1] - pad - self.gy0) / self.gdy), 0, gn - 1).astype(np.int64)
        iy1 = np.clip(np.floor((hi[:, 1] + pad - self.gy0) / self.gdy), 0, gn - 1).astype(np.int64)
        w = ix1 - ix0 + 1
        cnt = w * (iy1 - iy0 + 1)
        pid = np.repeat(np.arange(n), cnt)
        first = np.repeat(np.cumsum(cnt) - cnt, cnt)
        local = np.arange(pid.size) - first
        cx = ix0[pid] + local % w[pid]
        cy = iy0[pid] + local // w[pid]
        cell = cy * gn + cx
        order = np.lexsort((pid, cell))
        self.cell_items = np.ascontiguousarray(pid[order])
        self.cell_start = np.searchsorted(cell[order], np.arange(gn * gn + 1)).astype(np.int64)

    def locate(self, x, y):
        return kernels.locate(np.ascontiguousarray(x, dtype=np.float64),
                              np.ascontiguousarray(y, dtype=np.float64),
                              self.verts, self.cell_start, self.cell_items,
                              self.gx0, self.gy0, self.gdx, self.gdy, self.gn)


class Microstructure:
    """Piecewise-constant gradient field on a partition of ``domain``."""

    def __init__(self, domain, verts, nverts, matrices, family, variant, depth_labels,
                 shapes, depth=0, diamonds=None, rhombi=None, long_axis=0):
        self.domain = domain
        self.verts = np.asarray(verts, dtype=float)
        self.nverts = np.asarray(nverts, dtype=np.int64)
        self.matrices = np.asarray(matrices, dtype=float).reshape(-1, 2, 2)
        self.family = np.asarray(family, dtype=np.int8)
        self.variant = np.asarray(variant, dtype=np.int8)
        self.depth_labels = np.asarray(depth_labels, dtype=np.int16)
        self.shapes = np.asarray(shapes, dtype=np.int8)
        self.depth = int(depth)
        # packing diamonds as rows (cx, cy, d1, d2, generation)
        self.diamonds = np.zeros((0, 5)) if diamonds is None else np.asarray(diamonds, dtype=float)
        # long axes of the laminated rhombus constructions, and the axis they lie on
        self.rhombi = np.zeros(0) if rhombi is None else np.asarray(rhombi, dtype=float)
        self.long_axis = int(long_axis)
        self._index = None

    def __len__(self):
        return len(self.matrices)

    @property
    def areas(self):
        x = self.verts[:, :, 0]
        y = self.verts[:, :, 1]
        return 0.5 * ((x * np.roll(y, -1, axis=1)).sum(1) - (y * np.roll(x, -1, axis=1)).sum(1))

    def mean_gradient(self):
        a = self.areas
        return (self.matrices * a[:, None, None]).sum(0) / a.sum()

    def unresolved_fraction(self):
        a = self.areas
        return float(a[self.family == UNRESOLVED].sum() / a.sum())

    def label(self, i):
        return GradientLabel(self.matrices[i], int(self.family[i]), int(self.variant[i]),
                             int(self.depth_labels[i]))

    def polygon(self, i):
        return self.verts[i, :self.nverts[i]]

    def regions(self):
        for i in range(len(self)):
            yield SHAPE_NAMES[self.shapes[i]], self.polygon(i), self.label(i)

    @property
    def index(self):
        if self._index is None:
            d = self.domain
            self._index = GridIndex(self.verts, (d.x0, d.y0, d.x1, d.y1))
        return self._index

    def locate(self, x, y):
        return self.index.locate(x, y)

    def transformed(self, sx, sy, ox, oy, domain=None):
        """Image under x -> (ox + sx x, oy + sy y) with sx, sy > 0; labels unchanged."""
        v = self.verts.copy()
        v[:, :, 0] = ox + sx * v[:, :, 0]
        v[:, :, 1] = oy + sy * v[:, :, 1]
        dia = self.diamonds.copy()
        if len(dia):
            dia[:, 0] = ox + sx * dia[:, 0]
            dia[:, 1] = oy + sy * dia[:, 1]
            dia[:, 2] *= sx
            dia[:, 3] *= sy
        if domain is None:
            d = self.domain
            domain = Rect(ox + sx * d.x0, oy + sy * d.y0, sx * d.l1, sy * d.l2)
        rh = self.rhombi * (sx if self.long_axis == 0 else sy)
        return Microstructure(domain, v, self.nverts, self.matrices, self.family, self.variant,
                              self.depth_labels, self.shapes, self.depth, dia, rh, self.long_axis)

    @staticmethod
    def concat(parts, domain):
        nv = max(p.verts.shape[1] for p in parts)
        verts = []
        for p in parts:
            v = p.verts
            if v.shape[1] < nv:
                v = np.concatenate([v, np.repeat(v[:, -1:], nv - v.shape[1], axis=1)], axis=1)
            verts.append(v)
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        return Microstructure(domain, np.concatenate(verts), cat("nverts"), cat("matrices"),
                              cat("family"), cat("variant"), cat("depth_labels"), cat("shapes"),
                              max(p.depth for p in parts), cat("diamonds"), cat("rhombi"),
                              parts[0].long_axis)

    # -- serialisation -----------------------------------------------------

    def to_jsonl(self):
        lines = []
        for i in range(len(self)):
            rec = {
                "shape_type": SHAPE_NAMES[self.shapes[i]],
                "coords": [float(c) for c in self.polygon(i).ravel()],
                "label": {"family": FAMILY_NAMES[self.family[i]],
                          "variant": VARIANT_NAMES[self.variant[i]],
                          "depth": int(self.depth_labels[i])},
                "matrix": [float(c) for c in self.matrices[i].ravel()],
            }
            lines.append(json.dumps(rec))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text, domain, depth=0):
        polys, mats, fam, var, dep, shp = [], [], [], [], [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            polys.append(np.array(rec["coords"], dtype=float).reshape(-1, 2))
            mats.append(rec["matrix"])
            fam.append(FAMILY_NAMES.index(rec["label"]["family"]))
            var.append(VARIANT_NAMES.index(rec["label"]["variant"]))
            dep.append(rec["label"]["depth"])
            shp.append(SHAPE_NAMES.index(rec["shape_type"]))
        return cls(domain, pad_polygons(polys), [len(p) for p in polys], mats, fam, var, dep,
                   shp, depth)


def microstructure_from_polygons(domain, polys, matrices, family=None, variant=None,
                                 depth_labels=None, shapes=None, depth=0, diamonds=None,
                                 rhombi=None, long_axis=0):
    n = len(polys)
    z = np.zeros(n, dtype=np.int64)
    if shapes is None:
        shapes = [SHAPE_RECT if len(p) == 4 and _is_axis_rect(p) else SHAPE_POLYGON for p in polys]
    return Microstructure(domain, pad_polygons([np.asarray(p, float) for p in polys]),
                          [len(p) for p in polys], matrices,
                          z if family is None else family, z if variant is None else variant,
                          z if depth_labels is None else depth_labels, shapes, depth, diamonds,
                          rhombi, long_axis)


def _is_axis_rect(p):
    p = np.asarray(p)
    return len(np.unique(p[:, 0])) == 2 and len(np.unique(p[:, 1])) == 2


# ---------------------------------------------------------------------------
# block construction
# ---------------------------------------------------------------------------


def model_domain(orientation, delta):
    return Rect(0.0, 0.0, 1.0, delta) if orientation_code(orientation) == 1 else Rect(0.0, 0.0, delta, 1.0)


def _fraction_cuts(poly, axis, fracs):
    cuts = [poly[:, axis].min()]
    cuts += [cut_at_fraction(poly, axis, f) for f in fracs]
    cuts.append(poly[:, axis].max())
    return cuts


def _alternating_pieces(poly, axis, share, pairs):
    """Cut ``poly`` into 2*pairs slabs along ``axis`` with area shares share, 1-share, ..."""
    fr = []
    for k in range(pairs):
        fr += [(k + share) / pairs, (k + 1) / pairs]
    cuts = _fraction_cuts(poly, axis, fr[:-1])
    out = []
    for i in range(2 * pairs):
        piece = clip_slab(poly, axis, cuts[i], cuts[i + 1])
        if len(piece) >= 3:
            out.append((piece, i % 2))
    return out


def _laminate(poly, m, wells, orient, pairs, gen, sink):
    """Resolve a polygon carrying the interior gradient m into exact wells."""
    outer_axis = 0 if orient == 1 else 1  # normal e1 for Horizontal, e2 for Vertical
    inner_axis = 1 - outer_axis
    normals = ("e1", "e2")
    gp, gm, mu = lamination_split(m, normals[outer_axis], wells)
    family = HORIZONTAL if orient == 1 else VERTICAL
    for piece, side in _alternating_pieces(poly, outer_axis, mu, pairs):
        g = gp if side == 0 else gm
        wp, wm, nu = twin_split(g, normals[inner_axis], wells)
        for sub, s2 in _alternating_pieces(piece, inner_axis, nu, pairs):
            sink.append((sub, wp if s2 == 0 else wm, family, PLUS if s2 == 0 else MINUS, gen,
                         SHAPE_POLYGON))


def _refine_diamond(dia, m, wells, orient, depth, pairs, sink, rhombi):
    poly = dia.polygon()
    ax = 0 if orient == 1 else 1
    cx, cy = dia.center
    c = cx if ax == 0 else cy
    half = (dia.d1 if ax == 0 else dia.d2) / 2
    full = 2 * half
    lo_end, hi_end = c - half, c + half
    tau_prev = None
    for t in range(1, depth + 1):
        tau = full * 2.0 ** (-t - 3)
        if t == 1:
            core = clip_slab(poly, ax, lo_end + tau, hi_end - tau)
            _laminate(core, m, wells, orient, pairs, t, sink)
            rhombi.append(full)
        else:
            rhombi += [tau_prev, tau_prev]
            for a, b in ((lo_end + tau, lo_end + tau_prev), (hi_end - tau_prev, hi_end - tau)):
                core = clip_slab(poly, ax, a, b)
                if len(core) >= 3:
                    _laminate(core, m, wells, orient, 1, t, sink)
        tau_prev = tau
    for tip in (clip_axis(poly, ax, lo_end + tau_prev, True),
                clip_axis(poly, ax, hi_end - tau_prev, False)):
        if len(tip) >= 3:
            sink.append((tip, m, UNRESOLVED, NONE, depth, SHAPE_TRIANGLE))


def build_block(orientation, m, wells, delta, depth=3, laminate_pairs=2, packing_generations=None):
    """Model block for one orientation; see the module docstring for the recipe."""
    orient = orientation_code(orientation)
    if depth < 0:
        raise InvalidParameter("depth must be >= 0")
    if not 0 < delta < 1:
        raise InvalidParameter("delta must lie in (0, 1)")
    mm = m.m if hasattr(m, "m") else np.asarray(m, dtype=float)
    dom = model_domain(orient, delta)
    if depth == 0:
        return microstructure_from_polygons(dom, [dom.polygon()], [mm], family=[UNRESOLVED],
                                            variant=[NONE], depth_labels=[0],
                                            shapes=[SHAPE_RECT], depth=0)
    gens = depth + 1 if packing_generations is None else int(packing_generations)
    pk = dyadic_diamond_packing(dom, gens, with_leftover=True)
    sink = []
    rhombi = []
    for dia in pk.diamonds:
        _refine_diamond(dia, mm, wells, orient, depth, laminate_pairs, sink, rhombi)
    for tri in pk.leftover:
        sink.append((tri, mm, UNRESOLVED, NONE, 0, SHAPE_TRIANGLE))
    polys = [s[0] for s in sink]
    dias = np.array([[d.center[0], d.center[1], d.d1, d.d2, d.scale_index] for d in pk.diamonds])
    return microstructure_from_polygons(
        dom, polys, np.array([s[1] for s in sink]), family=[s[2] for s in sink],
        variant=[s[3] for s in sink], depth_labels=[s[4] for s in sink],
        shapes=[s[5] for s in sink], depth=depth, diamonds=dias, rhombi=rhombi,
        long_axis=0 if orient == 1 else 1)


def rhombus_lengths(packing_generations, depth, min_scale=0.0):
    """Long axes of all rhombus constructions of a model block, without building it.

    Uses the same schedule as ``build_block``: the packing diamond of
    generation n has long axis 2^(-n-1) (1 for n = 0) and count 1 or
    8 * 2^(n-1); its first core is the diamond itself, generation t >= 2 adds
    two tip cores of axial length 2^(-t-2) times the diamond. With
    ``min_scale`` > 0 the depth is extended per diamond until the cores drop
    below ``min_scale`` and ``depth`` only caps it.
    """
    vals, mult = [], []
    for n in range(packing_generations + 1):
        d = 1.0 if n == 0 else 2.0 ** (-n - 1)
        cnt = 1 if n == 0 else 8 * 2 ** (n - 1)
        if d < min_scale:
            break
        vals.append(d)
        mult.append(cnt)
        for t in range(2, depth + 1):
            tau = d * 2.0 ** (-t - 2)
            if tau < min_scale:
                break
            vals.append(tau)
            mult.append(2 * cnt)
    return np.repeat(np.array(vals), np.array(mult, dtype=np.int64))


def depth_extended_lengths(min_scale):
    """Rhombus long axes of a block refined until every construction is below ``min_scale``."""
    gens = int(np.floor(-np.log2(min_scale))) + 1
    return rhombus_lengths(gens, 10 ** 6, min_scale)


@dataclass
class BlockLibrary:
    z1: Microstructure
    z2: Microstructure
    delta: float
    m: object
    depth: int
    wells: object

    def block(self, orientation):
        return self.z1 if orientation_code(orientation) == 1 else self.z2


_LIB_CACHE = {}


def make_library(m, wells, delta, depth=3, laminate_pairs=2):
    key = (float(delta), m.m.tobytes(), float(wells.gamma), int(depth), int(laminate_pairs))
    lib = _LIB_CACHE.get(key)
    if lib is None:
        z1 = build_block(1, m, wells, delta, depth, laminate_pairs)
        z2 = build_block(2, m, wells, delta, depth, laminate_pairs)
        lib = BlockLibrary(z1, z2, float(delta), m, int(depth), wells)
        _LIB_CACHE[key] = lib
    return lib


def copy_frames(orientation, target, n_copies, delta, allow_stretch=False, tol=1e-9):
    """Affine frames (sx, sy, ox, oy) of the copies of the model block filling ``target``."""
    orient = orientation_code(orientation)
    n = int(n_copies)
    if n < 1:
        raise InvalidPlacement("n_copies must be >= 1")
    along = target.l1 if orient == 1 else target.l2
    across = target.l2 if orient == 1 else target.l1
    lam = along / n
    lam_perp = across / delta
    if abs(lam_perp - lam) > tol * max(1.0, lam) and not allow_stretch:
        raise InvalidPlacement(
            f"target {target} is not {n} copies of a scaled model domain (delta={delta})")
    frames = []
    for k in range(n):
        if orient == 1:
            frames.append((lam, lam_perp, target.x0 + k * lam, target.y0))
        else:
            frames.append((lam_perp, lam, target.x0, target.y0 + k * lam))
    return frames


def instantiate_block(lib, orientation, target, n_copies=1, allow_stretch=False):
    """Rescale, translate and stack the model block onto ``target``."""
    z = lib.block(orientation)
    parts = [z.transformed(*f) for f in copy_frames(orientation, target, n_copies, lib.delta,
                                                     allow_stretch)]
    return Microstructure.concat(parts, target)


class PlacedBlocks:
    """Blocks instantiated on placed bands, located without materialising them.

    A point is first located among the band rectangles, then mapped to the
    model-block coordinates of its copy and located in the library block.
    """

    def __init__(self, rects, orient, ncop, lib, domain=None):
        self.rects = np.asarray(rects, dtype=float).reshape(-1, 4)
        self.orient = np.asarray(orient, dtype=np.int64)
        self.ncop = np.asarray(ncop, dtype=np.int64)
        self.lib = lib
        self.domain = domain or Rect(0.0, 0.0, 1.0, 1.0)
        self._index = None

    def __len__(self):
        return len(self.rects)

    def _band_index(self):
        if self._index is None:
            r = self.rects
            polys = np.stack([r[:, [0, 1]], r[:, [2, 1]], r[:, [2, 3]], r[:, [0, 3]]], axis=1)
            d = self.domain
            self._index = GridIndex(polys, (d.x0, d.y0, d.x1, d.y1))
        return self._index

    def locate(self, px, py):
        """(band index, region index in the library block, orientation); -1 if none."""
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        n = len(px)
        band = np.full(n, -1, dtype=np.int64)
        region = np.full(n, -1, dtype=np.int64)
        ori = np.zeros(n, dtype=np.int64)
        if len(self.rects) == 0 or n == 0:
            return band, region, ori
        b = self._band_index().locate(px, py)
        hit = np.nonzero(b >= 0)[0]
        if len(hit) == 0:
            return band, region, ori
        bi = b[hit]
        r = self.rects[bi]
        o = self.orient[bi]
        nc = self.ncop[bi]
        lx = px[hit] - r[:, 0]
        ly = py[hit] - r[:, 1]
        l1 = r[:, 2] - r[:, 0]
        l2 = r[:, 3] - r[:, 1]
        along = np.where(o == 1, lx, ly)
        L = np.where(o == 1, l1, l2) / nc
        c = np.clip(np.floor(along / L), 0, nc - 1)
        t = np.clip((along - c * L) / L, 0.0, 1.0)
        across = np.clip(np.where(o == 1, ly / l2, lx / l1), 0.0, 1.0) * self.lib.delta
        mx = np.where(o == 1, t, across)
        my = np.where(o == 1, across, t)
        band[hit] = bi
        ori[hit] = o
        for oo in (1, 2):
            sel = o == oo
            if sel.any():
                region[hit[sel]] = self.lib.block(oo).locate(mx[sel], my[sel])
        return band, region, ori
