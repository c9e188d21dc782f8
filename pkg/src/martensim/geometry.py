"""Rectangles, diamonds, aspect-ratio classes, the dyadic diamond packing and
a few convex-polygon helpers used to cut laminate bands."""

import math
from dataclasses import dataclass

import numpy as np

from .core import InvalidParameter

TOL = 1e-12


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    l1: float
    l2: float
    id: int = -1

    @property
    def x1(self):
        return self.x0 + self.l1

    @property
    def y1(self):
        return self.y0 + self.l2

    @property
    def area(self):
        return self.l1 * self.l2

    @property
    def aspect(self):
        return max(self.l1, self.l2) / min(self.l1, self.l2)

    @classmethod
    def from_corners(cls, x0, y0, x1, y1, id=-1):
        return cls(float(x0), float(y0), float(x1 - x0), float(y1 - y0), int(id))

    def corners(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def polygon(self):
        return np.array([[self.x0, self.y0], [self.x1, self.y0],
                         [self.x1, self.y1], [self.x0, self.y1]])


def rect_area(r):
    return r.l1 * r.l2


def rect_contains(r, x, y, strict=True):
    if strict:
        return r.x0 < x < r.x1 and r.y0 < y < r.y1
    return r.x0 - TOL <= x <= r.x1 + TOL and r.y0 - TOL <= y <= r.y1 + TOL


def rect_subdivide_quadrants(r):
    """Quadrants in the order lower-left, lower-right, upper-left, upper-right."""
    xm = r.x0 + 0.5 * r.l1
    ym = r.y0 + 0.5 * r.l2
    x1, y1 = r.x1, r.y1
    return [Rect.from_corners(r.x0, r.y0, xm, ym), Rect.from_corners(xm, r.y0, x1, ym),
            Rect.from_corners(r.x0, ym, xm, y1), Rect.from_corners(xm, ym, x1, y1)]


def quadrant_of(r, x, y):
    """Index of the quadrant holding (x, y); midline ties go to the lower index."""
    xm = r.x0 + 0.5 * r.l1
    ym = r.y0 + 0.5 * r.l2
    return int(x > xm) + 2 * int(y > ym)


@dataclass(frozen=True)
class Diamond:
    center: tuple
    d1: float
    d2: float
    scale_index: int = 0

    @property
    def area(self):
        return self.d1 * self.d2 / 2

    @property
    def long_axis(self):
        return max(self.d1, self.d2)

    def polygon(self):
        cx, cy = self.center
        h1, h2 = self.d1 / 2, self.d2 / 2
        return np.array([[cx - h1, cy], [cx, cy - h2], [cx + h1, cy], [cx, cy + h2]])


# ---------------------------------------------------------------------------
# aspect-ratio classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BucketParams:
    lam: float
    delta: float
    J: int
    exact: bool

    def interval(self, j):
        return (self.lam ** (-j - 0.5) / self.delta, self.lam ** (-j + 0.5) / self.delta)


def _class_of(L, lam, delta):
    u = -math.log(L * delta) / math.log(lam) - 0.5
    j = math.ceil(u)
    # settle rounding at the interval edges with the defining inequality
    lo, hi = lam ** (-j - 0.5) / delta, lam ** (-j + 0.5) / delta
    if L < lo:
        j += 1
    elif L >= hi:
        j -= 1
    return j


def make_bucket_params(lam, delta):
    lam = float(lam)
    delta = float(delta)
    if not lam > 1 or not 0 < delta < 1:
        raise InvalidParameter("need lambda > 1 and 0 < delta < 1")
    J = _class_of(1.0, lam, delta) + 1
    exact = abs(delta - lam ** (-J + 0.5)) <= 1e-12
    return BucketParams(lam, delta, J, exact)


def rect_class(r, bp):
    L = r.aspect if isinstance(r, Rect) else float(r)
    return _class_of(L, bp.lam, bp.delta)


def rect_class_array(L, bp):
    """Vectorised class index for an array of aspect ratios."""
    L = np.asarray(L, dtype=float)
    lam, delta = bp.lam, bp.delta
    j = np.ceil(-np.log(L * delta) / math.log(lam) - 0.5)
    lo = lam ** (-j - 0.5) / delta
    hi = lam ** (-j + 0.5) / delta
    j = j + (L < lo) - (L >= hi)
    return j.astype(np.int64)


def tail_threshold(C, lam, target):
    """Largest integer J1 with C lam^J1 / (1 - 1/lam) <= target."""
    return math.floor(math.log(target * (1 - 1 / lam) / C) / math.log(lam))


# ---------------------------------------------------------------------------
# dyadic diamond packing
# ---------------------------------------------------------------------------
# Worked in the unit square, where every diamond is a square rotated by 45
# degrees, then mapped to the rectangle by the axis-aligned affine map (which
# keeps diamonds diamonds and scales all areas by |r|). The pieces left after
# a generation are of two kinds:
#   corner triangle (c, sx, sy, a): right angle at c, legs a along the axes;
#       takes two diamonds of diagonal a/2 and leaves one corner triangle of
#       leg a/2 plus two edge triangles of hypotenuse a/2;
#   edge triangle (p, axis, sn, h): hypotenuse of length h on an axis-parallel
#       line starting at p, apex on side sn; takes one diamond of diagonal h/2
#       and leaves two edge triangles of hypotenuse h/2.
# Every piece pending at generation n yields diamonds of diagonal 2^(-n-1).


@dataclass
class Packing:
    rect: Rect
    diamonds: list
    leftover: list  # triangles (3x2 arrays) not covered by any diamond
    counts: list  # new diamonds per generation

    @property
    def covered_fraction(self):
        return sum(d.area for d in self.diamonds) / self.rect.area


def _corner_pieces(c, sx, sy, a):
    cx, cy = c
    dia = [((cx + sx * a / 4, cy + sy * a / 2), a / 2), ((cx + sx * a / 2, cy + sy * a / 4), a / 2)]
    kids = [("corner", (c, sx, sy, a / 2)),
            ("edge", ((cx + sx * a / 2, cy), 0, sx, sy, a / 2)),
            ("edge", ((cx, cy + sy * a / 2), 1, sy, sx, a / 2))]
    return dia, kids


def _edge_pieces(p, axis, sd, sn, h):
    # hypotenuse from p to p + sd*h along `axis`; apex toward sn on the other axis
    px, py = p
    if axis == 0:
        mid = (px + sd * h / 2, py)
        cen = (mid[0], py + sn * h / 4)
        kids = [("edge", (p, 0, sd, sn, h / 2)), ("edge", ((px + sd * h / 2, py), 0, sd, sn, h / 2))]
    else:
        mid = (px, py + sd * h / 2)
        cen = (px + sn * h / 4, mid[1])
        kids = [("edge", (p, 1, sd, sn, h / 2)), ("edge", ((px, py + sd * h / 2), 1, sd, sn, h / 2))]
    return [(cen, h / 2)], kids


def _piece_triangle(kind, args):
    if kind == "corner":
        (cx, cy), sx, sy, a = args
        return np.array([[cx, cy], [cx + sx * a, cy], [cx, cy + sy * a]])
    p, axis, sd, sn, h = args
    px, py = p
    if axis == 0:
        return np.array([[px, py], [px + sd * h, py], [px + sd * h / 2, py + sn * h / 2]])
    return np.array([[px, py], [px, py + sd * h], [px + sn * h / 2, py + sd * h / 2]])


def _ccw(tri):
    x, y = tri[:, 0], tri[:, 1]
    a = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return tri if a > 0 else tri[::-1].copy()


def dyadic_diamond_packing(r, max_n, with_leftover=False):
    """Greedy dyadic packing of ``r`` by diamonds with diagonals along the axes.

    Generation 0 is the inscribed diamond (half of |r|); every later
    generation n >= 1 adds 8 * 2^(n-1) diamonds whose diagonals are 2^(-n-1)
    times the sides of r, and halves the uncovered area, so after generation
    N the covered fraction is 1 - 2^(-N-1).
    """
    if int(max_n) != max_n or max_n < 0:
        raise InvalidParameter("max_n must be a non-negative integer")
    max_n = int(max_n)
    sx_, sy_ = r.l1, r.l2

    def to_rect(pt):
        return (r.x0 + pt[0] * sx_, r.y0 + pt[1] * sy_)

    diamonds = [Diamond(to_rect((0.5, 0.5)), sx_, sy_, 0)]
    counts = [1]
    pending = [("corner", ((0.0, 0.0), 1, 1, 0.5)), ("corner", ((1.0, 0.0), -1, 1, 0.5)),
               ("corner", ((0.0, 1.0), 1, -1, 0.5)), ("corner", ((1.0, 1.0), -1, -1, 0.5))]
    for n in range(1, max_n + 1):
        nxt = []
        made = 0
        for kind, args in pending:
            if kind == "corner":
                dia, kids = _corner_pieces(*args)
            else:
                dia, kids = _edge_pieces(*args)
            for cen, dg in dia:
                diamonds.append(Diamond(to_rect(cen), dg * sx_, dg * sy_, n))
                made += 1
            nxt.extend(kids)
        counts.append(made)
        pending = nxt
    leftover = []
    if with_leftover:
        for kind, args in pending:
            tri = _piece_triangle(kind, args)
            tri = np.column_stack([r.x0 + tri[:, 0] * sx_, r.y0 + tri[:, 1] * sy_])
            leftover.append(_ccw(tri))
    return Packing(r, diamonds, leftover, counts)


# ---------------------------------------------------------------------------
# convex polygons
# ---------------------------------------------------------------------------


def poly_area(p):
    p = np.asarray(p, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_axis(poly, axis, c, keep_below):
    """Intersect a convex polygon with {x[axis] <= c} (or >= c)."""
    out = []
    n = len(poly)
    for i in range(n):
        p = poly[i]
        q = poly[(i + 1) % n]
        fp = p[axis] - c if keep_below else c - p[axis]
        fq = q[axis] - c if keep_below else c - q[axis]
        if fp <= 0:
            out.append((p[0], p[1]))
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            pt = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
            pt[axis] = c
            out.append((pt[0], pt[1]))
    if len(out) < 3:
        return np.zeros((0, 2))
    res = np.array(out)
    # drop repeated vertices
    keep = np.ones(len(res), dtype=bool)
    for i in range(len(res)):
        if np.all(res[i] == res[(i + 1) % len(res)]):
            keep[i] = False
    res = res[keep]
    return res if len(res) >= 3 else np.zeros((0, 2))


def clip_slab(poly, axis, lo, hi):
    return clip_axis(clip_axis(poly, axis, lo, False), axis, hi, True)


def cut_at_fraction(poly, axis, frac):
    """Coordinate c along ``axis`` with area(poly and {x[axis] <= c}) = frac * area."""
    poly = np.asarray(poly, dtype=float)
    total = poly_area(poly)
    target = frac * total
    xs = np.unique(poly[:, axis])
    below = [0.0]
    for x in xs[1:]:
        below.append(poly_area(clip_axis(poly, axis, x, True)))
    below[-1] = total
    k = int(np.searchsorted(below, target))
    k = min(max(k, 1), len(xs) - 1)
    a, b = xs[k - 1], xs[k]
    fa, fb = below[k - 1], below[k]
    m = 0.5 * (a + b)
    fm = poly_area(clip_axis(poly, axis, m, True))
    # the area is quadratic on [a, b]: interpolate through three points
    h = b - a
    s = np.array([0.0, 0.5, 1.0])
    coef = np.polyfit(s, [fa, fm, fb], 2)
    coef[-1] -= target
    roots = np.roots(coef)
    best = None
    for rt in roots:
        if abs(rt.imag) < 1e-9 and -1e-9 <= rt.real <= 1 + 1e-9:
            best = min(max(rt.real, 0.0), 1.0)
            break
    if best is None:
        best = (target - fa) / (fb - fa) if fb > fa else 0.5
    c = a + best * h
    return c


def pad_polygons(polys, nv=None):
    """Stack polygons into an (n, V, 2) array padded by repeating the last vertex."""
    if nv is None:
        nv = max(len(p) for p in polys) if polys else 3
    out = np.empty((len(polys), nv, 2))
    for i, p in enumerate(polys):
        k = len(p)
        out[i, :k] = p
        out[i, k:] = p[-1]
    return out
