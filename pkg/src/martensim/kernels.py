"""Hot loops, each in two flavours.

Every kernel exists as a numba ``@njit`` loop and as a vectorised numpy
twin with the same signature and bit-identical results. The active set is
chosen once at import time from ``MARTENSIM_BACKEND`` (``numba`` or
``numpy``); numba is the default when it imports. Both sets stay reachable
through :data:`BACKENDS` so the benchmark and the tests can compare them.
"""

import contextlib
import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------------------
# Philox4x64-10
# ---------------------------------------------------------------------------

PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
PHILOX_M1 = np.uint64(0xCA5A826395121157)
PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S12 = np.uint64(12)
_INV52 = 1.0 / 4503599627370496.0


def _mulhilo_np(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _MASK32) + (hl & _MASK32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


def philox_np(c0, c1, c2, c3, k0, k1):
    """Philox4x64-10 block function on arrays of counters. Returns (n, 4) uint64."""
    c0 = np.asarray(c0, dtype=np.uint64).copy()
    c1 = np.asarray(c1, dtype=np.uint64).copy()
    c2 = np.asarray(c2, dtype=np.uint64).copy()
    c3 = np.asarray(c3, dtype=np.uint64).copy()
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    with np.errstate(over="ignore"):
        for r in range(10):
            if r:
                k0 = k0 + PHILOX_W0
                k1 = k1 + PHILOX_W1
            hi0, lo0 = _mulhilo_np(PHILOX_M0, c0)
            hi1, lo1 = _mulhilo_np(PHILOX_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


@njit(cache=True, nogil=True)
def _mulhilo_nb(a, b):
    m = np.uint64(0xFFFFFFFF)
    s = np.uint64(32)
    a_lo = a & m
    a_hi = a >> s
    b_lo = b & m
    b_hi = b >> s
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> s) + (lh & m) + (hl & m)
    hi = hh + (lh >> s) + (hl >> s) + (mid >> s)
    return hi, a * b


@njit(cache=True, nogil=True)
def _philox_nb(c0, c1, c2, c3, k0, k1):
    n = c0.shape[0]
    out = np.empty((n, 4), dtype=np.uint64)
    m0 = np.uint64(0xD2E7470EE14C6C93)
    m1 = np.uint64(0xCA5A826395121157)
    w0 = np.uint64(0x9E3779B97F4A7C15)
    w1 = np.uint64(0xBB67AE8584CAA73B)
    for i in range(n):
        x0 = c0[i]
        x1 = c1[i]
        x2 = c2[i]
        x3 = c3[i]
        q0 = k0
        q1 = k1
        for r in range(10):
            if r > 0:
                q0 = q0 + w0
                q1 = q1 + w1
            hi0, lo0 = _mulhilo_nb(m0, x0)
            hi1, lo1 = _mulhilo_nb(m1, x2)
            x0, x1, x2, x3 = hi1 ^ x1 ^ q0, lo1, hi0 ^ x3 ^ q1, lo0
        out[i, 0] = x0
        out[i, 1] = x1
        out[i, 2] = x2
        out[i, 3] = x3
    return out


def philox_nb(c0, c1, c2, c3, k0, k1):
    n = np.broadcast(np.asarray(c0), np.asarray(c1), np.asarray(c2), np.asarray(c3)).shape
    arrs = [np.ascontiguousarray(np.broadcast_to(np.asarray(c, dtype=np.uint64), n)).ravel()
            for c in (c0, c1, c2, c3)]
    out = _philox_nb(arrs[0], arrs[1], arrs[2], arrs[3], np.uint64(k0), np.uint64(k1))
    return out.reshape(n + (4,))


def to_unit(u):
    """Map uint64 words to doubles strictly inside (0, 1)."""
    # 52 bits so the largest value, 1 - 2^-53, is still representable below 1
    return ((u >> _S12).astype(np.float64) + 0.5) * _INV52


# ---------------------------------------------------------------------------
# Point location in a set of convex polygons through a uniform grid index
# ---------------------------------------------------------------------------
# Polygons are stored as (n, V, 2) arrays, counter-clockwise, padded by
# repeating the last vertex, so every polygon is a closed loop of V edges.


def _inside_np(verts, px, py):
    # verts: (m, V, 2) for m candidate polygons, px/py: (m,)
    x0 = verts[:, :, 0]
    y0 = verts[:, :, 1]
    x1 = np.roll(x0, -1, axis=1)
    y1 = np.roll(y0, -1, axis=1)
    cross = (x1 - x0) * (py[:, None] - y0) - (y1 - y0) * (px[:, None] - x0)
    return np.all(cross >= 0.0, axis=1)


def locate_np(px, py, verts, cell_start, cell_items, gx0, gy0, gdx, gdy, gn):
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    out = np.full(px.shape[0], -1, dtype=np.int64)
    ix = np.floor((px - gx0) / gdx)
    iy = np.floor((py - gy0) / gdy)
    ok = (ix >= 0) & (ix < gn) & (iy >= 0) & (iy < gn)
    cell = np.where(ok, iy * gn + ix, 0).astype(np.int64)
    start = np.where(ok, cell_start[cell], 0)
    count = np.where(ok, cell_start[cell + 1] - cell_start[cell], 0)
    todo = np.nonzero(count > 0)[0]
    slot = 0
    while todo.size:
        cand = cell_items[start[todo] + slot]
        hit = _inside_np(verts[cand], px[todo], py[todo])
        out[todo[hit]] = cand[hit]
        slot += 1
        todo = todo[(~hit) & (count[todo] > slot)]
    return out


@njit(cache=True, nogil=True)
def _locate_nb(px, py, verts, cell_start, cell_items, gx0, gy0, gdx, gdy, gn):
    n = px.shape[0]
    nv = verts.shape[1]
    out = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        fx = np.floor((px[i] - gx0) / gdx)
        fy = np.floor((py[i] - gy0) / gdy)
        if fx < 0 or fx >= gn or fy < 0 or fy >= gn:
            continue
        cell = int(fy) * gn + int(fx)
        for s in range(cell_start[cell], cell_start[cell + 1]):
            q = cell_items[s]
            inside = True
            for e in range(nv):
                f = e + 1 if e + 1 < nv else 0
                x0 = verts[q, e, 0]
                y0 = verts[q, e, 1]
                cr = (verts[q, f, 0] - x0) * (py[i] - y0) - (verts[q, f, 1] - y0) * (px[i] - x0)
                if cr < 0.0:
                    inside = False
                    break
            if inside:
                out[i] = q
                break
    return out


def locate_nb(px, py, verts, cell_start, cell_items, gx0, gy0, gdx, gdy, gn):
    return _locate_nb(np.ascontiguousarray(px, dtype=np.float64),
                      np.ascontiguousarray(py, dtype=np.float64),
                      verts, cell_start, cell_items,
                      float(gx0), float(gy0), float(gdx), float(gdy), int(gn))


# ---------------------------------------------------------------------------
# Placement rules (Models A, B and A-mod) for a batch of components
# ---------------------------------------------------------------------------

# placement kinds
BAND, WHOLE, NCOPIES, QUAD_BAND, REPLACE, QUAD_REPLACE, REJECTED = range(7)
KIND_NAMES = ("Band", "WholeComponent", "NCopies", "QuadrantBand", "Replace",
              "QuadrantReplace", "Rejected")
# rule codes
RULE_ORIGINAL, RULE_CHANGE1, RULE_AMOD = 0, 1, 2
MAX_REM = 5
# residual pieces thinner than SNAP times the cut interval, or within a few ulps
# of the coordinates (ABS_SNAP times their magnitude), are absorbed into the band
SNAP = 1e-12
ABS_SNAP = 1e-13
# relative slack on the branch tests, so aspect ratios that are equal in exact
# arithmetic (common, since the geometry is dyadic) pick the same branch in any frame
TIE = 1e-9


def _clamp_np(c, length, lo, hi):
    a = c - 0.5 * length
    b = c + 0.5 * length
    low = a < lo
    a = np.where(low, lo, a)
    b = np.where(low, lo + length, b)
    high = b > hi
    b = np.where(high, hi, b)
    a = np.where(high, hi - length, a)
    full = length >= hi - lo
    a = np.where(full, lo, a)
    b = np.where(full, hi, b)
    return a, b


def _literal_np(c, ld, thick, lo, hi):
    # printed argmin: displacement s*ld must fit, band is (c - s*thick, c + (1-s)*thick)
    smin = 1.0 - (hi - c) / ld
    smax = (c - lo) / ld
    s = np.clip(0.5, smin, smax)
    feas = smin <= smax
    a = c - s * thick
    b = c + (1.0 - s) * thick
    return feas, a, b


def _band_np(x0, y0, x1, y1, px, py, d, thick, literal):
    """Band of thickness ``thick`` spanning the component along e_d."""
    # perpendicular axis coordinates
    lo = np.where(d == 1, y0, x0)
    hi = np.where(d == 1, y1, x1)
    c = np.where(d == 1, py, px)
    ld = np.where(d == 1, x1 - x0, y1 - y0)
    a, b = _clamp_np(c, thick, lo, hi)
    if literal:
        feas, la, lb = _literal_np(c, ld, thick, lo, hi)
        a = np.where(feas, la, a)
        b = np.where(feas, lb, b)
    a = np.maximum(a, lo)
    b = np.minimum(b, hi)
    return lo, hi, a, b


def _slab_np(x0, y0, x1, y1, pc, d, extent):
    """Slab along e_d of the given extent, full width across."""
    lo = np.where(d == 1, x0, y0)
    hi = np.where(d == 1, x1, y1)
    a, b = _clamp_np(pc, extent, lo, hi)
    return lo, hi, a, b


def _emit_np(d, across, x0, y0, x1, y1, lo, hi, a, b):
    """Band/slab rect and its <= 2 residual pieces.

    ``across`` True means the interval (a, b) is along the perpendicular axis
    of e_d (a band); False means along e_d (a slab).
    """
    # axis 'y' carries the interval when (d==1 and across) or (d==2 and not across)
    on_y = (d == 1) == across
    tol = SNAP * (hi - lo) + ABS_SNAP * np.maximum(np.abs(lo), np.abs(hi))
    a = np.where(a - lo <= tol, lo, a)
    b = np.where(hi - b <= tol, hi, b)
    bx0 = np.where(on_y, x0, a)
    bx1 = np.where(on_y, x1, b)
    by0 = np.where(on_y, a, y0)
    by1 = np.where(on_y, b, y1)
    band = np.stack([bx0, by0, bx1, by1], axis=-1)
    r1 = np.stack([np.where(on_y, x0, lo), np.where(on_y, lo, y0),
                   np.where(on_y, x1, a), np.where(on_y, a, y1)], axis=-1)
    r2 = np.stack([np.where(on_y, x0, b), np.where(on_y, b, y0),
                   np.where(on_y, x1, hi), np.where(on_y, hi, y1)], axis=-1)
    has1 = a > lo
    has2 = b < hi
    return band, r1, has1, r2, has2


def place_np(x0, y0, x1, y1, px, py, d, delta, rule, literal, c1_literal, min_length):
    """Vectorised placement for a batch of components.

    Returns (kind, band[n,4], ncopies, quadrant, rem[n,5,4], nrem, length).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    d = np.asarray(d, dtype=np.int64)
    n = x0.shape[0]
    kind = np.full(n, BAND, dtype=np.int64)
    band = np.zeros((n, 4))
    ncop = np.ones(n, dtype=np.int64)
    quad = np.full(n, -1, dtype=np.int64)
    rem = np.zeros((n, MAX_REM, 4))
    nrem = np.zeros(n, dtype=np.int64)
    length = np.zeros(n)

    l1 = x1 - x0
    l2 = y1 - y0

    def put_rem(mask, rect, has):
        m = mask & has
        idx = np.nonzero(m)[0]
        rem[idx, nrem[idx]] = rect[idx]
        nrem[idx] += 1

    def do_band(mask, X0, Y0, X1, Y1, k_band):
        # basic band inside rect (X0..Y1) for the components in mask
        ld = np.where(d == 1, X1 - X0, Y1 - Y0)
        lo, hi, a, b = _band_np(X0, Y0, X1, Y1, px, py, d, delta * ld, literal)
        bnd, r1, h1, r2, h2 = _emit_np(d, True, X0, Y0, X1, Y1, lo, hi, a, b)
        band[mask] = bnd[mask]
        kind[mask] = k_band
        length[mask] = ld[mask]
        put_rem(mask, r1, h1)
        put_rem(mask, r2, h2)

    def do_slab(mask, X0, Y0, X1, Y1, extent, copies, k_slab, copy_len):
        pc = np.where(d == 1, px, py)
        lo, hi, a, b = _slab_np(X0, Y0, X1, Y1, pc, d, extent)
        bnd, r1, h1, r2, h2 = _emit_np(d, False, X0, Y0, X1, Y1, lo, hi, a, b)
        band[mask] = bnd[mask]
        kind[mask] = k_slab
        ncop[mask] = copies[mask]
        length[mask] = copy_len[mask]
        put_rem(mask, r1, h1)
        put_rem(mask, r2, h2)

    ldir = np.where(d == 1, l1, l2)
    lperp = np.where(d == 1, l2, l1)
    ones = np.ones(n, dtype=np.int64)

    if rule == RULE_AMOD:
        big = np.maximum(l1, l2)
        small = np.minimum(l1, l2)
        L = big / small
        inv = 1.0 / delta
        m_quad = (L >= 0.5 * inv * (1 - TIE)) & (L <= 2.0 * inv * (1 + TIE))
        m_basic = (~m_quad) & (ldir < 0.5 * inv * lperp)
        m_repl = (~m_quad) & (~m_basic)
        do_band(m_basic, x0, y0, x1, y1, BAND)
        ext = lperp * inv
        do_slab(m_repl, x0, y0, x1, y1, ext, ones, REPLACE, ext)
        if m_quad.any():
            xm = 0.5 * (x0 + x1)
            ym = 0.5 * (y0 + y1)
            ix = (px > xm).astype(np.int64)
            iy = (py > ym).astype(np.int64)
            q = ix + 2 * iy
            qx0 = np.where(ix == 0, x0, xm)
            qx1 = np.where(ix == 0, xm, x1)
            qy0 = np.where(iy == 0, y0, ym)
            qy1 = np.where(iy == 0, ym, y1)
            quad[m_quad] = q[m_quad]
            qs = [np.stack([x0, y0, xm, ym], -1), np.stack([xm, y0, x1, ym], -1),
                  np.stack([x0, ym, xm, y1], -1), np.stack([xm, ym, x1, y1], -1)]
            qd = np.where(d == 1, qx1 - qx0, qy1 - qy0)
            qp = np.where(d == 1, qy1 - qy0, qx1 - qx0)
            sub_basic = m_quad & (qd <= inv * qp * (1 + TIE))
            sub_repl = m_quad & ~sub_basic
            # other quadrants first, in index order, then the modified quadrant's pieces
            tru = np.ones(n, dtype=bool)
            for j in range(4):
                put_rem(m_quad & (q != j), qs[j], tru)
            do_band(sub_basic, qx0, qy0, qx1, qy1, QUAD_BAND)
            qext = qp * inv
            do_slab(sub_repl, qx0, qy0, qx1, qy1, qext, ones, QUAD_REPLACE, qext)
    else:
        degen = delta * ldir >= lperp * (1 - TIE)
        nd = ~degen
        do_band(nd, x0, y0, x1, y1, BAND)
        if rule == RULE_ORIGINAL:
            band[degen] = np.stack([x0, y0, x1, y1], -1)[degen]
            kind[degen] = WHOLE
            length[degen] = np.maximum(l1, l2)[degen]
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                nc = np.floor(delta * ldir / lperp * (1 + TIE)).astype(np.int64)
            nc = np.maximum(nc, 1)
            copy_len = lperp if c1_literal else lperp / delta
            ext = nc * copy_len
            do_slab(degen, x0, y0, x1, y1, ext, nc, NCOPIES, ext / nc)

    if min_length > 0.0:
        rej = length < min_length
        kind[rej] = REJECTED
        nrem[rej] = 0
    return kind, band, ncop, quad, rem, nrem, length


@njit(cache=True, nogil=True)
def _clamp_nb(c, length, lo, hi):
    if length >= hi - lo:
        return lo, hi
    a = c - 0.5 * length
    b = c + 0.5 * length
    if a < lo:
        a = lo
        b = lo + length
    if b > hi:
        b = hi
        a = hi - length
    return a, b


@njit(cache=True, nogil=True)
def _emit_nb(i, d, across, X0, Y0, X1, Y1, lo, hi, a, b, band, rem, nrem):
    on_y = (d == 1) == across
    tol = SNAP * (hi - lo) + ABS_SNAP * max(abs(lo), abs(hi))
    if a - lo <= tol:
        a = lo
    if hi - b <= tol:
        b = hi
    if on_y:
        band[i, 0] = X0
        band[i, 1] = a
        band[i, 2] = X1
        band[i, 3] = b
    else:
        band[i, 0] = a
        band[i, 1] = Y0
        band[i, 2] = b
        band[i, 3] = Y1
    if a > lo:
        k = nrem[i]
        if on_y:
            rem[i, k, 0] = X0
            rem[i, k, 1] = lo
            rem[i, k, 2] = X1
            rem[i, k, 3] = a
        else:
            rem[i, k, 0] = lo
            rem[i, k, 1] = Y0
            rem[i, k, 2] = a
            rem[i, k, 3] = Y1
        nrem[i] = k + 1
    if b < hi:
        k = nrem[i]
        if on_y:
            rem[i, k, 0] = X0
            rem[i, k, 1] = b
            rem[i, k, 2] = X1
            rem[i, k, 3] = hi
        else:
            rem[i, k, 0] = b
            rem[i, k, 1] = Y0
            rem[i, k, 2] = hi
            rem[i, k, 3] = Y1
        nrem[i] = k + 1


@njit(cache=True, nogil=True)
def _band_nb(i, X0, Y0, X1, Y1, px, py, d, delta, literal, band, rem, nrem):
    if d == 1:
        lo, hi, c, ld = Y0, Y1, py, X1 - X0
    else:
        lo, hi, c, ld = X0, X1, px, Y1 - Y0
    thick = delta * ld
    a, b = _clamp_nb(c, thick, lo, hi)
    if literal:
        smin = 1.0 - (hi - c) / ld
        smax = (c - lo) / ld
        if smin <= smax:
            s = min(max(0.5, smin), smax)
            a = c - s * thick
            b = c + (1.0 - s) * thick
    a = max(a, lo)
    b = min(b, hi)
    _emit_nb(i, d, True, X0, Y0, X1, Y1, lo, hi, a, b, band, rem, nrem)
    return ld


@njit(cache=True, nogil=True)
def _slab_nb(i, X0, Y0, X1, Y1, px, py, d, extent, band, rem, nrem):
    if d == 1:
        lo, hi, c = X0, X1, px
    else:
        lo, hi, c = Y0, Y1, py
    a, b = _clamp_nb(c, extent, lo, hi)
    _emit_nb(i, d, False, X0, Y0, X1, Y1, lo, hi, a, b, band, rem, nrem)


@njit(cache=True, nogil=True)
def _place_nb(x0, y0, x1, y1, px, py, d, delta, rule, literal, c1_literal, min_length):
    n = x0.shape[0]
    kind = np.full(n, 0, dtype=np.int64)
    band = np.zeros((n, 4))
    ncop = np.ones(n, dtype=np.int64)
    quad = np.full(n, -1, dtype=np.int64)
    rem = np.zeros((n, 5, 4))
    nrem = np.zeros(n, dtype=np.int64)
    length = np.zeros(n)
    inv = 1.0 / delta
    for i in range(n):
        X0, Y0, X1, Y1 = x0[i], y0[i], x1[i], y1[i]
        di = d[i]
        l1 = X1 - X0
        l2 = Y1 - Y0
        if di == 1:
            ldir, lperp = l1, l2
        else:
            ldir, lperp = l2, l1
        if rule == 2:
            L = max(l1, l2) / min(l1, l2)
            if L >= 0.5 * inv * (1 - TIE) and L <= 2.0 * inv * (1 + TIE):
                xm = 0.5 * (X0 + X1)
                ym = 0.5 * (Y0 + Y1)
                ix = 1 if px[i] > xm else 0
                iy = 1 if py[i] > ym else 0
                q = ix + 2 * iy
                quad[i] = q
                for j in range(4):
                    if j == q:
                        continue
                    k = nrem[i]
                    rem[i, k, 0] = X0 if j % 2 == 0 else xm
                    rem[i, k, 1] = Y0 if j < 2 else ym
                    rem[i, k, 2] = xm if j % 2 == 0 else X1
                    rem[i, k, 3] = ym if j < 2 else Y1
                    nrem[i] = k + 1
                qx0 = X0 if ix == 0 else xm
                qx1 = xm if ix == 0 else X1
                qy0 = Y0 if iy == 0 else ym
                qy1 = ym if iy == 0 else Y1
                if di == 1:
                    qd, qp = qx1 - qx0, qy1 - qy0
                else:
                    qd, qp = qy1 - qy0, qx1 - qx0
                if qd <= inv * qp * (1 + TIE):
                    kind[i] = 3
                    length[i] = _band_nb(i, qx0, qy0, qx1, qy1, px[i], py[i], di, delta,
                                         literal, band, rem, nrem)
                else:
                    kind[i] = 5
                    ext = qp * inv
                    length[i] = ext
                    _slab_nb(i, qx0, qy0, qx1, qy1, px[i], py[i], di, ext, band, rem, nrem)
            elif ldir < 0.5 * inv * lperp:
                kind[i] = 0
                length[i] = _band_nb(i, X0, Y0, X1, Y1, px[i], py[i], di, delta, literal,
                                     band, rem, nrem)
            else:
                kind[i] = 4
                ext = lperp * inv
                length[i] = ext
                _slab_nb(i, X0, Y0, X1, Y1, px[i], py[i], di, ext, band, rem, nrem)
        else:
            if delta * ldir < lperp * (1 - TIE):
                kind[i] = 0
                length[i] = _band_nb(i, X0, Y0, X1, Y1, px[i], py[i], di, delta, literal,
                                     band, rem, nrem)
            elif rule == 0:
                kind[i] = 1
                band[i, 0] = X0
                band[i, 1] = Y0
                band[i, 2] = X1
                band[i, 3] = Y1
                length[i] = max(l1, l2)
            else:
                nc = int(np.floor(delta * ldir / lperp * (1 + TIE)))
                if nc < 1:
                    nc = 1
                copy_len = lperp if c1_literal else lperp / delta
                ext = nc * copy_len
                kind[i] = 2
                ncop[i] = nc
                length[i] = ext / nc
                _slab_nb(i, X0, Y0, X1, Y1, px[i], py[i], di, ext, band, rem, nrem)
        if min_length > 0.0 and length[i] < min_length:
            kind[i] = 6
            nrem[i] = 0
    return kind, band, ncop, quad, rem, nrem, length


def place_nb(x0, y0, x1, y1, px, py, d, delta, rule, literal, c1_literal, min_length):
    f = lambda a: np.ascontiguousarray(a, dtype=np.float64)
    return _place_nb(f(x0), f(y0), f(x1), f(y1), f(px), f(py),
                     np.ascontiguousarray(d, dtype=np.int64), float(delta), int(rule),
                     bool(literal), bool(c1_literal), float(min_length))


BACKENDS = {
    "numpy": {"philox": philox_np, "locate": locate_np, "place": place_np},
}
if HAVE_NUMBA:
    BACKENDS["numba"] = {"philox": philox_nb, "locate": locate_nb, "place": place_nb}


def _pick_backend():
    want = os.environ.get("MARTENSIM_BACKEND", "").strip().lower()
    if want in BACKENDS:
        return want
    return "numba" if HAVE_NUMBA else "numpy"


BACKEND = _pick_backend()
philox = BACKENDS[BACKEND]["philox"]
locate = BACKENDS[BACKEND]["locate"]
place = BACKENDS[BACKEND]["place"]


@contextlib.contextmanager
def use_backend(name):
    """Temporarily swap the active kernel set (not thread safe)."""
    global BACKEND, philox, locate, place
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} is not available; have {sorted(BACKENDS)}")
    saved = BACKEND
    BACKEND = name
    philox, locate, place = (BACKENDS[name][k] for k in ("philox", "locate", "place"))
    try:
        yield name
    finally:
        BACKEND = saved
        philox, locate, place = (BACKENDS[saved][k] for k in ("philox", "locate", "place"))
