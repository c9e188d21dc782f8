"""Length-scale statistics: aspect-ratio buckets, log-binned histograms,
least-squares power-law fits and the two-scale combination law."""

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import InvalidParameter, MartensimError
from .geometry import BucketParams, rect_class_array
from .kernels import NCOPIES

BINS_PER_DECADE = 20
COVER_WINDOW = (1e-2, 1e-1)
INNER_WINDOW = (3.5e-4, 1e-2)


class EmptySource(MartensimError, ValueError):
    pass


class InsufficientData(MartensimError, ValueError):
    pass


# ---------------------------------------------------------------------------
# aspect-ratio buckets
# ---------------------------------------------------------------------------


@dataclass
class BucketStats:
    params: BucketParams
    volumes: dict
    total: float

    def tail(self, j1):
        return sum(v for j, v in self.volumes.items() if j <= j1)


def _rects_and_weights(source):
    if hasattr(source, "final_rects"):
        return source.final_rects, source.final_w
    if hasattr(source, "rects") and hasattr(source, "frozen_rects"):
        return (np.concatenate([source.rects, source.frozen_rects]),
                np.concatenate([source.w, source.frozen_w]))
    r = np.asarray(source, dtype=float).reshape(-1, 4)
    return r, np.ones(len(r))


def bucket_volumes(source, bp, weights=None):
    """Weighted area of the components in every aspect-ratio class.

    ``source`` is a SimState, a SimResult or an (n, 4) array of corners
    (optionally with per-component ``weights``).
    """
    r, w = _rects_and_weights(source)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
    l1 = r[:, 2] - r[:, 0]
    l2 = r[:, 3] - r[:, 1]
    a = w * l1 * l2
    if len(a) == 0:
        return BucketStats(bp, {}, 0.0)
    cls = rect_class_array(np.maximum(l1, l2) / np.minimum(l1, l2), bp)
    uniq, inv = np.unique(cls, return_inverse=True)
    sums = np.bincount(inv, weights=a)
    return BucketStats(bp, {int(j): float(v) for j, v in zip(uniq, sums)}, float(a.sum()))


def tail_fraction(bs, j1):
    if bs.total <= 0:
        return 0.0
    return min(1.0, bs.tail(j1) / bs.total)


def tail_fraction_arrays(rects, w, bp, j1):
    """Fast path used inside ensemble loops."""
    l1 = rects[:, 2] - rects[:, 0]
    l2 = rects[:, 3] - rects[:, 1]
    a = w * l1 * l2
    tot = a.sum()
    if tot <= 0:
        return 0.0
    cls = rect_class_array(np.maximum(l1, l2) / np.minimum(l1, l2), bp)
    return float(a[cls <= j1].sum() / tot)


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------


@dataclass
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int
    dropped: int = 0

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(np.diff(self.bin_edges) <= 0):
            raise InvalidParameter("bin edges must be strictly increasing")

    @property
    def widths(self):
        return np.diff(self.bin_edges)

    @property
    def centers(self):
        return np.sqrt(self.bin_edges[1:] * self.bin_edges[:-1])

    @property
    def density(self):
        return self.counts / self.widths

    def merge(self, other):
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise InvalidParameter("histograms have different bins")
        return Histogram(self.bin_edges, self.counts + other.counts, self.total + other.total,
                         self.dropped + other.dropped)

    __add__ = merge

    def to_csv(self):
        buf = io.StringIO()
        buf.write("bin_lo,bin_hi,count,density\n")
        for lo, hi, c, d in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts, self.density):
            buf.write(f"{float(lo)!r},{float(hi)!r},{int(c)},{float(d)!r}\n")
        return buf.getvalue()


def log_bins(lo, hi, per_decade=BINS_PER_DECADE):
    """Log-spaced edges covering [lo, hi] with ``per_decade`` bins per decade."""
    if not 0 < lo < hi:
        raise InvalidParameter("need 0 < lo < hi")
    n = max(1, int(round(per_decade * math.log10(hi / lo))))
    return np.logspace(math.log10(lo), math.log10(hi), n + 1)


def placed_lengths(source):
    """Inclusion lengths of a run; a Change-1 slab contributes one per copy."""
    p = source.placed if hasattr(source, "placed") else source
    ln = np.asarray(p["length"], dtype=float)
    rep = np.where(np.asarray(p["kind"]) == NCOPIES, np.asarray(p["ncop"]), 1)
    return np.repeat(ln, rep)


def microstructure_lengths(ms, measure="DiamondLongAxis"):
    if measure == "DiamondLongAxis":
        d = ms.diamonds
        return np.maximum(d[:, 2], d[:, 3]) if len(d) else np.zeros(0)
    if measure == "RhombusLongAxis":
        return np.asarray(ms.rhombi, dtype=float)
    raise InvalidParameter(f"unknown measure {measure!r}")


def length_histogram(source, measure="BandLongSide", bins=None):
    """Histogram of a length measure in log bins.

    ``source`` is a SimResult, a placed-array mapping, a Microstructure or a
    plain array of lengths. Lengths outside [edges[0], edges[-1]) are dropped
    and counted in ``dropped``.
    """
    if hasattr(source, "diamonds") and hasattr(source, "matrices"):
        x = microstructure_lengths(source, measure if measure != "BandLongSide" else "DiamondLongAxis")
    elif hasattr(source, "placed") or isinstance(source, dict):
        x = placed_lengths(source)
    else:
        x = np.asarray(source, dtype=float).ravel()
    if x.size == 0:
        raise EmptySource("nothing to measure")
    edges = log_bins(*COVER_WINDOW) if bins is None else np.asarray(bins, dtype=float)
    inside = (x >= edges[0]) & (x < edges[-1])
    idx = np.searchsorted(edges, x[inside], side="right") - 1
    counts = np.bincount(idx, minlength=len(edges) - 1)
    return Histogram(edges, counts, int(inside.sum()), int((~inside).sum()))


def _mean_power_counts(edges, amp, alpha, n):
    # expected counts of a density amp * x^-alpha, scaled to integers
    if abs(alpha - 1) < 1e-12:
        mass = amp * np.log(edges[1:] / edges[:-1])
    else:
        mass = amp * (edges[1:] ** (1 - alpha) - edges[:-1] ** (1 - alpha)) / (1 - alpha)
    return np.rint(mass * n).astype(np.int64)


def synthetic_histogram(edges, amp, alpha, scale=1e12):
    """Histogram holding the (rounded) expected counts of density amp * x^-alpha."""
    c = _mean_power_counts(np.asarray(edges, float), amp, alpha, scale)
    return Histogram(edges, c, int(c.sum()))


# ---------------------------------------------------------------------------
# power-law fits
# ---------------------------------------------------------------------------


@dataclass
class PowerLawFit:
    amplitude: float
    exponent: float
    fit_lo: float
    fit_hi: float
    r_squared: float
    n_bins: int

    def to_json(self):
        return json.dumps({"amplitude": self.amplitude, "exponent": self.exponent,
                           "fit_lo": self.fit_lo, "fit_hi": self.fit_hi,
                           "r_squared": self.r_squared, "n_bins": self.n_bins})


def fit_power_law(h, fit_lo=COVER_WINDOW[0], fit_hi=COVER_WINDOW[1], density=True):
    """Least squares of log(count density) on log(bin centre); density ~ C x^-alpha."""
    c = h.centers
    y = h.density if density else h.counts.astype(float)
    # small slack so bins whose centre sits on the window edge are not lost to rounding
    use = (c >= fit_lo * (1 - 1e-9)) & (c <= fit_hi * (1 + 1e-9)) & (h.counts > 0)
    if use.sum() < 3:
        raise InsufficientData(f"only {int(use.sum())} usable bins in [{fit_lo}, {fit_hi}]")
    lx = np.log(c[use])
    ly = np.log(y[use])
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + icpt)
    ss_tot = ((ly - ly.mean()) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else float(1 - (res ** 2).sum() / ss_tot)
    return PowerLawFit(float(math.exp(icpt)), float(-slope), float(fit_lo), float(fit_hi),
                       min(1.0, max(0.0, r2)), int(use.sum()))


# ---------------------------------------------------------------------------
# two nested scales
# ---------------------------------------------------------------------------


@dataclass
class CombinedExponent:
    exponent: float
    branch: str  # "outer" (x^(alpha+1)) or "inner" (x^beta)
    tie: bool = False
    note: str = field(default="")


def combine_distributions(alpha_outer, beta_inner):
    """Leading small-x exponent of int_0^1 y^alpha (x/y)^beta dy."""
    a1 = alpha_outer + 1.0
    if abs(a1 - beta_inner) < 1e-12:
        return CombinedExponent(beta_inner, "tie", True, "x^beta log(1/x): logarithmic correction")
    if a1 < beta_inner:
        return CombinedExponent(a1, "outer")
    return CombinedExponent(beta_inner, "inner")


def combined_closed_form(x, alpha, beta):
    """c(alpha, beta) x^beta (1 - x^(alpha+1-beta)) with c = 1/(alpha+1-beta)."""
    e = alpha + 1 - beta
    x = np.asarray(x, dtype=float)
    if abs(e) < 1e-12:
        return x ** beta * np.log(1 / x)
    return x ** beta * (1 - x ** e) / e


def convolve_lengths(f, g, x=None, sub=16):
    """Numeric int_0^1 f(y) g(x/y) dy for two histograms on (0, 1).

    f is taken piecewise constant (its count density), g is interpolated
    linearly in log-log between bin centres. Each f-bin is integrated with a
    ``sub``-point midpoint rule in log y. Returns (x, values).
    """
    if x is None:
        x = g.centers
    x = np.asarray(x, dtype=float)
    fd = f.density
    gm = g.counts > 0
    lgc = np.log(g.centers[gm])
    lgd = np.log(g.density[gm])
    ge0, ge1 = g.bin_edges[0], g.bin_edges[-1]

    def g_at(z):
        out = np.zeros_like(z)
        ok = (z >= ge0) & (z < ge1)
        lz = np.log(z[ok])
        # linear extrapolation inside the outermost half bins
        slope_lo = (lgd[1] - lgd[0]) / (lgc[1] - lgc[0])
        slope_hi = (lgd[-1] - lgd[-2]) / (lgc[-1] - lgc[-2])
        v = np.interp(lz, lgc, lgd)
        v = np.where(lz < lgc[0], lgd[0] + slope_lo * (lz - lgc[0]), v)
        v = np.where(lz > lgc[-1], lgd[-1] + slope_hi * (lz - lgc[-1]), v)
        out[ok] = np.exp(v)
        return out

    t = (np.arange(sub) + 0.5) / sub
    vals = np.zeros_like(x)
    for i in range(len(fd)):
        if fd[i] == 0:
            continue
        a, b = math.log(f.bin_edges[i]), math.log(f.bin_edges[i + 1])
        y = np.exp(a + (b - a) * t)
        wy = y * (b - a) / sub  # dy = y d(log y)
        vals += fd[i] * (g_at(x[:, None] / y[None, :]) * wy[None, :]).sum(1)
    return x, vals


def write_fit_json(fit, path):
    with open(path, "w") as fh:
        fh.write(fit.to_json() + "\n")


def write_histogram_csv(h, path):
    with open(path, "w") as fh:
        fh.write(h.to_csv())
