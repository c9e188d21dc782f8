"""Wells, boundary data and rank-one splits.

Matrices are plain (2, 2) float arrays. All tolerances live here.
"""

from dataclasses import dataclass

import numpy as np

DET_TOL = 1e-9
WELL_TOL = 1e-9

UNRESOLVED, HORIZONTAL, VERTICAL = 0, 1, 2
NONE, PLUS, MINUS = 0, 1, 2
FAMILY_NAMES = ("Unresolved", "Horizontal", "Vertical")
VARIANT_NAMES = ("None", "Plus", "Minus")

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


class MartensimError(Exception):
    """Base class for all errors raised by the package."""


class InvalidParameter(MartensimError, ValueError):
    pass


class OutsideHull(MartensimError, ValueError):
    pass


class DegenerateSplit(MartensimError, ValueError):
    pass


@dataclass(frozen=True)
class WellSet:
    gamma: float
    f0: np.ndarray
    f0inv: np.ndarray

    @property
    def cauchy_green(self):
        """Cauchy-Green tensors of the two wells, (plus, minus)."""
        return self.f0.T @ self.f0, self.f0inv.T @ self.f0inv


def make_wells(gamma):
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0:
        raise InvalidParameter(f"gamma must be positive and finite, got {gamma}")
    f0 = np.array([[1.0, gamma], [0.0, 1.0]])
    f0inv = np.array([[1.0, -gamma], [0.0, 1.0]])
    for a in (f0, f0inv):
        a.setflags(write=False)
    return WellSet(gamma, f0, f0inv)


def cauchy_green(g):
    g = np.asarray(g, dtype=float)
    return np.swapaxes(g, -1, -2) @ g


def det(g):
    g = np.asarray(g, dtype=float)
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def phi(g, wells):
    """Distance of g's Cauchy-Green tensor to the nearest well tensor (Frobenius)."""
    c = cauchy_green(g)
    cp, cm = wells.cauchy_green
    dp = np.sqrt(((c - cp) ** 2).sum(axis=(-2, -1)))
    dm = np.sqrt(((c - cm) ** 2).sum(axis=(-2, -1)))
    return np.minimum(dp, dm)


def well_distance(g, wells):
    """(distance to SO(2)F0, distance to SO(2)F0^-1) measured on Cauchy-Green tensors."""
    c = cauchy_green(g)
    cp, cm = wells.cauchy_green
    return (np.sqrt(((c - cp) ** 2).sum(axis=(-2, -1))),
            np.sqrt(((c - cm) ** 2).sum(axis=(-2, -1))))


def in_wells(g, wells, tol=WELL_TOL):
    dp, dm = well_distance(g, wells)
    return (np.minimum(dp, dm) <= tol) & (np.abs(det(g) - 1.0) <= tol)


def is_interior(g, wells):
    """Sufficient interior test for K^qc: 0 < C11 < 1, 0 < C22 < 1 + gamma^2, C > 0."""
    c = cauchy_green(g)
    c11, c22 = c[..., 0, 0], c[..., 1, 1]
    pd = (c11 > 0) & (c11 * c22 - c[..., 0, 1] * c[..., 1, 0] > 0)
    return pd & (c11 < 1.0) & (c22 > 0) & (c22 < 1.0 + wells.gamma ** 2)


@dataclass(frozen=True)
class BoundaryData:
    m: np.ndarray
    c: np.ndarray


def make_boundary_data(m, wells):
    m = np.array(m, dtype=float).reshape(2, 2)
    if not np.all(np.isfinite(m)):
        raise InvalidParameter("boundary matrix must be finite")
    dt = det(m)
    if dt <= 0:
        raise OutsideHull(f"det M = {dt} is not positive")
    if dt != 1.0:
        m[1] = m[1] / dt
    if not is_interior(m, wells):
        c = cauchy_green(m)
        raise OutsideHull(f"M fails the interior test: C11={c[0, 0]:.6g}, C22={c[1, 1]:.6g}")
    m.setflags(write=False)
    c = cauchy_green(m)
    c.setflags(write=False)
    return BoundaryData(m, c)


@dataclass(frozen=True)
class GradientLabel:
    matrix: np.ndarray
    family: int = UNRESOLVED
    variant: int = NONE
    depth: int = 0

    @property
    def name(self):
        if self.family == UNRESOLVED:
            return "Unresolved"
        return FAMILY_NAMES[self.family] + ("+" if self.variant == PLUS else "-")


def _normal_index(normal):
    if isinstance(normal, str):
        return {"e1": 0, "e2": 1}[normal]
    n = np.asarray(normal, dtype=float)
    if np.allclose(n, E1):
        return 0
    if np.allclose(n, E2):
        return 1
    raise InvalidParameter("normal must be e1 or e2")


def shear(t, normal):
    """I + t tau (x) n with tau the unit vector perpendicular to n."""
    s = np.eye(2)
    if _normal_index(normal) == 0:
        s[1, 0] = t
    else:
        s[0, 1] = t
    return s


def _roots(a, b, c):
    # real roots of a t^2 + 2 b t + c = 0 with a > 0, c < 0, so of opposite sign
    disc = np.sqrt(b * b - a * c)
    # numerically stable pair
    q = -(b + np.copysign(disc, b)) if b != 0 else disc
    r1 = q / a
    r2 = c / q
    return max(r1, r2), min(r1, r2)


def lamination_split(g, normal, wells):
    """Split an interior gradient into two det-1 gradients on the laminate boundary.

    The split line is g (I + t tau (x) n), which keeps det = 1 for every t.
    For normal e1 both endpoints land on C11 = 1 (horizontal laminates of the
    two wells); for normal e2 both land on C22 = 1 + gamma^2 (vertical
    laminates). Returns (g_plus, g_minus, mu) with g = mu g_plus + (1-mu) g_minus.
    """
    g = np.asarray(g, dtype=float)
    if not is_interior(g, wells):
        raise DegenerateSplit("matrix is not interior to the hull, no strict split exists")
    k = _normal_index(normal)
    c = cauchy_green(g)
    target = 1.0 if k == 0 else 1.0 + wells.gamma ** 2
    if k == 0:
        # C11(t) = C11 + 2 t C12 + t^2 C22
        tp, tm = _roots(c[1, 1], c[0, 1], c[0, 0] - target)
    else:
        # C22(t) = C22 + 2 t C12 + t^2 C11
        tp, tm = _roots(c[0, 0], c[0, 1], c[1, 1] - target)
    if not (tp > 0 > tm):
        raise DegenerateSplit("split degenerates to a point")
    mu = -tm / (tp - tm)
    gp = g @ shear(tp, normal)
    gm = g @ shear(tm, normal)
    return gp, gm, mu


def twin_split(g, normal, wells):
    """Split a first-order laminate matrix into exact well matrices.

    Requires C11 = 1 for normal e2 (horizontal twins) or C22 = 1 + gamma^2
    for normal e1 (vertical twins). Returns (w_plus, w_minus, nu) where
    w_plus lies on SO(2)F0 and w_minus on SO(2)F0^-1.
    """
    g = np.asarray(g, dtype=float)
    k = _normal_index(normal)
    c = cauchy_green(g)
    gam = wells.gamma
    if k == 1:
        if abs(c[0, 0] - 1.0) > 1e-9:
            raise DegenerateSplit("horizontal twin split needs C11 = 1")
        # C12(t) = C12 + t C11
        tp = (gam - c[0, 1]) / c[0, 0]
        tm = (-gam - c[0, 1]) / c[0, 0]
    else:
        if abs(c[1, 1] - 1.0 - gam ** 2) > 1e-9:
            raise DegenerateSplit("vertical twin split needs C22 = 1 + gamma^2")
        # C12(t) = C12 + t C22
        tp = (gam - c[0, 1]) / c[1, 1]
        tm = (-gam - c[0, 1]) / c[1, 1]
    if not (tp > 0 > tm):
        raise DegenerateSplit("matrix already sits on a well")
    nu = -tm / (tp - tm)
    return g @ shear(tp, normal), g @ shear(tm, normal), nu


def rank_one_residual(a, b, normal):
    """Size of the part of a - b that is not of the form x (x) n."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    k = _normal_index(normal)
    return float(np.abs(d[:, 1 - k]).max())
