"""Random covering of the unit square by building blocks (Models A, B, A-mod).

The untransformed set V_k is kept as structure-of-arrays rectangles sorted
by component id. Every random draw comes from a counter keyed by
(component id, step, stream), so a run is a pure function of its config.
"""

import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels, rng
from .core import InvalidParameter, MartensimError, make_boundary_data, make_wells
from .geometry import Rect
from .kernels import (BAND, KIND_NAMES, MAX_REM, NCOPIES, QUAD_BAND, QUAD_REPLACE, REJECTED,
                      REPLACE, RULE_AMOD, RULE_CHANGE1, RULE_ORIGINAL, TIE, WHOLE)

ALGORITHMS = ("A", "B", "Amod")
RULES = ("Original", "Change1")
DEFAULT_M = ((0.939, 0.0), (0.0, 1.064))
AREA_TOL = 1e-9
GEOM_TOL = 1e-12


class InvalidPoint(MartensimError, ValueError):
    pass


class NotFound(MartensimError, KeyError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    algorithm: str = "A"
    delta: float = 0.4
    p: float = 0.5
    gamma: float = 0.5
    m: tuple = DEFAULT_M
    seed: int = 42
    max_steps: Optional[int] = None
    min_length: Optional[float] = None
    degenerate_rule: str = "Original"
    block_depth: int = 3
    bucket_lambda: float = 1.1
    argmin_literal: bool = False
    change1_literal: bool = False
    max_components: Optional[int] = None
    reject_short: bool = False
    record_events: bool = True

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(tuple(float(v) for v in row) for row in self.m))
        if self.algorithm not in ALGORITHMS:
            raise InvalidParameter(f"algorithm must be one of {ALGORITHMS}")
        if self.degenerate_rule not in RULES:
            raise InvalidParameter(f"degenerate_rule must be one of {RULES}")
        if not 0 < self.delta < 1:
            raise InvalidParameter("delta must lie in (0, 1)")
        if not 0 < self.p < 1:
            raise InvalidParameter("p must lie in (0, 1)")
        if self.algorithm == "Amod" and self.p != 0.5:
            raise InvalidParameter("Amod is only defined for p = 1/2")
        if self.max_steps is None and self.min_length is None:
            raise InvalidParameter("need a stop condition: max_steps or min_length")
        if self.max_steps is not None and self.max_steps < 0:
            raise InvalidParameter("max_steps must be >= 0")
        if self.min_length is not None and not self.min_length > 0:
            raise InvalidParameter("min_length must be > 0, otherwise the run never stops")
        if self.max_components is not None and self.max_components < 1:
            raise InvalidParameter("max_components must be >= 1")
        if self.block_depth < 0:
            raise InvalidParameter("block_depth must be >= 0")
        if not self.bucket_lambda > 1:
            raise InvalidParameter("bucket_lambda must be > 1")
        if not 0 <= int(self.seed) < 2 ** 128:
            raise InvalidParameter("seed must be a non-negative integer below 2^128")

    @property
    def rule_code(self):
        if self.algorithm == "Amod":
            return RULE_AMOD
        return RULE_CHANGE1 if self.degenerate_rule == "Change1" else RULE_ORIGINAL

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def wells(self):
        return make_wells(self.gamma)

    def boundary(self):
        return make_boundary_data(self.m, self.wells())

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["m"] = [list(r) for r in self.m]
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise InvalidParameter(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# single placements
# ---------------------------------------------------------------------------


@dataclass
class Placement:
    kind: str
    band: Optional[Rect]
    n_copies: int = 1
    quadrant: int = -1
    remainder: list = dataclasses.field(default_factory=list)
    length: float = 0.0


def _place_one(d, p, direction, delta, rule, literal=False, c1_literal=False):
    x, y = float(p[0]), float(p[1])
    if not (d.x0 < x < d.x1 and d.y0 < y < d.y1):
        raise InvalidPoint(f"point {p} is not strictly inside {d}")
    if direction not in (1, 2):
        raise InvalidParameter("direction must be 1 or 2")
    a = lambda v: np.array([v], dtype=np.float64)
    kind, band, ncop, quad, rem, nrem, length = kernels.place(
        a(d.x0), a(d.y0), a(d.x1), a(d.y1), a(x), a(y), np.array([direction]), delta, rule,
        literal, c1_literal, 0.0)
    k = int(kind[0])
    return Placement(KIND_NAMES[k], Rect.from_corners(*band[0]), int(ncop[0]), int(quad[0]),
                     [Rect.from_corners(*r) for r in rem[0, :nrem[0]]], float(length[0]))


def place_block_basic(d, p, direction, delta, literal=False):
    """Band of thickness delta*l_dir through p, or WholeComponent if degenerate."""
    return _place_one(d, p, direction, delta, RULE_ORIGINAL, literal)


def place_block_change1(d, p, direction, delta, literal=False, literal_extent=False):
    """Degenerate branch replaced by N stacked copies; non-degenerate input is basic."""
    return _place_one(d, p, direction, delta, RULE_CHANGE1, literal, literal_extent)


def place_block_amod(d, p, direction, delta, literal=False):
    return _place_one(d, p, direction, delta, RULE_AMOD, literal)


# ---------------------------------------------------------------------------
# simulation state
# ---------------------------------------------------------------------------


def _areas(r):
    return (r[:, 2] - r[:, 0]) * (r[:, 3] - r[:, 1])


class SimState:
    """Mutable state of one run. ``step`` advances it in place."""

    def __init__(self, config):
        self.config = config
        self.k = 0
        self.converged = False
        # active components (sorted by id) and retired ones (still part of V)
        self.rects = np.array([[0.0, 0.0, 1.0, 1.0]])
        self.ids = np.array([0], dtype=np.int64)
        self.w = np.ones(1)
        self.frozen_rects = np.zeros((0, 4))
        self.frozen_ids = np.zeros(0, dtype=np.int64)
        self.frozen_w = np.zeros(0)
        self.next_id = 1
        # registry chunks
        self._reg = [(np.array([0]), np.array([[0.0, 0.0, 1.0, 1.0]]), np.array([-1]),
                      np.array([0]))]
        self._died = []
        self._placed = []
        self.events = []
        self.series = [(0, 1.0, 1, 0)]
        self.last = None
        self._retire()

    # -- helpers ----------------------------------------------------------

    @property
    def volume(self):
        return float((self.w * _areas(self.rects)).sum() + (self.frozen_w * _areas(self.frozen_rects)).sum())

    @property
    def n_components(self):
        return len(self.ids) + len(self.frozen_ids)

    def _retire(self):
        ml = self.config.min_length
        if ml is None or len(self.ids) == 0:
            return
        r = self.rects
        cx = 0.5 * (r[:, 0] + r[:, 2])
        cy = 0.5 * (r[:, 1] + r[:, 3])
        best = np.zeros(len(r))
        for d in (1, 2):
            out = kernels.place(r[:, 0], r[:, 1], r[:, 2], r[:, 3], cx, cy,
                                np.full(len(r), d, dtype=np.int64), self.config.delta,
                                self.config.rule_code, self.config.argmin_literal,
                                self.config.change1_literal, 0.0)
            best = np.maximum(best, out[6])
        dead = best < ml
        if dead.any():
            self.frozen_rects = np.concatenate([self.frozen_rects, r[dead]])
            self.frozen_ids = np.concatenate([self.frozen_ids, self.ids[dead]])
            self.frozen_w = np.concatenate([self.frozen_w, self.w[dead]])
            keep = ~dead
            self.rects, self.ids, self.w = r[keep], self.ids[keep], self.w[keep]

    def _draws(self):
        cfg = self.config
        k = self.k + 1
        if cfg.algorithm == "B":
            u = rng.uniforms(cfg.seed, 0, k, rng.STREAM_MODEL_B)[0]
            a = self.w * _areas(self.rects)
            cum = np.cumsum(a)
            j = int(min(np.searchsorted(cum, u[0] * cum[-1], side="right"), len(a) - 1))
            sel = np.array([j])
            ux, uy, ud = u[1:2], u[2:3], u[3:4]
        else:
            sel = np.arange(len(self.ids))
            u = rng.uniforms(cfg.seed, self.ids, k, rng.STREAM_PLACE)
            ux, uy, ud = u[:, 0], u[:, 1], u[:, 2]
        r = self.rects[sel]
        px = r[:, 0] + ux * (r[:, 2] - r[:, 0])
        py = r[:, 1] + uy * (r[:, 3] - r[:, 1])
        d = np.where(ud < cfg.p, 1, 2).astype(np.int64)
        return sel, px, py, d

    # -- one step ----------------------------------------------------------

    def step(self):
        if len(self.ids) == 0 or self.volume == 0.0:
            self.converged = True
            return self
        cfg = self.config
        sel, px, py, d = self._draws()
        k = self.k + 1
        r = self.rects[sel]
        # by default short inclusions are still placed; min_length only retires components
        ml = float(cfg.min_length) if cfg.reject_short and cfg.min_length is not None else 0.0
        kind, band, ncop, quad, rem, nrem, length = kernels.place(
            r[:, 0], r[:, 1], r[:, 2], r[:, 3], px, py, d, cfg.delta, cfg.rule_code,
            cfg.argmin_literal, cfg.change1_literal, ml)
        acc = kind != REJECTED
        ids_sel = self.ids[sel]
        w_sel = self.w[sel]

        # children, ordered by parent id then remainder order
        cmask = (np.arange(MAX_REM)[None, :] < nrem[:, None]) & acc[:, None]
        child_rects = rem[cmask]
        child_parent = np.broadcast_to(ids_sel[:, None], cmask.shape)[cmask]
        child_w = np.broadcast_to(w_sel[:, None], cmask.shape)[cmask]
        nch = len(child_rects)
        child_ids = self.next_id + np.arange(nch, dtype=np.int64)
        self.next_id += nch
        if nch:
            self._reg.append((child_ids, child_rects, child_parent, np.full(nch, k)))
        if acc.any():
            self._died.append((ids_sel[acc], np.full(int(acc.sum()), k)))
            ncop = ncop.copy()
            whole = acc & (kind == WHOLE)
            if whole.any():
                lr = np.where(d == 1, r[:, 2] - r[:, 0], r[:, 3] - r[:, 1])
                lp = np.where(d == 1, r[:, 3] - r[:, 1], r[:, 2] - r[:, 0])
                ncop[whole] = np.maximum(1, np.floor(cfg.delta * lr / lp * (1 + TIE)))[whole]
            stretch = (kind == WHOLE) | ((kind == NCOPIES) & cfg.change1_literal)
            self._placed.append(dict(rect=band[acc], orient=d[acc], ncop=ncop[acc],
                                     kind=kind[acc], step=np.full(int(acc.sum()), k),
                                     parent=ids_sel[acc], weight=w_sel[acc],
                                     length=length[acc], stretch=stretch[acc]))

        keep = np.ones(len(self.ids), dtype=bool)
        keep[sel[acc]] = False
        self.rects = np.concatenate([self.rects[keep], child_rects])
        self.ids = np.concatenate([self.ids[keep], child_ids])
        self.w = np.concatenate([self.w[keep], child_w])
        self.k = k
        self.last = dict(parent_rects=r, px=px, py=py, d=d, kind=kind, band=band, acc=acc)

        if cfg.record_events:
            self._log_events(k, ids_sel, px, py, d, kind, band, ncop, quad)
        if cfg.max_components is not None:
            if len(self.ids) > cfg.max_components:
                self._resample()
            self._normalise()
        self._retire()
        self.series.append((k, self.volume, self.n_components, len(sel)))
        if len(self.ids) == 0:
            self.converged = True
        return self

    def _log_events(self, k, ids, px, py, d, kind, band, ncop, quad):
        for i in range(len(ids)):
            kd = int(kind[i])
            pl = {"type": KIND_NAMES[kd]}
            if kd != REJECTED:
                pl["rect"] = [float(v) for v in band[i]]
            if kd == NCOPIES:
                pl["n_copies"] = int(ncop[i])
            if kd in (QUAD_BAND, QUAD_REPLACE):
                pl["quadrant"] = int(quad[i])
            self.events.append({"k": k, "component_id": int(ids[i]),
                                "point": [float(px[i]), float(py[i])],
                                "direction": int(d[i]), "placement": pl})

    def _resample(self):
        """Systematic resampling of the active particles by weight * area."""
        n_new = self.config.max_components
        wa = self.w * _areas(self.rects)
        total = wa.sum()
        u0 = rng.uniforms(self.config.seed, 0, self.k, rng.STREAM_RESAMPLE)[0, 0]
        pos = (u0 + np.arange(n_new)) / n_new * total
        idx = np.minimum(np.searchsorted(np.cumsum(wa), pos, side="right"), len(wa) - 1)
        cnt = np.bincount(idx, minlength=len(wa))
        alive = cnt > 0
        dropped = self.ids[~alive]
        if len(dropped):
            self._died.append((dropped, np.full(len(dropped), self.k)))
        new_w = cnt * (total / n_new) / _areas(self.rects)
        self.rects, self.ids, self.w = self.rects[alive], self.ids[alive], new_w[alive]

    def _normalise(self):
        # weighted runs: each particle lives in its own frame with long side 1,
        # the weight carries its true area (the rules are scale invariant)
        r = self.rects
        l1 = r[:, 2] - r[:, 0]
        l2 = r[:, 3] - r[:, 1]
        s = np.maximum(l1, l2)
        self.w = self.w * s * s
        self.rects = np.stack([np.zeros_like(l1), np.zeros_like(l1), l1 / s, l2 / s], axis=1)

    # -- audits ------------------------------------------------------------

    def placed_area(self):
        return float(sum(_areas(p["rect"]).sum() for p in self._placed))

    def audit_step(self, tol=AREA_TOL):
        """Invariant checks on the current state and the last step; raises on failure."""
        allr = np.concatenate([self.rects, self.frozen_rects])
        if not np.all((allr[:, 2] > allr[:, 0]) & (allr[:, 3] > allr[:, 1])):
            raise AssertionError("degenerate component rectangle")
        if (allr[:, :2] < -GEOM_TOL).any() or (allr[:, 2:] > 1 + GEOM_TOL).any():
            raise AssertionError("component leaves the unit square")
        if self.config.max_components is None:
            tot = _areas(allr).sum() + self.placed_area()
            if abs(tot - 1.0) > tol:
                raise AssertionError(f"measure not conserved: {tot!r}")
        if len(self.series) > 1 and self.series[-1][1] > self.series[-2][1] + tol:
            raise AssertionError("volume increased")
        lt = self.last
        if lt is not None:
            r, b, acc = lt["parent_rects"], lt["band"], lt["acc"]
            inside = ((r[:, 0] < lt["px"]) & (lt["px"] < r[:, 2]) &
                      (r[:, 1] < lt["py"]) & (lt["py"] < r[:, 3]))
            if not inside.all():
                raise AssertionError("drawn point outside its component")
            bin_ = ((b[:, 0] >= r[:, 0] - GEOM_TOL) & (b[:, 1] >= r[:, 1] - GEOM_TOL) &
                    (b[:, 2] <= r[:, 2] + GEOM_TOL) & (b[:, 3] <= r[:, 3] + GEOM_TOL))
            if not bin_[acc].all():
                raise AssertionError("band leaves its component")
            if not ((b[acc, 2] > b[acc, 0]) & (b[acc, 3] > b[acc, 1])).all():
                raise AssertionError("degenerate band")
        return True

    # -- result ------------------------------------------------------------

    def result(self):
        return SimResult(self)


def step(state, config=None):
    """Advance ``state`` by one step (in place) and return it."""
    if config is not None and config is not state.config:
        raise InvalidParameter("state was created with a different config")
    return state.step()


MAX_AUTO_STEPS = 10_000_000


def run(config, audit=False, observer=None):
    """Run to the stop condition and return a SimResult.

    ``observer(state)`` is called after the initial state and after every step.
    """
    st = SimState(config)
    limit = config.max_steps if config.max_steps is not None else MAX_AUTO_STEPS
    if observer is not None:
        observer(st)
    while st.k < limit and not st.converged:
        st.step()
        if audit:
            st.audit_step()
        if observer is not None:
            observer(st)
    return st.result()


def contraction_a(p, delta):
    """c_A = max{p + (1-p)(1-delta), (1-p) + p(1-delta)}."""
    return max(p + (1 - p) * (1 - delta), (1 - p) + p * (1 - delta))


def contraction_b(p, delta):
    """c_B = c_A + (1 - c_A)(1 + e^{-1/2}) / 2."""
    ca = contraction_a(p, delta)
    return ca + (1 - ca) * (1 + math.exp(-0.5)) / 2


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


def _cat(chunks, i, dtype=None, shape=(0,)):
    if not chunks:
        return np.zeros(shape, dtype=dtype)
    return np.concatenate([c[i] for c in chunks])


class SimResult:
    def __init__(self, st):
        self.config = st.config
        self.converged = st.converged
        self.k = st.k
        s = np.array(st.series, dtype=float).reshape(-1, 4)
        self.series = {"k": s[:, 0].astype(np.int64), "volume": s[:, 1],
                       "n_components": s[:, 2].astype(np.int64),
                       "n_events": s[:, 3].astype(np.int64)}
        self.events = st.events
        ids = _cat(st._reg, 0, np.int64)
        n = int(ids.max()) + 1
        self.comp_rect = np.zeros((n, 4))
        self.comp_parent = np.full(n, -1, dtype=np.int64)
        self.comp_born = np.zeros(n, dtype=np.int64)
        self.comp_died = np.full(n, -1, dtype=np.int64)
        self.comp_rect[ids] = _cat(st._reg, 1, shape=(0, 4))
        self.comp_parent[ids] = _cat(st._reg, 2, np.int64)
        self.comp_born[ids] = _cat(st._reg, 3, np.int64)
        if st._died:
            self.comp_died[_cat(st._died, 0, np.int64)] = _cat(st._died, 1, np.int64)
        keys = ("rect", "orient", "ncop", "kind", "step", "parent", "weight", "length", "stretch")
        if st._placed:
            self.placed = {key: np.concatenate([p[key] for p in st._placed]) for key in keys}
        else:
            self.placed = {key: np.zeros((0, 4) if key == "rect" else 0) for key in keys}
        self.final_rects = np.concatenate([st.rects, st.frozen_rects])
        self.final_ids = np.concatenate([st.ids, st.frozen_ids])
        self.final_w = np.concatenate([st.w, st.frozen_w])
        order = np.argsort(self.final_ids, kind="stable")
        self.final_rects, self.final_ids, self.final_w = (self.final_rects[order],
                                                          self.final_ids[order],
                                                          self.final_w[order])

    @property
    def volume(self):
        return float(self.series["volume"][-1])

    def final_components(self):
        return [Rect.from_corners(*r, id=i) for r, i in zip(self.final_rects, self.final_ids)]

    def alive_at(self, k):
        died = np.where(self.comp_died < 0, np.iinfo(np.int64).max, self.comp_died)
        return np.nonzero((self.comp_born <= k) & (died > k))[0]

    def _check_id(self, cid, k):
        if not 0 <= cid < len(self.comp_born) or self.comp_born[cid] > k:
            raise NotFound(f"component {cid} did not exist at step {k}")

    def descendants(self, cid, k):
        """Ids alive at step k descending from ``cid`` (through the parent map)."""
        self._check_id(cid, k)
        alive = self.alive_at(k)
        anc = alive.copy()
        hit = anc == cid
        while True:
            up = anc > cid
            if not up.any():
                break
            anc = np.where(up, self.comp_parent[anc], anc)
            hit |= anc == cid
        return set(alive[hit].tolist())

    def descendants_geometric(self, cid, k):
        self._check_id(cid, k)
        alive = self.alive_at(k)
        a = self.comp_rect[cid]
        r = self.comp_rect[alive]
        inside = ((r[:, 0] >= a[0] - GEOM_TOL) & (r[:, 1] >= a[1] - GEOM_TOL) &
                  (r[:, 2] <= a[2] + GEOM_TOL) & (r[:, 3] <= a[3] + GEOM_TOL))
        return set(alive[inside].tolist())

    # -- output ------------------------------------------------------------

    def events_jsonl(self):
        return "".join(json.dumps(e) + "\n" for e in self.events)

    def series_csv(self):
        s = self.series
        lines = ["k,volume,n_components,n_events"]
        for i in range(len(s["k"])):
            lines.append(f"{s['k'][i]},{float(s['volume'][i])!r},{s['n_components'][i]},{s['n_events'][i]}")
        return "\n".join(lines) + "\n"

    def final_state(self):
        p = self.placed
        placed = [{"rect": [float(v) for v in p["rect"][i]],
                   "orientation": int(p["orient"][i]),
                   "n_copies": int(p["ncop"][i]),
                   "kind": KIND_NAMES[int(p["kind"][i])],
                   "step": int(p["step"][i]),
                   "parent": int(p["parent"][i]),
                   "weight": float(p["weight"][i]),
                   "length": float(p["length"][i]),
                   "stretch": bool(p["stretch"][i])} for i in range(len(p["rect"]))]
        comps = [{"id": int(i), "rect": [float(v) for v in r], "weight": float(w)}
                 for i, r, w in zip(self.final_ids, self.final_rects, self.final_w)]
        return {"config": self.config.to_dict(), "k": self.k, "converged": self.converged,
                "volume": self.volume, "components": comps, "placed": placed}


def placed_from_state(state_dict):
    """Placed arrays from a final_state mapping (inverse of SimResult.final_state)."""
    pl = state_dict["placed"]
    kinds = {n: i for i, n in enumerate(KIND_NAMES)}
    return {"rect": np.array([q["rect"] for q in pl], dtype=float).reshape(-1, 4),
            "orient": np.array([q["orientation"] for q in pl], dtype=np.int64),
            "ncop": np.array([q["n_copies"] for q in pl], dtype=np.int64),
            "kind": np.array([kinds[q["kind"]] for q in pl], dtype=np.int64),
            "step": np.array([q["step"] for q in pl], dtype=np.int64),
            "parent": np.array([q["parent"] for q in pl], dtype=np.int64),
            "weight": np.array([q["weight"] for q in pl], dtype=float),
            "length": np.array([q["length"] for q in pl], dtype=float),
            "stretch": np.array([q["stretch"] for q in pl], dtype=bool)}


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def default_threads():
    env = os.environ.get("MARTENSIM_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def run_ensemble(config, seeds, reduce=None, threads=None):
    """Run ``config`` for every seed; returns {seed: reduce(result)} in seed order."""
    reduce = reduce or (lambda r: r)
    seeds = [int(s) for s in seeds]
    threads = default_threads() if threads is None else int(threads)

    def one(s):
        return reduce(run(config.replace(seed=s)))

    if threads == 1:
        out = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(one, seeds))
    return dict(zip(seeds, out))


def volume_matrix(config, seeds, threads=None):
    """(n_seeds, max_steps + 1) array of |V_k| (weighted volume for A-mod)."""
    res = run_ensemble(config, seeds, lambda r: r.series["volume"], threads)
    n = config.max_steps + 1
    out = np.zeros((len(seeds), n))
    for i, s in enumerate(seeds):
        v = res[int(s)]
        out[i, :len(v)] = v
        out[i, len(v):] = v[-1]
    return out
