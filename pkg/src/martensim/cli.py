"""Command line: ``martensim {simulate|stats|render|verify} [--config FILE] [overrides]``.

Exit codes: 0 ok, 1 a verification criterion failed, 2 usage or config error.
"""

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .blocks import make_library
from .core import MartensimError
from .fragment import SimConfig, placed_from_state, run_ensemble
from .geometry import make_bucket_params
from .render import rasterize, rasterize_result, write_ppm
from .sobolev import STIMA_C, SobolevParams, step_difference_series
from .stats import (Histogram, bucket_volumes, combine_distributions, fit_power_law,
                    length_histogram, log_bins, placed_lengths)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# RunSpec
# ---------------------------------------------------------------------------

SECTIONS = {
    "output": {"dir": ".", "events": "events.jsonl", "series": "series.csv",
               "final_state": "final_state.json", "histogram": "histogram.csv",
               "fit": "fit.json", "buckets": "buckets.csv", "image": "image.ppm",
               "sobolev": "sobolev.csv"},
    "ensemble": {"n_seeds": 1, "base_seed": None, "threads": None},
    "stats": {"bins_per_decade": 20, "fit_lo": 1e-2, "fit_hi": 1e-1, "bucket_lambda": 1.1,
              "j1": -98, "normalization": "density", "hist_lo": 1e-3, "hist_hi": 1.0},
    "sobolev": {"s": 0.1, "p": 1.0, "r_min": 1e-4, "n_samples": 20_000},
    "render": {"width": 512, "height": 512},
    "verify": {"level": "fast", "only": None, "inject": None, "report": None},
}
SIM_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}
_NUM = (int, float)
_TYPES = {
    "algorithm": str, "degenerate_rule": str, "delta": _NUM, "p": _NUM, "gamma": _NUM,
    "seed": int, "max_steps": (int, type(None)), "min_length": (_NUM + (type(None),)),
    "block_depth": int, "bucket_lambda": _NUM, "argmin_literal": bool, "change1_literal": bool,
    "max_components": (int, type(None)), "reject_short": bool, "record_events": bool,
    "m": list,
}


@dataclasses.dataclass
class RunSpec:
    sim: dict
    output: dict
    ensemble: dict
    stats: dict
    sobolev: dict
    render: dict
    verify: dict

    def config(self, seed=None):
        d = dict(self.sim)
        if seed is not None:
            d["seed"] = seed
        try:
            return SimConfig.from_dict(d)
        except (TypeError, ValueError) as e:
            raise UsageError(f"invalid simulation config: {e}") from None

    def path(self, key, seed=None):
        name = self.output[key]
        if seed is not None and self.ensemble["n_seeds"] > 1:
            stem, dot, ext = name.rpartition(".")
            name = f"{stem}_seed{seed}.{ext}" if dot else f"{name}_seed{seed}"
        return Path(self.output["dir"]) / name

    def seeds(self):
        base = self.ensemble["base_seed"]
        if base is None:
            base = self.sim.get("seed", SimConfig.seed)
        return [int(base) + i for i in range(int(self.ensemble["n_seeds"]))]


def _check_type(key, val):
    want = _TYPES.get(key)
    if want is None:
        return
    allowed = want if isinstance(want, tuple) else (want,)
    # bool is an int subclass; only accept it where a bool is expected
    if isinstance(val, bool) and bool not in allowed or not isinstance(val, allowed):
        raise UsageError(f"config key {key!r}: unexpected type {type(val).__name__}")


def load_spec(path=None, text=None):
    """Parse and validate a RunSpec; unknown keys are rejected by name."""
    raw = {}
    if path is not None or text is not None:
        src = text if text is not None else Path(path).read_text()
        try:
            raw = json.loads(src)
        except json.JSONDecodeError as e:
            raise UsageError(f"{path or '<config>'}:{e.lineno}:{e.colno}: {e.msg}") from None
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
    sim = {}
    sections = {k: dict(v) for k, v in SECTIONS.items()}
    for key, val in raw.items():
        if key in SECTIONS:
            if not isinstance(val, dict):
                raise UsageError(f"config section {key!r} must be an object")
            for sk, sv in val.items():
                if sk not in SECTIONS[key]:
                    raise UsageError(f"unknown config key {key}.{sk}")
                sections[key][sk] = sv
        elif key in SIM_FIELDS:
            _check_type(key, val)
            sim[key] = val
        else:
            raise UsageError(f"unknown config key {key!r}")
    return RunSpec(sim, **sections)


def _apply(spec, args, mapping):
    # flags override the file; mapping: attr -> (section or None, key)
    for attr, (section, key) in mapping.items():
        v = getattr(args, attr, None)
        if v is None:
            continue
        if section is None:
            spec.sim[key] = v
        else:
            spec.__dict__[section][key] = v


SIM_FLAGS = {
    "algorithm": (None, "algorithm"), "seed": (None, "seed"), "delta": (None, "delta"),
    "p": (None, "p"), "gamma": (None, "gamma"), "max_steps": (None, "max_steps"),
    "min_length": (None, "min_length"), "degenerate_rule": (None, "degenerate_rule"),
    "block_depth": (None, "block_depth"), "max_components": (None, "max_components"),
    "n_seeds": ("ensemble", "n_seeds"), "base_seed": ("ensemble", "base_seed"),
    "threads": ("ensemble", "threads"), "out": ("output", "dir"),
}


def _write(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)


def _library(cfg):
    return make_library(cfg.boundary(), cfg.wells(), cfg.delta, cfg.block_depth)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(spec, args):
    base = spec.config()
    seeds = spec.seeds()
    sob = None
    if args.sobolev:
        sob = SobolevParams(**spec.sobolev)
    res = run_ensemble(base, seeds, threads=spec.ensemble["threads"])
    for s in seeds:
        r = res[s]
        _write(spec.path("events", s), r.events_jsonl())
        _write(spec.path("series", s), r.series_csv())
        _write(spec.path("final_state", s), json.dumps(r.final_state()) + "\n")
        if sob is not None:
            ss = step_difference_series(r, _library(base), sob, seed=s)
            _write(spec.path("sobolev", s), ss.to_csv(STIMA_C))
        print(f"seed {s}: k={r.k} volume={r.volume:.6g} placements={len(r.placed['length'])}")
    return 0


def _read_state(path):
    try:
        st = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read state {path}: {e}") from None
    if not isinstance(st, dict) or "placed" not in st or "config" not in st:
        raise UsageError(f"{path} is not a final-state file")
    return st


def cmd_stats(spec, args):
    if args.combine:
        fits = []
        for p in args.combine:
            try:
                fits.append(json.loads(Path(p).read_text()))
            except (OSError, json.JSONDecodeError) as e:
                raise UsageError(f"cannot read fit {p}: {e}") from None
        # fit exponents describe densities x^-exponent
        ce = combine_distributions(-float(fits[0]["exponent"]), -float(fits[1]["exponent"]))
        out = {"alpha_outer": -float(fits[0]["exponent"]),
               "beta_inner": -float(fits[1]["exponent"]),
               "combined_exponent": ce.exponent, "branch": ce.branch, "tie": ce.tie}
        print(json.dumps(out))
        return 0
    if not args.input:
        raise UsageError("stats needs --input FILE (final_state.json) or --combine A B")
    st_cfg = spec.stats
    edges = log_bins(st_cfg["hist_lo"], st_cfg["hist_hi"], st_cfg["bins_per_decade"])
    hist = None
    vols = {}
    total = 0.0
    for path in args.input:
        st = _read_state(path)
        placed = placed_from_state(st)
        x = placed_lengths(placed)
        h = (length_histogram(x, bins=edges) if len(x)
             else Histogram(edges, np.zeros(len(edges) - 1), 0))
        hist = h if hist is None else hist + h
        cfg = SimConfig.from_dict(st["config"])
        bp = make_bucket_params(st_cfg["bucket_lambda"], cfg.delta)
        comps = st["components"]
        rects = np.array([c["rect"] for c in comps], dtype=float).reshape(-1, 4)
        w = np.array([c["weight"] for c in comps], dtype=float)
        bs = bucket_volumes(rects, bp, weights=w)
        for j, v in bs.volumes.items():
            vols[j] = vols.get(j, 0.0) + v
        total += bs.total
    _write(spec.path("histogram"), hist.to_csv())
    try:
        fit = fit_power_law(hist, st_cfg["fit_lo"], st_cfg["fit_hi"],
                            density=st_cfg["normalization"] != "counts")
        fit_doc = json.loads(fit.to_json())
    except MartensimError as e:
        fit_doc = {"exponent": None, "error": str(e)}
    fit_doc["normalization"] = st_cfg["normalization"]
    fit_doc["n_inputs"] = len(args.input)
    fit_doc["mean_covered_fraction"] = 1.0 - total / len(args.input)
    _write(spec.path("fit"), json.dumps(fit_doc) + "\n")
    lines = ["class,volume"]
    for j in sorted(vols):
        lines.append(f"{j},{vols[j]!r}")
    lines.append(f"total,{total!r}")
    _write(spec.path("buckets"), "\n".join(lines) + "\n")
    print(json.dumps(fit_doc))
    return 0


def cmd_render(spec, args):
    w, h = int(spec.render["width"]), int(spec.render["height"])
    if args.block:
        # only the block parameters matter here; no run is made
        if "max_steps" not in spec.sim and "min_length" not in spec.sim:
            spec.sim["max_steps"] = 0
        cfg = spec.config()
        lib = _library(cfg)
        img = rasterize(lib.block(1 if args.block.upper().startswith("H") else 2), w, h)
    else:
        if not args.state:
            raise UsageError("render needs --state FILE or --block H|V")
        st = _read_state(args.state)
        cfg = SimConfig.from_dict(st["config"])
        img = rasterize_result(placed_from_state(st), _library(cfg), w, h)
    out = Path(args.image) if args.image else spec.path("image")
    _write(out, write_ppm(img))
    print(f"wrote {out} ({w}x{h})")
    return 0


def cmd_verify(spec, args):
    from .verify import parse_inject, run_suite

    v = spec.verify
    level = args.level or v["level"]
    only = v["only"]
    if args.only:
        only = [int(x) for x in args.only.split(",") if x.strip()]
    inject_items = args.inject if args.inject else (v["inject"] or [])
    if isinstance(inject_items, dict):
        inject_items = [f"{k}={val}" for k, val in inject_items.items()]
    try:
        inject = parse_inject(inject_items)
        report = run_suite(level, only=only, inject=inject, threads=spec.ensemble["threads"],
                           echo=lambda line: print(line, flush=True))
    except (KeyError, ValueError) as e:
        raise UsageError(str(e)) from None
    path = Path(args.report or v["report"] or Path(spec.output["dir"]) / "verify_report.json")
    _write(path, report.to_json() + "\n")
    if report.passed:
        print(f"all {len(report.results)} criteria passed; report {path}")
        return 0
    print(f"FAILED criteria: {', '.join(str(i) for i in report.failing)}; report {path}")
    return 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="martensim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="RunSpec JSON file")
        p.add_argument("--threads", type=int, help="worker threads (else MARTENSIM_THREADS)")
        p.add_argument("--out", help="output directory")

    s = sub.add_parser("simulate", help="run one or more seeds and write logs")
    common(s)
    s.add_argument("--algorithm", choices=["A", "B", "Amod"])
    s.add_argument("--seed", type=int)
    s.add_argument("--delta", type=float)
    s.add_argument("--p", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--max-steps", type=int)
    s.add_argument("--min-length", type=float)
    s.add_argument("--degenerate-rule", choices=["Original", "Change1"])
    s.add_argument("--block-depth", type=int)
    s.add_argument("--max-components", type=int)
    s.add_argument("--n-seeds", type=int)
    s.add_argument("--base-seed", type=int)
    s.add_argument("--sobolev", action="store_true", help="also write the step-difference series")

    t = sub.add_parser("stats", help="histogram, power-law fit and aspect buckets")
    common(t)
    t.add_argument("--input", nargs="+", help="final_state.json files (pooled)")
    t.add_argument("--combine", nargs=2, metavar=("OUTER", "INNER"),
                   help="two fit JSON files; prints the combined exponent")
    t.add_argument("--fit-lo", type=float)
    t.add_argument("--fit-hi", type=float)
    t.add_argument("--bins-per-decade", type=int)
    t.add_argument("--normalization", choices=["density", "counts"])

    r = sub.add_parser("render", help="write a PPM image of a state or a building block")
    common(r)
    r.add_argument("--state", help="final_state.json")
    r.add_argument("--block", help="render the library block H or V instead")
    r.add_argument("--width", type=int)
    r.add_argument("--height", type=int)
    r.add_argument("--image", help="output file (default from the config)")
    r.add_argument("--delta", type=float)
    r.add_argument("--block-depth", type=int)

    v = sub.add_parser("verify", help="run the acceptance criteria")
    common(v)
    v.add_argument("level", nargs="?", choices=["fast", "full"])
    v.add_argument("--report", help="report JSON path")
    v.add_argument("--only", help="comma separated criterion ids")
    v.add_argument("--inject", action="append", metavar="NAME=VALUE",
                   help="override a checker constant (mutation test)")
    return ap


STATS_FLAGS = {"fit_lo": ("stats", "fit_lo"), "fit_hi": ("stats", "fit_hi"),
               "bins_per_decade": ("stats", "bins_per_decade"),
               "normalization": ("stats", "normalization"),
               "threads": ("ensemble", "threads"), "out": ("output", "dir")}
RENDER_FLAGS = {"width": ("render", "width"), "height": ("render", "height"),
                "delta": (None, "delta"), "block_depth": (None, "block_depth"),
                "threads": ("ensemble", "threads"), "out": ("output", "dir")}
VERIFY_FLAGS = {"threads": ("ensemble", "threads"), "out": ("output", "dir")}
COMMANDS = {"simulate": (cmd_simulate, SIM_FLAGS), "stats": (cmd_stats, STATS_FLAGS),
            "render": (cmd_render, RENDER_FLAGS), "verify": (cmd_verify, VERIFY_FLAGS)}


def main(argv=None):
    args = build_parser().parse_args(argv)
    fn, flags = COMMANDS[args.command]
    try:
        spec = load_spec(args.config) if args.config else load_spec()
        _apply(spec, args, flags)
        if args.command == "simulate" and "max_steps" not in spec.sim and "min_length" not in spec.sim:
            raise UsageError("simulate needs a stop condition: --max-steps or --min-length")
        if spec.ensemble["threads"] is not None:
            os.environ["MARTENSIM_THREADS"] = str(spec.ensemble["threads"])
        return fn(spec, args)
    except UsageError as e:
        print(f"martensim: error: {e}", file=sys.stderr)
        return 2
    except (MartensimError, ValueError) as e:
        print(f"martensim: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"martensim: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
