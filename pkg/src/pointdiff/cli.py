"""Command-line front end: evaluate tables, run the verification suites,
and run sampling experiments.

    pointdiff table   --quantity survival --family gst --theta 1 --T 1 --r 1
    pointdiff verify  --suite kernel
    pointdiff sample  --kind hittime --family gst --n-paths 100000 --seed 7

Configuration precedence: command-line flags > config file (plain
key=value lines via --config) > defaults.  POINTDIFF_RTOL in the
environment overrides the default relative quadrature tolerance.  Output
is deterministic byte-for-byte for a fixed configuration (including seed).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .doob import (DensityEval, hit_time_law, survival_probability,
                   transition_density)
from .families import drift_eval, h_eval, parse_family, family_label
from .hmap import HEval, h_map_radial
from .kernel import KernelParams, full_kernel
from .quadspec import PointDiffError, QuadratureSpec

_DEFAULTS = dict(family="gst", theta=1.0, T=1.0, abs_tol=1e-10,
                 rel_tol=1e-8, seed=0, n_paths=100000, workers=1,
                 fmt="csv", out=None)


@dataclass(frozen=True)
class RunConfig:
    family: str
    theta: float
    horizon_T: float
    abs_tol: float
    rel_tol: float
    seed: int
    n_paths: int
    workers: int
    fmt: str
    out: str | None

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(abs_tol=self.abs_tol, rel_tol=self.rel_tol)

    def family_spec(self):
        return parse_family(self.family, self.theta, self.horizon_T,
                            self.quad)

    def serialize(self) -> str:
        """Canonical key=value form; parse(serialize(cfg)) round-trips."""
        items = [
            ("family", family_label(self.family_spec())),
            ("theta", fmt_float(self.theta)),
            ("T", fmt_float(self.horizon_T)),
            ("abs_tol", fmt_float(self.abs_tol)),
            ("rel_tol", fmt_float(self.rel_tol)),
            ("seed", str(self.seed)),
            ("n_paths", str(self.n_paths)),
            ("workers", str(self.workers)),
            ("format", self.fmt),
        ]
        return "\n".join(f"{k}={v}" for k, v in items)


def fmt_float(x: float) -> str:
    """17 significant digits: exact round trip for 64-bit floats."""
    return format(float(x), ".17g")


def _read_config_file(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"malformed config line: {raw!r}")
            out[key.strip()] = val.strip()
    return out


def build_config(args) -> RunConfig:
    cfg = dict(_DEFAULTS)
    env_rtol = os.environ.get("POINTDIFF_RTOL")
    if env_rtol:
        cfg["rel_tol"] = float(env_rtol)
    if getattr(args, "config", None):
        raw = _read_config_file(args.config)
        casts = dict(family=str, theta=float, T=float, abs_tol=float,
                     rel_tol=float, seed=int, n_paths=int, workers=int,
                     format=str, out=str)
        for key, val in raw.items():
            if key not in casts:
                raise ValueError(f"unknown config key {key!r}")
            cfg["fmt" if key == "format" else key] = casts[key](val)
    for attr, key in [("family", "family"), ("theta", "theta"), ("T", "T"),
                      ("abs_tol", "abs_tol"), ("rel_tol", "rel_tol"),
                      ("seed", "seed"), ("n_paths", "n_paths"),
                      ("workers", "workers"), ("format", "fmt"),
                      ("out", "out")]:
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    return RunConfig(family=cfg["family"], theta=cfg["theta"],
                     horizon_T=cfg["T"], abs_tol=cfg["abs_tol"],
                     rel_tol=cfg["rel_tol"], seed=cfg["seed"],
                     n_paths=cfg["n_paths"], workers=cfg["workers"],
                     fmt=cfg["fmt"], out=cfg["out"])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _emit(cfg: RunConfig, header: list, rows: list, meta: dict):
    if cfg.fmt == "json":
        payload = {"meta": {k: meta[k] for k in sorted(meta)},
                   "rows": [dict(zip(header, r)) for r in rows]}
        text = json.dumps(payload, sort_keys=True, indent=1,
                          separators=(",", ": "))
        text += "\n"
    else:
        lines = [",".join(header)]
        for r in rows:
            lines.append(",".join(
                fmt_float(v) if isinstance(v, float) else str(v)
                for v in r))
        text = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid(text: str) -> np.ndarray:
    """Grid grammar: single float or start:stop:count (inclusive)."""
    if ":" in text:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.array([float(text)])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_table(args) -> int:
    cfg = build_config(args)
    spec = cfg.family_spec()
    t_grid = _grid(args.t)
    r_grid = _grid(args.r)
    r0 = args.r0
    d = DensityEval(spec)
    e = HEval(spec)
    quantity = args.quantity
    rows = []
    err_bound = lambda v: max(cfg.abs_tol, abs(v) * cfg.rel_tol)
    law = None
    for t in t_grid:
        for r in r_grid:
            t, r = float(t), float(r)
            if quantity == "kernel":
                v = full_kernel(KernelParams(cfg.theta, cfg.quad), t,
                                (r0, 0.0), (r, 0.0))
            elif quantity == "h":
                v = h_eval(spec, t, (r, 0.0))
            elif quantity == "drift":
                v = drift_eval(spec, t, (r, 0.0)).radial_part
            elif quantity == "density":
                v = transition_density(d, 0.0, t, (r0, 0.0), (r, 0.0))
            elif quantity == "survival":
                v = survival_probability(d, t, (r, 0.0))
            elif quantity == "hitdensity":
                if law is None or law.x0 != (r, 0.0):
                    law = hit_time_law(d, (r, 0.0))
                v = float(law.density_on_hit(t))
            elif quantity == "hmap":
                v = h_map_radial(e, t, r) * r
            else:
                raise ValueError(f"unknown quantity {quantity!r}")
            rows.append((t, r, float(v), err_bound(float(v))))
    meta = {"quantity": quantity, "config": cfg.serialize().split("\n"),
            "r0": fmt_float(r0)}
    _emit(cfg, ["t", "r", "value", "err_estimate"], rows, meta)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suite
    cfg = build_config(args)
    results = run_suite(args.suite, theta=cfg.theta,
                        horizon_T=cfg.horizon_T, quad=cfg.quad,
                        n_paths=cfg.n_paths, seed=cfg.seed,
                        workers=cfg.workers, family=cfg.family)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_sample(args) -> int:
    from . import sampler as sp
    cfg = build_config(args)
    spec = cfg.family_spec()
    d = DensityEval(spec)
    x0 = (args.x0, 0.0)
    meta = {"kind": args.kind, "config": cfg.serialize().split("\n"),
            "x0": fmt_float(args.x0)}
    if args.kind == "hittime":
        taus = sp.sample_hit_times(d, x0, cfg.n_paths, seed=cfg.seed,
                                   workers=cfg.workers)
        rows = [(i, "" if math.isnan(t) else fmt_float(float(t)))
                for i, t in enumerate(taus)]
        _emit(cfg, ["draw", "tau"], rows, meta)
        return 0
    grid = np.linspace(0.0, cfg.horizon_T, args.grid_n)
    if args.kind == "marginal":
        pts = sp.sample_paths_marginal(d, x0, grid, cfg.n_paths,
                                       seed=cfg.seed, workers=cfg.workers)
    elif args.kind == "conditional":
        pts = sp.sample_conditional_paths(d, x0, grid, cfg.n_paths,
                                          seed=cfg.seed, workers=cfg.workers)
    elif args.kind == "diagnostics":
        rows_d = sp.path_diagnostics(d, x0, grid, cfg.n_paths,
                                     seed=cfg.seed, workers=cfg.workers)
        rows = [(r["eps"], r["occupation_mean"], r["excursions_mean"],
                 r["drift_integral_mean"]) for r in rows_d]
        _emit(cfg, ["eps", "occupation_mean", "excursions_mean",
                    "drift_integral_mean"], rows, meta)
        return 0
    else:
        raise ValueError(f"unknown sample kind {args.kind!r}")
    rows = []
    for i in range(pts.shape[0]):
        for j, t in enumerate(grid):
            rows.append((i, float(t), float(pts[i, j, 0]),
                         float(pts[i, j, 1])))
    _emit(cfg, ["path", "t", "x1", "x2"], rows, meta)
    return 0


# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--family", help="gst | leb | dir:eps=<f> | gau:alpha=<f>")
    p.add_argument("--theta", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--abs-tol", dest="abs_tol", type=float)
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-paths", dest="n_paths", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out")
    p.add_argument("--config", help="key=value config file")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pointdiff",
        description="Planar point-interaction diffusions: tables, "
                    "verification, sampling.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="tabulate a quantity on a (t, r) grid")
    p.add_argument("--quantity", required=True,
                   choices=("kernel", "h", "drift", "density", "survival",
                            "hitdensity", "hmap"))
    p.add_argument("--t", default="1.0", help="time grid: value or a:b:n")
    p.add_argument("--r", default="1.0", help="radius grid: value or a:b:n")
    p.add_argument("--r0", type=float, default=1.0,
                   help="start radius for two-point quantities")
    _add_common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("verify", help="run a named invariant suite")
    p.add_argument("--suite", default="all",
                   choices=("specfun", "kernel", "families", "doob", "hmap",
                            "sampler", "all"))
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample", help="run a sampling experiment")
    p.add_argument("--kind", required=True,
                   choices=("marginal", "conditional", "hittime",
                            "diagnostics"))
    p.add_argument("--x0", type=float, default=1.0, help="start radius")
    p.add_argument("--grid-n", dest="grid_n", type=int, default=9)
    _add_common(p)
    p.set_defaults(func=cmd_sample)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except PointDiffError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
