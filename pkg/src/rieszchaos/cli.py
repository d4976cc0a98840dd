"""Command-line front end: synth, field, analyze, dimension and verify-all."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .meyer_basis import BASIS_VERSION, FilterTruncationError
from .riesz_core import DomainError, QuadratureError, derive_params
from .riesz_potential import TableAccuracyError
from .synthesis import TailBudgetError, TruncationSpec

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3
OUT_ENV = "RIESZCHAOS_OUT"
COMMANDS = ("synth", "field", "analyze", "dimension", "verify-all")
PATH_SEED_SCHEME = "path i uses Philox counter word 2 = i under the master seed; paths are independent of batch size"


class ConfigError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class RunConfig:
    command: str
    H: float | None = None
    d: int = 1
    H_vec: tuple | None = None
    dimE: float = 1.0
    n: int = 1024
    n_paths: int = 1
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    threads: int = 1
    quick: bool = False
    j_min: int | None = None
    j_max: int | None = None
    k_halfwidth: int | None = None
    tail_budget: float | None = None

    def validate(self):
        v = []
        if self.command not in COMMANDS:
            v.append(f"command must be one of {COMMANDS}")
        if self.format not in ("csv", "json"):
            v.append("format must be csv or json")
        if self.command in ("synth", "field", "analyze"):
            if self.H is None or not 0.5 < self.H < 1:
                v.append("H must lie in (1/2, 1)")
            if self.d < 1:
                v.append("d must be >= 1")
        if self.command == "field" and self.d > 2:
            v.append("field requires d <= 2")
        if self.command == "analyze" and self.n < 2**10:
            v.append("analyze needs n >= 1024")
        if self.command == "dimension":
            hv = self.H_vec or ()
            if not hv:
                v.append("dimension needs --Hvec")
            elif list(hv) != sorted(hv) or not all(0.5 < h < 1 for h in hv):
                v.append("Hvec must be increasing with entries in (1/2, 1)")
            elif len(hv) > 3:
                v.append("at most 3 components (graph lives in R^4)")
            if not 0 <= self.dimE <= 1:
                v.append("dimE must lie in [0, 1]")
        if self.n < 2:
            v.append("n must be >= 2")
        if self.n_paths < 1:
            v.append("paths must be >= 1")
        if self.seed < 0:
            v.append("seed must be nonnegative")
        if self.threads < 1:
            v.append("threads must be >= 1")
        if self.j_min is not None and self.j_min >= 0:
            v.append("jmin must be negative")
        if self.j_max is not None and self.j_max < 0:
            v.append("jmax must be >= 0")
        if self.k_halfwidth is not None and self.k_halfwidth < 1:
            v.append("kw must be >= 1")
        if self.tail_budget is not None and not self.tail_budget > 0:
            v.append("budget must be positive")
        if v:
            raise ConfigError(v)

    def truncation(self, n=None):
        kw = {k: getattr(self, k) for k in ("j_min", "j_max", "k_halfwidth", "tail_budget")
              if getattr(self, k) is not None}
        return TruncationSpec.for_grid(n or self.n, **kw)

    def out_dir(self):
        return Path(self.out or os.environ.get(OUT_ENV) or "rieszchaos_out")


def fmt(x):
    return format(float(x), ".17g")


def write_path_csv(path, sample):
    lines = ["t,low,high,total"]
    for t, lo, hi, tot in zip(sample.grid, sample.low, sample.high, sample.total):
        lines.append(f"{fmt(t)},{fmt(lo)},{fmt(hi)},{fmt(tot)}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    return str(o)


def write_json(path, obj):
    Path(path).write_bytes((json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n").encode())


def versions():
    import scipy
    from importlib import metadata
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "package": pkg, "basis": BASIS_VERSION}


def manifest(cfg, stages, extra=None, started=None):
    m = {"config": dataclasses.asdict(cfg), "versions": versions(), "error_budgets": stages,
         "seed_scheme": PATH_SEED_SCHEME,
         "timing": {"wall_seconds": time.time() - started if started else None,
                    "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}}
    if extra:
        m.update(extra)
    return m


def _trunc_report(tr):
    rep = dict(tr.tail_report)
    rep.pop("per_level", None)
    return {"truncation": {k: v for k, v in dataclasses.asdict(tr).items() if k != "tail_report"}, "tails": rep}


def cmd_synth(cfg, out):
    from .synthesis import resolve_truncation, synth_paths
    params = derive_params(cfg.H, cfg.d)
    grid = np.linspace(0.0, 1.0, cfg.n)
    tr = resolve_truncation(params, cfg.truncation(cfg.n - 1))
    samples = synth_paths(params, grid, tr, cfg.seed, cfg.n_paths, cfg.threads)
    for s in samples:
        if cfg.format == "csv":
            write_path_csv(out / f"path_{s.path_index:05d}.csv", s)
        else:
            write_json(out / f"path_{s.path_index:05d}.json",
                       {"t": s.grid, "low": s.low, "high": s.high, "total": s.total})
    return _trunc_report(tr), {"files": sorted(p.name for p in out.glob("path_*"))}


def cmd_field(cfg, out):
    from .synthesis import synth_field
    params = derive_params(cfg.H, cfg.d)
    axis = np.linspace(0.0, 1.0, cfg.n)
    tr = cfg.truncation(cfg.n - 1)
    stages = {}
    for i in range(cfg.n_paths):
        fs = synth_field(params, [axis] * cfg.d, tr, cfg.seed, i)
        stages = _trunc_report(fs.truncation)
        stages["growth"] = fs.growth
        if cfg.format == "csv":
            lines = [",".join([f"t{a + 1}" for a in range(cfg.d)] + ["value"])]
            grids = np.meshgrid(*([axis] * cfg.d), indexing="ij")
            for idx in np.ndindex(fs.values.shape):
                lines.append(",".join([fmt(g[idx]) for g in grids] + [fmt(fs.values[idx])]))
            (out / f"field_{i:05d}.csv").write_bytes(("\n".join(lines) + "\n").encode())
        else:
            write_json(out / f"field_{i:05d}.json", {"axes": fs.axes, "values": fs.values})
    return stages, {}


def cmd_analyze(cfg, out):
    from .analysis import holder_estimate, modulus_stability, summary_csv
    from .synthesis import resolve_truncation, synth_paths
    params = derive_params(cfg.H, cfg.d)
    grid = np.linspace(0.0, 1.0, cfg.n)
    tr = resolve_truncation(params, cfg.truncation(cfg.n - 1))
    rows = []
    for s in synth_paths(params, grid, tr, cfg.seed, cfg.n_paths, cfg.threads):
        rep = holder_estimate(s)
        mod = modulus_stability(s)
        rep.modulus_sup, rep.modulus_stable = mod["fine"], mod["stable"]
        rep.fit_diagnostics["modulus"] = mod
        rep.fit_diagnostics["modulus_b_sensitivity"] = {b: modulus_stability(s, b=b)["fine"] for b in (2.0, 4.0, 8.0)}
        write_json(out / f"regularity_{s.path_index:05d}.json", rep.to_dict())
        rows.append({"path": s.path_index, "H": cfg.H, "d": cfg.d, "global_exponent": rep.global_exponent,
                     "modulus_sup": rep.modulus_sup, "modulus_ratio": mod["ratio"],
                     "modulus_stable": rep.modulus_stable})
    (out / "summary.csv").write_bytes(summary_csv(rows).encode())
    return _trunc_report(tr), {}


def cmd_dimension(cfg, out):
    from .analysis import box_dimension, dimension_bounds
    from .synthesis import resolve_truncation, synth_path
    H_vec = tuple(cfg.H_vec)
    rep = dimension_bounds(H_vec, cfg.d, len(H_vec), cfg.dimE)
    grid = np.linspace(0.0, 1.0, cfg.n)
    est_r, est_g, stages = [], [], {}
    for rep_i in range(cfg.n_paths):
        comps = []
        for c, H in enumerate(H_vec):
            params = derive_params(H, cfg.d)
            tr = cfg.truncation(cfg.n - 1)
            if cfg.tail_budget is None:
                # the missing deep levels only add a smooth drift, irrelevant for dimensions
                tr = dataclasses.replace(tr, tail_budget=1e-2)
            tr = resolve_truncation(params, tr)
            stages[f"H={H}"] = _trunc_report(tr)
            comps.append(synth_path(params, grid, tr, cfg.seed, rep_i * len(H_vec) + c).total)
        Y = np.column_stack(comps)
        if Y.shape[1] >= 2:
            est_r.append(box_dimension(Y)[0])
        est_g.append(box_dimension(np.column_stack([grid, Y]))[0])

    def summarize(v):
        v = np.asarray(v)
        half = 1.96 * v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else float("nan")
        return float(v.mean()), float(half)
    if est_r:
        rep.est_range, rep.est_range_ci = summarize(est_r)
    rep.est_graph, rep.est_graph_ci = summarize(est_g)
    rep.fit_windows = {"range_estimates": est_r, "graph_estimates": est_g}
    write_json(out / "dimension.json", rep.to_dict())
    return stages, {}


def cmd_verify(cfg, out):
    from .acceptance import run_all
    results = run_all(quick=cfg.quick, threads=cfg.threads, echo=True)
    write_json(out / "acceptance.json", [dataclasses.asdict(r) for r in results])
    return {}, {"passed": all(r.passed for r in results)}


HANDLERS = {"synth": cmd_synth, "field": cmd_field, "analyze": cmd_analyze, "dimension": cmd_dimension,
            "verify-all": cmd_verify}


def run(cfg: RunConfig):
    """Execute one configuration; returns the exit status."""
    try:
        cfg.validate()
    except ConfigError as e:
        sys.stderr.write(json.dumps({"error": "invalid configuration", "violations": e.violations}) + "\n")
        return EXIT_INVALID
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    try:
        stages, extra = HANDLERS[cfg.command](cfg, out)
    except DomainError as e:
        sys.stderr.write(json.dumps({"error": "invalid configuration", "violations": [str(e)]}) + "\n")
        return EXIT_INVALID
    except (TailBudgetError, QuadratureError, TableAccuracyError, FilterTruncationError) as e:
        sys.stderr.write(json.dumps({"error": "numerical budget exceeded", "detail": str(e)}) + "\n")
        return EXIT_BUDGET
    write_json(out / "manifest.json", manifest(cfg, stages, extra, started))
    if cfg.command == "verify-all" and not extra.get("passed", True):
        return EXIT_FAIL
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="rieszchaos", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        s.add_argument("--threads", type=int)
        s.add_argument("--out", help=f"output directory (env {OUT_ENV} if unset)")
        s.add_argument("--seed", type=int)
        if name == "verify-all":
            s.add_argument("--quick", action="store_true", default=None)
            continue
        s.add_argument("--d", type=int)
        s.add_argument("--n", type=int, help="grid points per axis")
        s.add_argument("--paths", type=int, dest="n_paths")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--jmin", type=int, dest="j_min")
        s.add_argument("--jmax", type=int, dest="j_max")
        s.add_argument("--kw", type=int, dest="k_halfwidth")
        s.add_argument("--budget", type=float, dest="tail_budget")
        if name == "dimension":
            s.add_argument("--Hvec", dest="H_vec", type=lambda v: tuple(float(x) for x in v.split(",")))
            s.add_argument("--dimE", type=float)
        else:
            s.add_argument("--H", type=float)
    return p


def config_from_args(argv=None):
    args = vars(build_parser().parse_args(argv))
    base = {"command": args.pop("command")}
    path = args.pop("config", None)
    if path:
        loaded = json.loads(Path(path).read_text())
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = sorted(set(loaded) - known)
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        base.update(loaded)
        base["command"] = args.get("command", base["command"])
    base.update({k: v for k, v in args.items() if v is not None})
    if base.get("H_vec") is not None:
        base["H_vec"] = tuple(base["H_vec"])
    if base["command"] == "dimension" and "n" not in base:
        base["n"] = 2**14 + 1
    return RunConfig(**base)


def main(argv=None):
    try:
        cfg = config_from_args(argv)
    except (ConfigError, TypeError, ValueError, OSError) as e:
        vio = e.violations if isinstance(e, ConfigError) else [str(e)]
        sys.stderr.write(json.dumps({"error": "invalid configuration", "violations": vio}) + "\n")
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
