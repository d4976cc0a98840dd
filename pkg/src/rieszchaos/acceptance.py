"""The ten end-to-end acceptance checks, shared by the test suite and `verify-all`.

Seeds, path counts and index sets are fixed up front. `quick=True` shrinks
sample sizes for a smoke run; the tolerances stay the same, so quick runs
may fail on Monte Carlo noise.
"""

from __future__ import annotations

import filecmp
import json
import tempfile
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import stats

from .analysis import (box_dimension, dimension_bounds, dual_recover, graph_points, holder_estimate,
                       modulus_stability, sampled_chaos, small_ball_report)
from .chaos_sampler import chaos_cov, chaos_eval, sample_atoms
from .meyer_basis import WaveletIndex
from .riesz_core import derive_params, kernel_norm
from .synthesis import (TruncationSpec, fbm_reference, level_masses, resolve_truncation, sample_values,
                        second_moment, synth_field, synth_paths)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"AC{self.number:>2} {'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def fbm_cov(s, t, H):
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - abs(t - s) ** (2 * H))


AC1_PAIRS = [(0.1, 0.9), (0.25, 0.5), (0.5, 1.0), (0.3, 0.31), (0.75, 1.0), (1.0, 1.0), (0.5, 0.5),
             (0.05, 0.6), (0.2, 0.8), (0.9, 0.95)]


def ac1_fbm_equivalence(quick=False, threads=1):
    n_paths = 400 if quick else 2000
    grid = np.linspace(0.0, 1.0, 1024)
    worst, ks_min, metrics = 0.0, 1.0, {}
    for H, seed in ((0.6, 101), (0.75, 102)):
        params = derive_params(H, 1)
        tr = resolve_truncation(params, TruncationSpec())
        X = np.array([p.total for p in synth_paths(params, grid, tr, seed, n_paths, threads)])
        for s, t in AC1_PAIRS:
            i, j = np.argmin(np.abs(grid - s)), np.argmin(np.abs(grid - t))
            prod = X[:, i] * X[:, j]
            z = (prod.mean() - fbm_cov(grid[i], grid[j], H)) / (prod.std(ddof=1) / np.sqrt(n_paths))
            worst = max(worst, abs(z))
        B = fbm_reference(H, grid, n_paths, seed + 1000)
        for lag in (1, 16, 256):
            i0 = 511
            p = stats.ks_2samp(X[:, i0 + lag] - X[:, i0], B[:, i0 + lag] - B[:, i0]).pvalue
            ks_min = min(ks_min, p)
            metrics[f"ks_p_H{H}_lag{lag}"] = p
    metrics.update(max_abs_z=worst, min_ks_p=ks_min)
    ok = worst <= 3 and ks_min > 0.01
    return ok, f"max |z| = {worst:.2f} (<= 3), min KS p = {ks_min:.3f} (> 0.01)", metrics


def ac2_second_moment(quick=False, threads=1):
    H, ts = 0.7, np.array([0.25, 0.5, 1.0])
    params = derive_params(H, 2)
    tr = resolve_truncation(params, TruncationSpec())
    m = np.array([second_moment(params, t, tr) for t in ts])
    rel = np.abs(m / (ts ** (2 * H) * m[-1]) - 1)
    n_paths = 500 if quick else 2000
    X = sample_values(params, ts, tr, seed=202, n_paths=n_paths, threads=threads)
    z = (np.mean(X**2, axis=0) - m) / (np.std(X**2, axis=0, ddof=1) / np.sqrt(n_paths))
    ok = bool(np.all(rel <= 5e-3) and np.all(np.abs(z) <= 3))
    return ok, f"max rel = {rel.max():.2e} (<= 5e-3), max |z| = {np.abs(z).max():.2f} (<= 3)", \
        {"analytic": m.tolist(), "rel": rel.tolist(), "z": z.tolist()}


def ac3_parseval(quick=False, threads=1):
    out = {}
    for d, H in ((1, 0.75), (2, 0.7)):
        params = derive_params(H, d)
        tr = resolve_truncation(params, TruncationSpec())
        total = sum(level_masses(params, tr, 1.0).values())
        out[d] = total / kernel_norm(1.0, params) ** 2
    worst = max(abs(v - 1) for v in out.values())
    return worst <= 0.01, f"captured fraction {out} (within 1%)", {"ratio": out}


def _ac4_indices(d):
    if d == 2:
        base = [((1, 1), (0, 0)), ((1, 1), (0, 1)), ((1, 1), (1, 0)), ((0, 1), (0, 1)), ((1, 0), (1, 0)),
                ((0, 1), (2, 2)), ((1, 1), (2, 2)), ((1, 1), (1, 2)), ((1, 1), (2, 1)), ((1, 0), (0, 3)),
                ((0, 1), (3, 0)), ((1, 1), (-1, 1))]
        idx = [WaveletIndex(0, k, e) for e, k in base]
        idx += [WaveletIndex(1, k, e) for e, k in [((1, 1), (0, 0)), ((0, 1), (0, 0)), ((1, 0), (1, 1)),
                                                  ((1, 1), (0, 1)), ((1, 1), (1, 0)), ((0, 1), (1, 2)),
                                                  ((1, 0), (2, 1)), ((1, 1), (3, 3))]]
        return idx
    base = [((1, 0, 1), (1, 2, 3)), ((1, 1, 0), (1, 3, 2)), ((0, 1, 1), (2, 1, 3)), ((1, 1, 1), (1, 1, 1)),
            ((1, 1, 1), (1, 1, 2)), ((1, 1, 1), (2, 1, 1)), ((1, 0, 0), (1, 2, 2)), ((0, 0, 1), (2, 2, 1)),
            ((1, 1, 1), (0, 1, 2)), ((1, 1, 1), (2, 1, 0)), ((0, 1, 0), (0, 0, 0)), ((1, 0, 1), (0, 0, 0)),
            ((1, 1, 0), (0, 0, 0))]
    idx = [WaveletIndex(0, k, e) for e, k in base]
    idx += [WaveletIndex(1, k, e) for e, k in [((1, 1, 1), (0, 0, 0)), ((1, 0, 1), (1, 2, 3)),
                                              ((1, 1, 0), (1, 3, 2)), ((0, 0, 1), (0, 0, 1)),
                                              ((1, 1, 1), (0, 0, 1)), ((0, 1, 1), (1, 1, 1)),
                                              ((1, 0, 0), (0, 1, 1))]]
    return idx


def ac4_chaos_covariance(quick=False, threads=1):
    n = 20000 if quick else 100000
    worst, metrics = 0.0, {}
    for d, seed in ((2, 401), (3, 402)):
        idx = _ac4_indices(d)
        atoms = sample_atoms((-1, 1), {0: [(-1, 3)], 1: [(0, 3)]}, seed, np.arange(n))
        Z = np.array([chaos_eval(i, atoms).value for i in idx])
        C = np.array([[chaos_cov(a, b) for b in idx] for a in idx])
        emp = np.empty_like(C)
        se = np.empty_like(C)
        for r in range(len(idx)):
            prods = Z[r] * Z
            emp[r] = prods.mean(axis=1)
            se[r] = prods.std(axis=1, ddof=1) / np.sqrt(n)
        z = np.abs(emp - C) / np.maximum(se, 1e-12)
        worst = max(worst, float(z.max()))
        metrics[f"d{d}_max_z"] = float(z.max())
        metrics[f"d{d}_example"] = float(C[0, 1]) if d == 3 else None
    ex = chaos_cov(WaveletIndex(0, (1, 2, 3), (1, 0, 1)), WaveletIndex(0, (1, 3, 2), (1, 1, 0)))
    ok = worst <= 4 and ex == 1.0
    return ok, f"max |z| = {worst:.2f} (<= 4), d=3 example covariance = {ex}", metrics


@lru_cache(maxsize=2)
def _d2_paths(n_paths):
    params = derive_params(0.7, 2)
    grid = np.linspace(0.0, 1.0, 2**14 + 1)
    return synth_paths(params, grid, TruncationSpec(j_max=15), 2024, n_paths)


def ac5_holder(quick=False, threads=1):
    n_paths = 2 if quick else 6
    g2 = np.concatenate([holder_estimate(p).pointwise_exponents[:, 1] for p in _d2_paths(n_paths)])
    med2 = float(np.median(g2))
    grid = np.linspace(0.0, 1.0, 2**14 + 1)
    p1 = synth_paths(derive_params(0.7, 1), grid, TruncationSpec(j_max=15), 2025, n_paths, threads)
    g1 = np.concatenate([holder_estimate(p).pointwise_exponents[:, 1] for p in p1])
    B = fbm_reference(0.7, grid, n_paths, 2026)
    gb = np.concatenate([holder_estimate((grid, b)).pointwise_exponents[:, 1] for b in B])
    med1, medb = float(np.median(g1)), float(np.median(gb))
    ok = abs(med2 - 0.7) <= 0.07 and abs(med1 - medb) <= 0.05
    return ok, f"d=2 median {med2:.3f} (0.70 +- 0.07); d=1 median {med1:.3f} vs fBm {medb:.3f} (+- 0.05)", \
        {"d2": med2, "d1": med1, "fbm": medb}


def ac6_modulus(quick=False, threads=1):
    paths = _d2_paths(2 if quick else 6)
    log_r = [modulus_stability(p)["ratio"] for p in paths]
    plain_r = [modulus_stability(p, log_exponent=0)["ratio"] for p in paths]
    ml, mp = float(np.median(log_r)), float(np.median(plain_r))
    ok = ml <= 1.25 and mp >= 1.10
    return ok, f"median growth 2^12->2^14: log-corrected {ml:.3f} (<= 1.25), plain {mp:.3f} (>= 1.10)", \
        {"log": log_r, "plain": plain_r}


def ac7_small_ball(quick=False, threads=1):
    params = derive_params(0.7, 2)
    tr = resolve_truncation(params, TruncationSpec(j_max=6, k_halfwidth=8, tail_budget=1e-2))
    n = 20000 if quick else 100000
    X = sample_values(params, np.array([1.0]), tr, seed=707, n_paths=n, threads=threads)[:, 0]
    xg = np.logspace(-3, 0, 16)
    rep = small_ball_report(X, 2, xg)
    small = rep.x <= 1e-2 + 1e-15
    slope_small = float(np.polyfit(np.log(rep.x[small]), np.log(rep.cdf[small]), 1)[0]) if small.sum() >= 2 \
        else float("nan")
    ok = rep.slope >= 0.5 - 0.1 and slope_small >= 0.5 - 0.1 and np.isfinite(rep.C_min)
    return ok, f"fitted slope {rep.slope:.3f}, smallest-decade slope {slope_small:.3f} (>= 0.4), C = {rep.C_min:.3f}", \
        {"report": rep.to_dict(), "slope_small": slope_small}


def ac8_dual(quick=False, threads=1):
    errs = []
    params = derive_params(0.7, 1)
    h = 2.0**-8
    ax = np.arange(-12.0, 28.0 + h / 2, h)
    f = synth_field(params, [ax], TruncationSpec(j_max=6, k_halfwidth=12, tail_budget=1.0), 808)
    for k in range(2, 22, 2):
        idx = WaveletIndex(1, (k,), (1,))
        errs.append(abs(dual_recover(f, idx) / sampled_chaos(f, idx) - 1))
    e1 = max(errs)
    params = derive_params(0.7, 2)
    h = 2.0**-6
    ax = np.arange(-10.0, 14.0 + h / 2, h)
    f = synth_field(params, [ax, ax], TruncationSpec(j_max=4, k_halfwidth=8, tail_budget=1.0), 809)
    errs2 = []
    cases = [((1, 1), (1, 2)), ((0, 1), (1, 3))] if quick else \
        [((1, 1), (1, 2)), ((1, 1), (2, 2)), ((0, 1), (1, 3)), ((1, 0), (2, 1))]
    for e, k in cases:
        idx = WaveletIndex(0, k, e)
        errs2.append(abs(dual_recover(f, idx, radius=10) / sampled_chaos(f, idx) - 1))
    e2 = max(errs2)
    return e1 <= 0.05 and e2 <= 0.05, f"max relative error d=1 {e1:.2e}, d=2 {e2:.2e} (<= 5%)", \
        {"d1": errs, "d2": errs2}


def ac9_dimension(quick=False, threads=1):
    rep = dimension_bounds((0.6,), 2, 1, 1.0)
    exact = rep.lower_graph == 1.2 and abs(rep.upper_graph - 1.4) < 1e-12
    n_rep = 2 if quick else 4
    grid = np.linspace(0.0, 1.0, 2**14 + 1)
    graphs = synth_paths(derive_params(0.7, 1), grid, TruncationSpec(j_max=15), 909, n_rep, threads)
    gd = float(np.mean([box_dimension(graph_points(grid, p.total))[0] for p in graphs]))
    comps = []
    for H, seed in ((0.6, 910), (0.8, 911)):
        params = derive_params(H, 1)
        tr = resolve_truncation(params, TruncationSpec(j_max=15, tail_budget=1e-2))
        comps.append([p.total for p in synth_paths(params, grid, tr, seed, n_rep, threads)])
    rd = float(np.mean([box_dimension(np.column_stack([a, b]))[0] for a, b in zip(*comps)]))
    ok = exact and abs(gd - 1.3) <= 0.10 and abs(rd - 1.5) <= 0.15
    return ok, (f"bounds lower_graph={rep.lower_graph}, upper_graph={rep.upper_graph:.12g}; "
                f"graph box {gd:.3f} (1.30 +- 0.10); range box {rd:.3f} (1.50 +- 0.15)"), \
        {"graph": gd, "range": rd}


def ac10_determinism(quick=False, threads=1):
    from .cli import RunConfig, run
    dirs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k, th in enumerate((1, 1, 4, 16)):
            out = Path(tmp) / f"run{k}"
            cfg = RunConfig("synth", H=0.7, d=2, n=65, n_paths=8 if quick else 60, seed=42, out=str(out),
                            threads=th)
            if run(cfg) != 0:
                return False, "synth run failed", {}
            m = json.loads((out / "manifest.json").read_text())
            m.pop("timing")
            m["config"].pop("threads")
            m["config"].pop("out")
            (out / "manifest.json").write_text(json.dumps(m, sort_keys=True))
            dirs.append(out)
        files = sorted(p.name for p in dirs[0].iterdir())
        same = all(filecmp.cmp(dirs[0] / f, d / f, shallow=False) for d in dirs[1:] for f in files)
        same &= all(sorted(p.name for p in d.iterdir()) == files for d in dirs[1:])
    return bool(same), f"{len(files)} files identical across reruns and threads 1, 4, 16: {bool(same)}", {}


CRITERIA = [
    (1, "fBm equivalence (d=1)", ac1_fbm_equivalence),
    (2, "exact second moment (d=2)", ac2_second_moment),
    (3, "Parseval truncation", ac3_parseval),
    (4, "chaos covariance oracle", ac4_chaos_covariance),
    (5, "pointwise Holder exponent", ac5_holder),
    (6, "log-corrected modulus", ac6_modulus),
    (7, "small-ball bound", ac7_small_ball),
    (8, "dual recovery", ac8_dual),
    (9, "dimension bounds and box counting", ac9_dimension),
    (10, "determinism and parallel safety", ac10_determinism),
]


def run_criterion(number, quick=False, threads=1):
    num, name, fn = CRITERIA[number - 1]
    t0 = time.time()
    ok, detail, metrics = fn(quick=quick, threads=threads)
    return CriterionResult(num, name, bool(ok), detail, metrics, time.time() - t0)


def run_all(quick=False, threads=1, echo=False):
    results = []
    for num, _, _ in CRITERIA:
        r = run_criterion(num, quick, threads)
        if echo:
            print(r.line(), flush=True)
        results.append(r)
    return results
