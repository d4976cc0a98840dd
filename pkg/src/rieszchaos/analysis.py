"""Estimators for regularity, growth, small balls, dual coefficients and fractal dimensions."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .chaos_sampler import chaos_eval, sample_atoms
from .meyer_basis import WaveletIndex
from .riesz_potential import build_table, eval_potential


class DegeneratePathError(ValueError):
    """The path is constant, so no regularity exponent can be fitted."""


@dataclass
class RegularityReport:
    pointwise_exponents: np.ndarray
    global_exponent: float
    modulus_sup: float = float("nan")
    modulus_stable: bool | None = None
    fit_diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["pointwise_exponents"] = np.asarray(self.pointwise_exponents).tolist()
        return out


def _path_arrays(path):
    if hasattr(path, "grid"):
        return np.asarray(path.grid, dtype=float), np.asarray(path.total, dtype=float)
    t, x = path
    return np.asarray(t, dtype=float), np.asarray(x, dtype=float)


def _check_uniform(t):
    dt = np.diff(t)
    if t.size < 2 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("grid must be uniform")
    return dt[0]


def oscillation(t, x, t0, radius):
    """max - min of the path over grid points within radius of t0."""
    sel = np.abs(t - t0) <= radius * (1 + 1e-12)
    if not np.any(sel):
        return 0.0
    return float(np.max(x[sel]) - np.min(x[sel]))


def holder_estimate(path, window_levels=range(4, 11), t_points=None, n_points=50):
    """Pointwise exponents from the regression of log2 oscillation on the dyadic level m.

    path: PathSample or a (times, values) pair. t_points defaults to n_points
    equispaced interior times of (0.1, 0.9).
    """
    t, x = _path_arrays(path)
    if t.size < 2**10:
        raise ValueError("path needs at least 2^10 points")
    if np.ptp(x) == 0:
        raise DegeneratePathError("constant path")
    ms = np.asarray(list(window_levels), dtype=float)
    if ms.size < 2:
        raise ValueError("need at least two levels")
    if t_points is None:
        t_points = np.linspace(0.1, 0.9, n_points)
    t_points = np.atleast_1d(np.asarray(t_points, dtype=float))
    gammas, r2s = [], []
    for t0 in t_points:
        osc = np.array([oscillation(t, x, t0, 2.0**-m) for m in ms])
        if np.any(osc <= 0):
            raise DegeneratePathError(f"zero oscillation near t={t0}")
        y = np.log2(osc)
        fit = stats.linregress(-ms, y)
        gammas.append(min(max(fit.slope, 1e-12), 1.0))
        r2s.append(fit.rvalue**2)
    pe = np.column_stack([t_points, gammas])
    return RegularityReport(pe, float(np.median(gammas)),
                            fit_diagnostics={"levels": ms.tolist(), "median_r2": float(np.median(r2s)),
                                             "min_r2": float(np.min(r2s))})


def modulus_statistic(path, b=2.0, H=None, log_exponent=None):
    """Grid sup of |X_t - X_s| / (|t-s|^H log(b + 1/|t-s|)^e) over all pairs.

    H and e default to the path parameters (e = d/2).
    """
    t, x = _path_arrays(path)
    dt = _check_uniform(t)
    if b <= 1:
        raise ValueError("b must exceed 1")
    if H is None:
        H = path.params.H
    if log_exponent is None:
        log_exponent = path.params.d / 2
    n = x.size
    best = 0.0
    for lag in range(1, n):
        h = lag * dt
        m = np.max(np.abs(x[lag:] - x[:-lag]))
        best = max(best, m / (h**H * math.log(b + 1 / h) ** log_exponent))
    return float(best)


def subsample(path, factor):
    """Every factor-th point of a path, as a (times, values) pair."""
    t, x = _path_arrays(path)
    return t[::factor], x[::factor]


def modulus_stability(fine, coarse_factor=4, b=2.0, H=None, log_exponent=None, tol=1.25):
    """Modulus statistic on a path and on its subsampled version, with the stability flag."""
    H = fine.params.H if H is None else H
    e = fine.params.d / 2 if log_exponent is None else log_exponent
    s_fine = modulus_statistic(fine, b, H, e)
    s_coarse = modulus_statistic(subsample(fine, coarse_factor), b, H, e)
    ratio = s_fine / s_coarse
    return {"fine": s_fine, "coarse": s_coarse, "ratio": ratio, "stable": bool(ratio <= tol)}


def growth_statistic(times, values, H, d, c=4.0):
    """Grid sup of |X_t| / ((1+t)^H (log log(c + t))^(d/2))."""
    if c <= 3:
        raise ValueError("c must exceed 3")
    t = np.asarray(times, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    den = (1 + t) ** H * np.log(np.log(c + t)) ** (d / 2)
    return float(np.max(v / den))


def growth_profile(times, values, H, d, c=4.0, T_values=(16, 32, 64)):
    """growth_statistic restricted to [0, T] for each T."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    return {float(T): growth_statistic(t[t <= T], v[t <= T], H, d, c) for T in T_values}


@dataclass
class SmallBallReport:
    x: np.ndarray
    cdf: np.ndarray
    ratio: np.ndarray
    counts: np.ndarray
    C_min: float
    slope: float
    fit_window: tuple
    dropped: list

    def bounded(self, factor=10.0):
        """True when no ratio exceeds factor times the median ratio."""
        return bool(np.max(self.ratio) <= factor * np.median(self.ratio))

    def to_dict(self):
        out = asdict(self)
        for k in ("x", "cdf", "ratio", "counts"):
            out[k] = np.asarray(out[k]).tolist()
        return out


def best_linear_window(x, y, min_len=4):
    """Contiguous window of at least min_len points maximizing R^2 of a line fit; longer wins ties."""
    n = len(x)
    if n < min_len:
        raise ValueError(f"need at least {min_len} usable points, got {n}")
    best = None
    for i in range(n - min_len + 1):
        for j in range(i + min_len, n + 1):
            fit = stats.linregress(x[i:j], y[i:j])
            key = (round(fit.rvalue**2, 10), j - i)
            if best is None or key > best[0]:
                best = (key, i, j, fit)
    _, i, j, fit = best
    return i, j, fit


def small_ball_report(samples, d, x_grid):
    """Empirical P(|Z| <= x) on x_grid, ratio to x^(1/d) and the log-log slope."""
    z = np.sort(np.abs(np.asarray(samples, dtype=float)))
    n = z.size
    if n < 10**5:
        warnings.warn("small-ball estimates want at least 1e5 samples")
    xs = np.sort(np.asarray(x_grid, dtype=float))
    if np.any(xs <= 0) or np.any(xs > 1):
        raise ValueError("x_grid must lie in (0, 1]")
    counts = np.searchsorted(z, xs, side="right")
    keep = counts >= 20
    dropped = xs[~keep].tolist()
    if dropped:
        warnings.warn(f"dropping {len(dropped)} x values with fewer than 20 samples below them")
    xs, counts = xs[keep], counts[keep]
    F = counts / n
    ratio = F / xs ** (1 / d)
    i, j, fit = best_linear_window(np.log(xs), np.log(F))
    return SmallBallReport(xs, F, ratio, counts, float(np.max(ratio)), float(fit.slope),
                           (float(xs[i]), float(xs[j - 1])), dropped)


# ---------------------------------------------------------------- dual recovery


def _field_spacing(axes):
    hs = [_check_uniform(ax) for ax in axes]
    if not np.allclose(hs, hs[0]):
        raise ValueError("field axes must share one spacing")
    return hs[0]


def dual_recover(field_sample, idx: WaveletIndex, D_table=None, radius=12):
    """Chaos value of a tensor wavelet recovered by integrating the field against the dual atom.

    The Riemann sum over the grid is exact for band-limited integrands when the
    spacing is at most 2^-(j_max+2); the integrand decays fast, so the field
    must cover the box (k +- radius) / 2^j around the atom, or miss it entirely.
    """
    params = field_sample.params
    d = params.d
    if d > 2:
        raise ValueError("dual recovery is limited to d <= 2")
    trunc = field_sample.truncation
    j = idx.j
    if j < 0 or j > trunc.j_max - 4:
        raise ValueError(f"level {j} outside the resolved range [0, {trunc.j_max - 4}]")
    axes = field_sample.axes
    h = _field_spacing(axes)
    if h > 2.0 ** -(trunc.j_max + 2) * (1 + 1e-12):
        raise ValueError("field grid too coarse for exact quadrature")
    inside, outside = True, True
    for ax, k in zip(axes, idx.k):
        lo, hi = (k - radius) / 2.0**j, (k + radius) / 2.0**j
        inside &= ax[0] <= lo and ax[-1] >= hi
        outside &= hi < ax[0] or lo > ax[-1]
    if not (inside or outside):
        raise ValueError("field grid only partly covers the dual atom")
    if D_table is None:
        D_table = build_table(idx.eps, params, kind="D")
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([2.0**j * g - k for g, k in zip(grids, idx.k)], axis=-1)
    Dv = eval_potential(D_table, pts.reshape(-1, d)).reshape(grids[0].shape)
    integral = np.sum(field_sample.values * Dv) * h**d
    return float(2.0 ** (j * (params.H + d)) * integral / params.variance_norm)


def sampled_chaos(field_sample, idx: WaveletIndex):
    """The chaos value of idx from the atom field behind a field sample."""
    tr = field_sample.truncation
    atoms = sample_atoms((tr.j_min, tr.j_max), {idx.j: [(min(idx.k), max(idx.k))]}, field_sample.seed,
                         (field_sample.path_index,), tr.filter_tol)
    return float(chaos_eval(idx, atoms).value[0])


# ---------------------------------------------------------------- dimensions


@dataclass
class DimensionReport:
    H_vec: tuple
    d: int
    dimE: float
    lower_range: float
    upper_range: float
    lower_graph: float
    upper_graph: float
    est_range: float | None = None
    est_range_ci: float | None = None
    est_graph: float | None = None
    est_graph_ci: float | None = None
    fit_windows: dict = field(default_factory=dict)
    note: str = "box-counting dimension bounds the Hausdorff dimension from above"

    def to_dict(self):
        return asdict(self)


def _range_terms(H, dimE, d):
    return [(dimE + sum(H[k] - H[i] for i in range(k + 1)) / d) / H[k] for k in range(len(H))]


def dimension_bounds(H_vec, d, N=None, dimE=1.0):
    """Hausdorff dimension bounds for the range and graph of N independent copies over a set E.

    Lower bounds divide the Hurst-gap sums and the graph defect by d; the
    upper bounds are the Gaussian-case formulas.
    """
    H = tuple(float(h) for h in H_vec)
    N = len(H) if N is None else int(N)
    if N != len(H):
        raise ValueError("N must equal len(H_vec)")
    if list(H) != sorted(H):
        raise ValueError("H_vec must be sorted increasingly")
    if not all(0.5 < h < 1 for h in H):
        raise ValueError("each H must lie in (1/2, 1)")
    if not 0 <= dimE <= 1:
        raise ValueError("dimE must lie in [0, 1]")
    if d < 1:
        raise ValueError("d must be >= 1")
    lo_terms = _range_terms(H, dimE, d)
    up_terms = _range_terms(H, dimE, 1)
    lower_range = min([N] + lo_terms)
    upper_range = min([N] + up_terms)
    lower_graph = min(lo_terms + [dimE + sum(1 - h for h in H) / d])
    upper_graph = min(up_terms + [dimE + sum(1 - h for h in H)])
    return DimensionReport(H, int(d), float(dimE), lower_range, upper_range, lower_graph, upper_graph)


def range_bound_by_selection(H_vec, d, dimE):
    """Lower range bound via the index k with sum_{i<k} H_i/d < dimE <= sum_{i<=k} H_i/d."""
    H = [float(h) for h in H_vec]
    terms = _range_terms(H, dimE, d)
    csum = np.cumsum(H) / d
    for k in range(len(H)):
        prev = csum[k - 1] if k else 0.0
        if prev < dimE <= csum[k]:
            return terms[k]
    return min([len(H)] + terms)


def box_counts(points, scales, connect=True):
    """Occupied boxes of side 2^-m for m in scales; polylines are densified when connect is set."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] > 4:
        raise ValueError("points must be an (n, m) array with m <= 4")
    scales = list(scales)
    if connect and P.shape[0] > 1:
        step = 2.0 ** -max(scales) / 2
        seg = np.max(np.abs(np.diff(P, axis=0)), axis=1)
        n_sub = np.maximum(1, np.ceil(seg / step).astype(np.int64))
        idx = np.repeat(np.arange(P.shape[0] - 1), n_sub)
        frac = (np.arange(idx.size) - np.repeat(np.cumsum(n_sub) - n_sub, n_sub)) / np.repeat(n_sub, n_sub)
        P = np.vstack([P[idx] + frac[:, None] * (P[idx + 1] - P[idx]), P[-1:]])
    lo = P.min(axis=0)
    counts = []
    for m in scales:
        cells = np.floor((P - lo) * 2.0**m).astype(np.int64)
        counts.append(np.unique(cells, axis=0).shape[0])
    return np.array(counts)


def box_dimension(points, scales=range(1, 11), connect=True, min_scales=4):
    """Box-counting dimension with a 95% half-width from the best linear window."""
    P = np.asarray(points, dtype=float)
    if P.shape[0] < 2**14:
        warnings.warn("box counting wants at least 2^14 points")
    scales = np.asarray(list(scales))
    if scales.size < min_scales:
        raise ValueError(f"need at least {min_scales} scales")
    counts = box_counts(P, scales, connect)
    y = np.log2(counts)
    i, j, fit = best_linear_window(scales.astype(float), y, min_scales)
    dof = j - i - 2
    half = float(stats.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else float("inf")
    return float(fit.slope), half, {"scales": scales[i:j].tolist(), "counts": counts.tolist(), "r2": fit.rvalue**2}


def graph_points(t, x):
    return np.column_stack([np.asarray(t, dtype=float), np.asarray(x, dtype=float)])


# ---------------------------------------------------------------- serialization


def report_json(report):
    obj = report.to_dict() if hasattr(report, "to_dict") else report
    return json.dumps(obj, indent=2, sort_keys=True, default=float)


def summary_csv(rows):
    """One CSV row per experiment from a list of flat dicts."""
    if not rows:
        return ""
    buf = io.StringIO()
    keys = list(rows[0])
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
