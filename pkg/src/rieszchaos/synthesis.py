"""Wavelet-series synthesis of the chaos process, its field version and an fBm reference.

At level j and time t write u = 2^j t, c = round(u), r = u - c. The level
contributes 2^{-jH} [F_j(t) - F_j(0)] with

    F_j(t) = sum_eps sum_{m in [-W, W]^d} P_eps(r - m_1, ..., r - m_d) I_d(psi^eps_{j, c + m}),

P_eps being the Riesz potential of the tensor wavelet. Per level the sum over
(eps, m) is a Wick-ordered multilinear form in the atom vectors, so it is
evaluated as matrix products with a trace-type correction.

P_eps on the diagonal r -> P_eps(r - m) is tabulated on a fine r grid and read
by 8-point Lagrange interpolation. For deep levels (j <= taylor_level) u stays
below 1/16 and F_j(t) - F_j(0) is replaced by its Taylor polynomial in u,
whose coefficients are random variables independent of t.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .chaos_sampler import Layout, cascade, close_windows
from .meyer_basis import eps_set, filter_pair
from .riesz_core import ProcessParams, kernel_norm
from .riesz_potential import _cache_key, _load, _store, lagrange_weights, potential_grid

R_STEP = 1 / 128
R_PAD = 4
LAGRANGE = 8


class TailBudgetError(RuntimeError):
    """Estimated discarded mass exceeds the configured budget."""

    def __init__(self, report, budget):
        super().__init__(
            f"estimated truncation error {report['total']:.3e} exceeds budget {budget:.1e} "
            f"(low {report['low']:.2e}, high {report['high']:.2e}, window {report['window']:.2e}); "
            "increase j_max, k_halfwidth or lower j_min")
        self.report = report


@dataclass
class TruncationSpec:
    """Levels j_min..j_max, window half-width and the error budget (relative variance)."""

    j_min: int | None = None
    j_max: int = 12
    k_halfwidth: int = 24
    tail_budget: float = 1e-4
    taylor_level: int = -4
    taylor_order: int = 16
    filter_tol: float = 1e-10
    tail_report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.j_max < 0:
            raise ValueError("j_max must be >= 0")
        if self.j_min is not None and self.j_min >= 0:
            raise ValueError("j_min must be negative")
        if self.k_halfwidth < 1:
            raise ValueError("k_halfwidth must be >= 1")
        if self.j_min is not None and self.j_max - self.j_min > 40:
            raise ValueError("j_max - j_min must be <= 40")

    @classmethod
    def for_grid(cls, n, **kw):
        """Default spec whose finest level resolves a grid of n intervals on [0, 1]."""
        kw.setdefault("j_max", max(12, int(math.ceil(math.log2(max(n, 1)))) + 1))
        return cls(**kw)

    def to_dict(self):
        return asdict(self)


@dataclass
class PathSample:
    grid: np.ndarray
    low: np.ndarray
    high: np.ndarray
    params: ProcessParams
    truncation: TruncationSpec
    seed: int
    path_index: int = 0

    @property
    def total(self):
        return self.low + self.high


@dataclass
class FieldSample:
    axes: tuple
    values: np.ndarray
    params: ProcessParams
    truncation: TruncationSpec
    seed: int
    path_index: int = 0
    growth: dict = field(default_factory=dict)


# ---------------------------------------------------------------- tables


@dataclass(frozen=True)
class LevelTables:
    """Diagonal potential tables and Taylor tensors for one (H, d, W)."""

    params: ProcessParams
    W: int
    eps_list: tuple
    r_grid: np.ndarray
    diag: dict
    taylor: dict
    order: int

    @property
    def M(self):
        return 2 * self.W + 1

    def interp(self, eps, r):
        """P_eps(r - m) for an array of r in [-1/2, 1/2]; shape (len(r), M, ..., M)."""
        r = np.asarray(r, dtype=float)
        u = (r - self.r_grid[0]) / R_STEP
        i0 = np.clip(np.floor(u).astype(int) - (LAGRANGE // 2 - 1), 0, self.r_grid.size - LAGRANGE)
        w = lagrange_weights(u - i0, LAGRANGE)
        T = self.diag[eps]
        out = np.zeros((r.size,) + T.shape[1:])
        for s in range(LAGRANGE):
            out += w[:, s].reshape((-1,) + (1,) * (T.ndim - 1)) * T[i0 + s]
        return out


def _diag_table(eps, a1, W, order):
    d = len(eps)
    m = np.arange(-W, W + 1)
    n_half = int(round(0.5 / R_STEP)) + R_PAD
    r_grid = R_STEP * np.arange(-n_half, n_half + 1)
    key = _cache_key("diag", eps, a1, W, R_STEP, R_PAD, order)
    hit = _load(key)
    if hit is not None:
        return r_grid, hit["diag"], hit["taylor"]
    diag = np.stack([potential_grid(eps, -a1, [r - m] * d) for r in r_grid])
    taylor = np.stack([potential_grid(eps, -a1, [-m.astype(float)] * d, deriv=p) for p in range(order + 1)])
    _store(key, diag=diag, taylor=taylor)
    return r_grid, diag, taylor


_TABLES = {}


def level_tables(params: ProcessParams, W, order=16):
    key = (params.H, params.d, W, order)
    if key not in _TABLES:
        a1 = params.alpha + 1
        diag, taylor = {}, {}
        r_grid = None
        for eps in eps_set(params.d):
            r_grid, diag[eps], taylor[eps] = _diag_table(eps, a1, W, order)
        _TABLES[key] = LevelTables(params, W, tuple(eps_set(params.d)), r_grid, diag, taylor, order)
    return _TABLES[key]


# ---------------------------------------------------------------- Wick forms


def _matchings(kinds):
    """Partial matchings of axes with equal kinds, as lists of pairs."""
    def rec(free):
        if not free:
            yield []
            return
        i, rest = free[0], free[1:]
        yield from rec(rest)
        for pos, j in enumerate(rest):
            if kinds[i] == kinds[j]:
                for m in rec(rest[:pos] + rest[pos + 1:]):
                    yield [(i, j)] + m
    return list(rec(list(range(len(kinds)))))


def wick_form(G, V, eps, shared=True):
    """Wick-ordered form sum_m G[m] :Z_m: for rows n.

    G: (N, M, ..., M) per-row tensors, or (M, ..., M) shared by all rows when shared=True.
    V: list of d arrays (N, M), the atom vector seen by each axis.
    Repeated atoms (equal kind and equal m on two axes) carry the Hermite correction.
    """
    d = len(eps)
    per_row = not shared
    if d == 1:
        return np.sum(V[0] * G, axis=-1) if per_row else V[0] @ G
    if d == 2:
        if per_row:
            Y = np.matmul(V[0][:, None, :], G)[:, 0, :]
        else:
            Y = V[0] @ G
        Q = np.sum(Y * V[1], axis=-1)
        if eps[0] == eps[1]:
            Q = Q - np.trace(G, axis1=-2, axis2=-1)
        return Q
    letters = "abcdefghij"
    Q = 0.0
    for mt in _matchings(eps):
        sub = list(letters[:d])
        for i, j in mt:
            sub[j] = sub[i]
        unmatched = [i for i in range(d) if all(i not in p for p in mt)]
        gsub = ("n" if per_row else "") + "".join(sub)
        terms = [gsub] + ["n" + sub[i] for i in unmatched]
        ops = [G] + [V[i] for i in unmatched]
        if not unmatched:
            ops.append(np.ones(V[0].shape[0]))
            terms.append("n")
        val = np.einsum(",".join(terms) + "->n", *ops)
        Q = Q + (-1) ** len(mt) * val
    return Q


# ---------------------------------------------------------------- truncation and tails


def _window_masses(tables: LevelTables):
    """Per-eps sums used by the tail estimates: inside/outside the window, values and first derivatives."""
    params, W = tables.params, tables.W
    d = params.d
    a1 = params.alpha + 1
    Wb = max(2 * W, 40)
    m = np.arange(-Wb, Wb + 1).astype(float)
    inner = np.ones((2 * Wb + 1,) * d, dtype=bool)
    sl = tuple(slice(Wb - W, Wb + W + 1) for _ in range(d))
    inner[sl] = False
    out = {"S0_in": 0.0, "S0_out": 0.0, "S1_in": 0.0, "S1_out": 0.0}
    for eps in tables.eps_list:
        key = _cache_key("wmass", eps, a1, Wb)
        hit = _load(key)
        if hit is None:
            v0 = potential_grid(eps, -a1, [-m] * d)
            v1 = potential_grid(eps, -a1, [-m] * d, deriv=1)
            _store(key, v0=v0, v1=v1)
        else:
            v0, v1 = hit["v0"], hit["v1"]
        out["S0_out"] += float(np.sum(v0[inner] ** 2))
        out["S0_in"] += float(np.sum(v0[~inner] ** 2))
        out["S1_out"] += float(np.sum(v1[inner] ** 2))
        out["S1_in"] += float(np.sum(v1[~inner] ** 2))
    return out


def _taylor_coeffs(tables: LevelTables, eps, j, t, H):
    P = tables.order
    u = 2.0**j * t
    w = np.array([u**p / math.factorial(p) for p in range(P + 1)])
    w[0] = 0.0
    return 2.0 ** (-j * H) * np.tensordot(w, tables.taylor[eps], axes=(0, 0))


def _level_coeff_boxes(tables: LevelTables, eps, j, t, trunc: TruncationSpec):
    """Coefficients at level j as two boxes: ((center, values), (0, values)); values include 2^{-jH}."""
    H = tables.params.H
    if j <= trunc.taylor_level:
        return [(0, _taylor_coeffs(tables, eps, j, t, H))]
    u = 2.0**j * t
    c = int(math.floor(u + 0.5))
    r = u - c
    G = tables.interp(eps, np.array([r]))[0]
    G0 = tables.interp(eps, np.array([0.0]))[0]
    s = 2.0 ** (-j * H)
    return [(c, s * G), (0, -s * G0)]


def _box_overlap_sum(b1, b2, W, d, perm=None):
    """sum_k A(k) B(perm k) over two boxes centered on the diagonal."""
    (c1, A), (c2, B) = b1, b2
    if perm is not None:
        B = np.transpose(B, perm)
    lo, hi = max(c1, c2) - W, min(c1, c2) + W
    if lo > hi:
        return 0.0
    sa = tuple(slice(lo - c1 + W, hi - c1 + W + 1) for _ in range(d))
    sb = tuple(slice(lo - c2 + W, hi - c2 + W + 1) for _ in range(d))
    return float(np.sum(A[sa] * B[sb]))


def level_masses(params: ProcessParams, trunc: TruncationSpec, t=1.0, tables=None):
    """Sum of squared windowed coefficients of h_t per level j_min..j_max (unnormalized kernel)."""
    tables = tables or level_tables(params, trunc.k_halfwidth, trunc.taylor_order)
    W, d = trunc.k_halfwidth, params.d
    out = {}
    for j in range(trunc.j_min, trunc.j_max + 1):
        tot = 0.0
        for eps in tables.eps_list:
            boxes = _level_coeff_boxes(tables, eps, j, t, trunc)
            for b1 in boxes:
                for b2 in boxes:
                    tot += _box_overlap_sum(b1, b2, W, d)
        out[j] = tot
    return out


def second_moment(params: ProcessParams, t, trunc: TruncationSpec, tables=None, normalized=True):
    """E[X_t^2] of the truncated series as the quadratic form sum c(idx) c(idx') cov(idx, idx').

    Levels are uncorrelated; within a level the covariance of two tensor
    indices counts the permutations matching one onto the other, which here
    amounts to summing c(eps, k) c(sigma eps, sigma k) over permutations sigma.
    """
    trunc = resolve_truncation(params, trunc, check=False)
    tables = tables or level_tables(params, trunc.k_halfwidth, trunc.taylor_order)
    W, d = trunc.k_halfwidth, params.d
    total = 0.0
    perms = list(itertools.permutations(range(d)))
    for j in range(trunc.j_min, trunc.j_max + 1):
        boxes = {eps: _level_coeff_boxes(tables, eps, j, t, trunc) for eps in tables.eps_list}
        for eps in tables.eps_list:
            for sg in perms:
                eps2 = tuple(eps[i] for i in sg)
                for b1 in boxes[eps]:
                    for b2 in boxes[eps2]:
                        # c(sigma eps, sigma k) read through the transposed array
                        inv = tuple(np.argsort(sg))
                        total += _box_overlap_sum(b1, b2, W, d, perm=inv)
    scale = params.variance_norm**2 if normalized else 1.0
    return total * scale


def resolve_truncation(params: ProcessParams, trunc: TruncationSpec, check=True):
    """Fill j_min (if unset) and the tail report; raise if the budget is exceeded."""
    tables = level_tables(params, trunc.k_halfwidth, trunc.taylor_order)
    H, d = params.H, params.d
    norm2 = kernel_norm(1.0, params) ** 2
    wm = _window_masses(tables)
    q_low = 2.0 ** (-2 * (1 - H))
    S1 = wm["S1_in"] + wm["S1_out"]

    def low_tail(jm):
        # levels below jm: mass ~ 2^{2j(1-H)} S1 at t = 1
        return S1 * 2.0 ** (2 * (jm - 1) * (1 - H)) / (1 - q_low) / norm2

    j_min = trunc.j_min
    if j_min is None:
        j_min = -1
        while j_min > trunc.j_max - 40 and low_tail(j_min) > 0.25 * trunc.tail_budget:
            j_min -= 1
    t2 = replace(trunc, j_min=j_min)
    masses = level_masses(params, t2, 1.0, tables)
    q_high = 2.0 ** (-2 * H)
    high = masses[t2.j_max] * q_high / (1 - q_high) / norm2
    # discarded window mass: two boxes per level at j >= 0, one derivative box below
    win_hi = sum(2 * wm["S0_out"] * 2.0 ** (-2 * j * H) for j in range(0, t2.j_max + 1))
    win_lo = sum(wm["S1_out"] * 2.0 ** (2 * j * (1 - H)) for j in range(j_min, 0))
    window = (win_hi + win_lo) / norm2
    P = t2.taylor_order
    omega = d * 8 * math.pi / 3
    taylor = (omega * 2.0**t2.taylor_level) ** (P + 1) / math.factorial(P + 1)
    fp = filter_pair(t2.filter_tol)
    report = {
        "low": low_tail(j_min),
        "high": high,
        "window": window,
        "taylor": taylor,
        "filter_cov": 4.0 * (t2.j_max - j_min + 1) * fp.tail_energy,
        "captured": sum(masses.values()) / norm2,
        "per_level": {int(j): v / norm2 for j, v in masses.items()},
    }
    report["total"] = report["low"] + report["high"] + report["window"] + report["taylor"]
    t2.tail_report = report
    if check and report["total"] > trunc.tail_budget:
        raise TailBudgetError(report, trunc.tail_budget)
    return t2


# ---------------------------------------------------------------- path engine


def _centers(j, t):
    u = 2.0**j * t
    c = np.floor(u + 0.5).astype(np.int64)
    return c, u - c


def _needs(times, trunc: TruncationSpec):
    W = trunc.k_halfwidth
    needs = {}
    for j in range(trunc.j_min, trunc.j_max + 1):
        if j <= trunc.taylor_level:
            needs[j] = [(-W, W)]
            continue
        c, _ = _centers(j, np.append(times, 0.0))
        cs = np.unique(c)
        # merge centers into runs so the interval list stays short
        breaks = np.nonzero(np.diff(cs) > 2 * W + 1)[0]
        starts = np.r_[cs[0], cs[breaks + 1]]
        ends = np.r_[cs[breaks], cs[-1]]
        needs[j] = [(int(s) - W, int(e) + W) for s, e in zip(starts, ends)]
    return needs


def _level_values(tables: LevelTables, lay: Layout, a, b, j, times, W):
    """F_j at the given times for all paths; shape (P, n_t)."""
    d = tables.params.d
    P = a.shape[0]
    c, r = _centers(j, times)
    m = np.arange(-W, W + 1)
    pos, ok = lay.positions((c[:, None] + m[None, :]).ravel())
    if not np.all(ok):
        raise RuntimeError("atom window does not cover a requested time")
    pos = pos.reshape(c.size, m.size)
    ru, inv = np.unique(r, return_inverse=True)
    inv = inv.ravel()
    out = np.zeros((P, times.size))
    src = (a, b)
    for eps in tables.eps_list:
        kinds = sorted(set(eps))
        if ru.size * 4 <= times.size or ru.size <= 16:
            Gu = tables.interp(eps, ru)
            for g in range(ru.size):
                ti = np.nonzero(inv == g)[0]
                V = {k: src[k][:, pos[ti]].reshape(P * ti.size, m.size) for k in kinds}
                Q = wick_form(Gu[g], [V[e] for e in eps], eps, shared=True)
                out[:, ti] += Q.reshape(P, ti.size)
        else:
            # distinct r per time: per-row tensors, broadcast over paths
            block = max(1, 2**21 // (P * m.size**d))
            for s in range(0, times.size, block):
                ti = np.arange(s, min(s + block, times.size))
                Gt = tables.interp(eps, r[ti])
                Gt = np.broadcast_to(Gt, (P,) + Gt.shape).reshape((P * ti.size,) + Gt.shape[1:])
                V = {k: src[k][:, pos[ti]].reshape(P * ti.size, m.size) for k in kinds}
                Q = wick_form(Gt, [V[e] for e in eps], eps, shared=False)
                out[:, ti] += Q.reshape(P, ti.size)
    return out


def _taylor_values(tables: LevelTables, lay: Layout, a, b, j, W):
    """Random Taylor coefficients of F_j about u = 0; shape (P, order + 1)."""
    P = a.shape[0]
    m = np.arange(-W, W + 1)
    pos, ok = lay.positions(m)
    src = (a, b)
    out = np.zeros((P, tables.order + 1))
    for eps in tables.eps_list:
        D = tables.taylor[eps]
        for p in range(1, tables.order + 1):
            V = [src[e][:, pos] for e in eps]
            out[:, p] += wick_form(D[p], V, eps, shared=True)
    return out


def _synth_chunk(params, times, trunc, seed, paths, tables, high_only=False):
    W = trunc.k_halfwidth
    H = params.H
    fp = filter_pair(trunc.filter_tol)
    needs = _needs(times, trunc)
    if high_only:
        needs = {j: v for j, v in needs.items() if j >= 0}
    # the cascade always starts at j_min so scaling atoms match the full synthesis
    layouts = close_windows(needs, trunc.j_min, trunc.j_max, fp.L)
    P = len(paths)
    low = np.zeros((P, times.size))
    high = np.zeros((P, times.size))
    zero = np.zeros(1)
    for j, a, b in cascade(layouts, seed, paths, fp):
        lay = layouts[j]
        if high_only and j < 0:
            continue
        if j <= trunc.taylor_level:
            Y = _taylor_values(tables, lay, a, b, j, W)
            u = 2.0**j * times
            basis = np.stack([u**p / math.factorial(p) for p in range(tables.order + 1)], axis=1)
            basis[:, 0] = 0.0
            low += 2.0 ** (-j * H) * (Y @ basis.T)
            continue
        F = _level_values(tables, lay, a, b, j, times, W)
        F0 = _level_values(tables, lay, a, b, j, zero, W)
        F = np.where(times == 0, F0, F)
        contrib = 2.0 ** (-j * H) * (F - F0)
        if j < 0:
            low += contrib
        else:
            high += contrib
    return low * params.variance_norm, high * params.variance_norm


def _chunk_size(n_t, params, W):
    cost = max(n_t, 1) * (2 * W + 1) ** params.d
    return int(np.clip(2**22 // cost, 1, 2048))


def _run_chunks(params, times, trunc, seed, path_ids, threads, high_only=False):
    tables = level_tables(params, trunc.k_halfwidth, trunc.taylor_order)
    ch = _chunk_size(times.size, params, trunc.k_halfwidth)
    path_ids = np.asarray(path_ids, dtype=np.int64)
    # chunks are aligned to multiples of ch in path-index space, so each path is
    # always computed alongside the same neighbours whatever the request
    first = (path_ids.min() // ch) * ch if path_ids.size else 0
    last = path_ids.max() if path_ids.size else -1
    starts = list(range(int(first), int(last) + 1, ch))

    def work(s):
        ids = np.arange(s, s + ch)
        return s, _synth_chunk(params, times, trunc, seed, ids, tables, high_only)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = dict(ex.map(work, starts))
    else:
        results = dict(map(work, starts))
    low = np.zeros((path_ids.size, times.size))
    high = np.zeros((path_ids.size, times.size))
    for i, pid in enumerate(path_ids):
        s = (pid // ch) * ch
        lo, hi = results[int(s)]
        low[i], high[i] = lo[pid - s], hi[pid - s]
    return low, high


def _check_grid(grid, upper=1.0):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d array")
    if np.any(grid < 0) or np.any(grid > upper):
        raise ValueError(f"grid must lie in [0, {upper}]")
    return grid


def synth_paths(params, grid, trunc=None, seed=0, n_paths=1, threads=1, first_path=0):
    """Synthesize paths first_path .. first_path + n_paths - 1 on a time grid in [0, 1]."""
    grid = _check_grid(grid)
    trunc = resolve_truncation(params, trunc or TruncationSpec())
    ids = np.arange(first_path, first_path + n_paths)
    low, high = _run_chunks(params, grid, trunc, seed, ids, threads)
    return [PathSample(grid, low[i], high[i], params, trunc, int(seed), int(pid)) for i, pid in enumerate(ids)]


def synth_path(params, grid, trunc=None, seed=0, path_index=0):
    """One sample path on a time grid in [0, 1]; low and high frequency parts kept apart."""
    return synth_paths(params, grid, trunc, seed, 1, 1, path_index)[0]


def sample_values(params, times, trunc=None, seed=0, n_paths=1000, threads=1):
    """Matrix (n_paths, len(times)) of X at the given times, for Monte Carlo work."""
    times = _check_grid(times)
    trunc = resolve_truncation(params, trunc or TruncationSpec())
    low, high = _run_chunks(params, times, trunc, seed, np.arange(n_paths), threads)
    return low + high


def synth_high(params, times, trunc=None, seed=0, path_index=0):
    """High-frequency part (levels j >= 0) at arbitrary times t >= 0."""
    times = _check_grid(times, upper=np.inf)
    trunc = resolve_truncation(params, trunc or TruncationSpec(), check=False)
    _, high = _run_chunks(params, times, trunc, seed, np.array([path_index]), 1, high_only=True)
    return high[0]


# ---------------------------------------------------------------- field


def _field_level(params, eps, a, b, lay, j, axes, W, zero_term):
    """F_j on the tensor grid of axes (d <= 2) for one path, exact quadrature."""
    d = params.d
    a1 = params.alpha + 1
    m = np.arange(-W, W + 1)
    cs, rs, invs = [], [], []
    for ax in axes:
        c, r = _centers(j, ax)
        ru, inv = np.unique(r, return_inverse=True)
        cs.append(c)
        rs.append(ru)
        invs.append(inv.ravel())
    src = (a, b)

    def vecs(ax_i, kind):
        pos, ok = lay.positions((cs[ax_i][:, None] + m[None, :]).ravel())
        if not np.all(ok):
            raise RuntimeError("atom window does not cover the field grid")
        return src[kind][pos].reshape(cs[ax_i].size, m.size)

    if d == 1:
        G = potential_grid(eps, -a1, [(rs[0][:, None] - m[None, :]).ravel()]).reshape(rs[0].size, m.size)
        return np.sum(G[invs[0]] * vecs(0, eps[0]), axis=1)
    # G[(i1, m1), (i2, m2)] for all distinct r on each axis
    G = potential_grid(eps, -a1, [(rs[0][:, None] - m[None, :]).ravel(), (rs[1][:, None] - m[None, :]).ravel()])
    n1, n2 = rs[0].size, rs[1].size
    G = G.reshape(n1, m.size, n2, m.size)
    V1 = vecs(0, eps[0])
    V2 = vecs(1, eps[1])
    # Y[i1, m1, t2] = sum_m2 G[i1, m1, i2(t2), m2] V2[t2, m2], grouped by distinct r
    Y = np.zeros((n1, m.size, cs[1].size))
    for i2 in range(n2):
        T2 = np.nonzero(invs[1] == i2)[0]
        Y[:, :, T2] = G[:, :, i2, :] @ V2[T2].T
    out = np.zeros((cs[0].size, cs[1].size))
    for i1 in range(n1):
        T1 = np.nonzero(invs[0] == i1)[0]
        out[T1] = V1[T1] @ Y[i1]
    if eps[0] == eps[1]:
        # repeated atom when c1 + m1 == c2 + m2
        diff = cs[0][:, None] - cs[1][None, :]
        corr = np.zeros_like(out)
        for m1 in m:
            m2 = m1 + diff
            ok = np.abs(m2) <= W
            g = G[invs[0][:, None], m1 + W, invs[1][None, :], np.clip(m2, -W, W) + W]
            corr += np.where(ok, g, 0.0)
        out = out - corr
    return out


def synth_field(params, d_grid, trunc=None, seed=0, path_index=0):
    """Field over a tensor grid (one axis per chaos coordinate), levels j >= 0 only."""
    d = params.d
    if d > 2:
        raise ValueError("field synthesis is limited to d <= 2")
    axes = tuple(np.asarray(ax, dtype=float) for ax in d_grid)
    if len(axes) != d:
        raise ValueError("need one axis per dimension")
    trunc = resolve_truncation(params, trunc or TruncationSpec(), check=False)
    W, H = trunc.k_halfwidth, params.H
    fp = filter_pair(trunc.filter_tol)
    needs = {}
    for j in range(0, trunc.j_max + 1):
        ivs = [(-W, W)]
        for ax in axes:
            c, _ = _centers(j, ax)
            cs = np.unique(c)
            breaks = np.nonzero(np.diff(cs) > 2 * W + 1)[0]
            starts = np.r_[cs[0], cs[breaks + 1]]
            ends = np.r_[cs[breaks], cs[-1]]
            ivs += [(int(s) - W, int(e) + W) for s, e in zip(starts, ends)]
        needs[j] = ivs
    layouts = close_windows(needs, trunc.j_min, trunc.j_max, fp.L)
    values = np.zeros(tuple(ax.size for ax in axes))
    zero_axes = [np.zeros(1)] * d
    origin = np.ones(values.shape, dtype=bool)
    for i, ax in enumerate(axes):
        origin &= (ax == 0).reshape((1,) * i + (-1,) + (1,) * (d - i - 1))
    for j, a, b in cascade(layouts, seed, np.array([path_index]), fp):
        if j < 0:
            continue
        lay = layouts[j]
        for eps in eps_set(d):
            F = _field_level(params, eps, a[0], b[0], lay, j, axes, W, False)
            F0 = _field_level(params, eps, a[0], b[0], lay, j, zero_axes, W, True)
            F = np.where(origin, F0.reshape(()), F)
            values += 2.0 ** (-j * H) * (F - F0.reshape(()))
    values *= params.variance_norm
    grids = np.meshgrid(*axes, indexing="ij")
    radius = np.sqrt(sum(g**2 for g in grids))
    ratio = np.abs(values) / np.log(np.e + radius) ** (d / 2)
    fs = FieldSample(axes, values, params, trunc, int(seed), int(path_index), {"C_hat": float(ratio.max())})
    return fs


# ---------------------------------------------------------------- fBm reference


def fbm_reference(H, grid, n_paths, seed):
    """Exact fBm on a uniform grid starting at 0, by circulant embedding of fractional Gaussian noise."""
    grid = np.asarray(grid, dtype=float)
    n = grid.size - 1
    if n < 1:
        raise ValueError("grid needs at least two points")
    dt = grid[1] - grid[0]
    if grid[0] != 0 or not np.allclose(np.diff(grid), dt, rtol=1e-12, atol=0):
        raise ValueError("grid must be uniform and start at 0")
    k = np.arange(n + 1, dtype=float)
    acov = 0.5 * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    row = np.concatenate([acov, acov[-2:0:-1]])
    lam = np.fft.fft(row).real
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    m = row.size
    if np.min(lam) < -1e-10 * np.max(lam):
        warnings.warn("circulant embedding not nonnegative definite; using dense Cholesky")
        C = acov[np.abs(np.subtract.outer(np.arange(n), np.arange(n)))]
        Lc = np.linalg.cholesky(C)
        inc = rng.standard_normal((n_paths, n)) @ Lc.T
    else:
        lam = np.clip(lam, 0.0, None)
        z = rng.standard_normal((n_paths, m)) + 1j * rng.standard_normal((n_paths, m))
        inc = np.fft.fft(np.sqrt(lam / m) * z, axis=1).real[:, :n]
    paths = np.zeros((n_paths, n + 1))
    paths[:, 1:] = np.cumsum(inc, axis=1) * dt**H
    return paths
