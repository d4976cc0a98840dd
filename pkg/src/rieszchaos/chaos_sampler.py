"""Joint sampling of first-order atoms and the chaos variables built from them.

The atoms a(j,k) = int phi_{j,k} dB and b(j,k) = int psi_{j,k} dB are produced
by the synthesis side of the two-scale filter bank. Independent normals are
drawn for a(j_min, .) and for b(j, .) at every level, and finer scaling atoms
follow from

    a(j+1, n) = sum_k h_{n-2k} a(j,k) + g_{n-2k} b(j,k).

This is an orthogonal change of basis, so every atom is exactly standard
normal and all cross-level correlations are those of the L2 inner products.
Each normal is addressed by (seed, path, level, kind, k), so values do not
depend on the requested windows or on how the work is scheduled.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse

from .meyer_basis import Atom, FilterPair, WaveletIndex, atom_inner, filter_pair
from .rng import normal_range

STREAM_A = 0
STREAM_B = 1


class MissingAtomError(KeyError):
    def __init__(self, missing):
        missing = sorted(set(missing))
        shown = ", ".join(f"(kind={m[0]}, j={m[1]}, k={m[2]})" for m in missing[:20])
        more = "" if len(missing) <= 20 else f" and {len(missing) - 20} more"
        super().__init__(f"atoms outside the sampled windows: {shown}{more}")
        self.missing = missing


def hermite(n, x):
    """Probabilists' Hermite polynomial He_n(x)."""
    if n < 0 or n > 32:
        raise ValueError("hermite order must be in [0, 32]")
    x = np.asarray(x, dtype=float)
    h0, h1 = np.ones_like(x), x
    if n == 0:
        return h0
    for m in range(1, n):
        h0, h1 = h1, x * h1 - m * h0
    return h1


def merge_intervals(intervals):
    """Sorted union of closed integer intervals; adjacent ones are joined."""
    out = []
    for lo, hi in sorted((int(a), int(b)) for a, b in intervals):
        if out and lo <= out[-1][1] + 1:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(v) for v in out]


@dataclass(frozen=True)
class Layout:
    """Compact storage of a union of integer intervals."""

    intervals: tuple
    offsets: tuple

    @classmethod
    def from_intervals(cls, intervals):
        iv = tuple(merge_intervals(intervals))
        offs, n = [], 0
        for lo, hi in iv:
            offs.append(n)
            n += hi - lo + 1
        return cls(iv, tuple(offs))

    @property
    def size(self):
        if not self.intervals:
            return 0
        lo, hi = self.intervals[-1]
        return self.offsets[-1] + hi - lo + 1

    def keys(self):
        return np.concatenate([np.arange(lo, hi + 1) for lo, hi in self.intervals]) if self.intervals \
            else np.zeros(0, dtype=np.int64)

    def positions(self, k):
        """Compact positions of integer array k, and a mask of which ones are present."""
        k = np.asarray(k, dtype=np.int64)
        los = np.array([lo for lo, _ in self.intervals], dtype=np.int64)
        his = np.array([hi for _, hi in self.intervals], dtype=np.int64)
        offs = np.array(self.offsets, dtype=np.int64)
        i = np.clip(np.searchsorted(los, k, side="right") - 1, 0, max(len(los) - 1, 0))
        ok = (k >= los[i]) & (k <= his[i])
        return offs[i] + (k - los[i]), ok


def parent_intervals(intervals, L):
    """Coarse-level indices feeding a(j+1, n) for n in the given intervals."""
    out = []
    for lo, hi in intervals:
        out.append((-((L + 1 - lo) // 2), (hi + L) // 2))
    return out


def close_windows(needs, j_min, j_max, L):
    """Per-level windows that contain the requested ones and everything the cascade needs."""
    windows = {j: list(needs.get(j, [])) for j in range(j_min, j_max + 1)}
    for j in range(j_max, j_min, -1):
        if windows[j]:
            windows[j - 1] = windows[j - 1] + parent_intervals(merge_intervals(windows[j]), L)
    return {j: Layout.from_intervals(windows[j]) for j in range(j_min, j_max + 1)}


def _cascade_matrices(parent: Layout, child: Layout, fp: FilterPair):
    return _cascade_matrices_cached(parent, child, fp.tol)


@lru_cache(maxsize=256)
def _cascade_matrices_cached(parent: Layout, child: Layout, tol):
    """Sparse maps from compact parent vectors (a and b) to the compact child vector."""
    fp = filter_pair(tol)
    n_keys = child.keys()
    rows_h, cols_h, vals_h = [], [], []
    rows_g, cols_g, vals_g = [], [], []
    L = fp.L
    for offset in range(-L, L + 2):
        # child n gets parent k with n - 2k = offset, i.e. k = (n - offset)/2
        sel = (n_keys - offset) % 2 == 0
        k = (n_keys[sel] - offset) // 2
        rows = np.nonzero(sel)[0]
        pos, ok = parent.positions(k)
        if not np.all(ok):
            missing = [(0, None, int(v)) for v in k[~ok]]
            raise MissingAtomError(missing)
        hv = float(fp.h_at(offset))
        gv = float(fp.g_at(offset))
        if hv:
            rows_h.append(rows), cols_h.append(pos), vals_h.append(np.full(rows.size, hv))
        if gv:
            rows_g.append(rows), cols_g.append(pos), vals_g.append(np.full(rows.size, gv))
    shape = (child.size, parent.size)
    Hm = sparse.csr_matrix((np.concatenate(vals_h), (np.concatenate(rows_h), np.concatenate(cols_h))), shape=shape)
    Gm = sparse.csr_matrix((np.concatenate(vals_g), (np.concatenate(rows_g), np.concatenate(cols_g))), shape=shape)
    Hm.sort_indices()
    Gm.sort_indices()
    return Hm, Gm


def cascade(layouts, seed, paths, fp: FilterPair):
    """Yield (j, a_j, b_j) level by level, coarse to fine; arrays have shape (n_paths, layout size)."""
    levels = sorted(layouts)
    paths = np.asarray(paths, dtype=np.int64)
    a = None
    for i, j in enumerate(levels):
        lay = layouts[j]
        if a is None:
            a = _draw(seed, STREAM_A, paths, j, lay)
        b = _draw(seed, STREAM_B, paths, j, lay)
        yield j, a, b
        if i + 1 < len(levels):
            child = layouts[levels[i + 1]]
            Hm, Gm = _cascade_matrices(lay, child, fp)
            # (child x parent) @ (parent x paths), then back to paths-major
            a = np.ascontiguousarray((Hm @ a.T + Gm @ b.T).T)


def _draw(seed, stream, paths, j, lay: Layout):
    parts = [normal_range(seed, stream, paths, j, lo, hi) for lo, hi in lay.intervals]
    if not parts:
        return np.zeros((paths.size, 0))
    return np.concatenate(parts, axis=1)


@dataclass
class AtomField:
    """Atoms of all levels in [j_min, j_max] on per-level windows, for a batch of paths."""

    j_min: int
    j_max: int
    layouts: dict
    a: dict = field(repr=False)
    b: dict = field(repr=False)
    seed: int
    paths: np.ndarray
    filters: FilterPair = field(repr=False)
    rng_scheme: str = "philox4x64-10 keyed by seed, counter (k//4, level, path, kind)"

    def k_window(self, j):
        return self.layouts[j].intervals

    def get(self, kind, j, k):
        """Atom values for integer array k at level j; shape (n_paths, *k.shape)."""
        if j not in self.layouts:
            raise MissingAtomError([(kind, j, int(v)) for v in np.ravel(k)])
        k = np.asarray(k, dtype=np.int64)
        pos, ok = self.layouts[j].positions(k.ravel())
        if not np.all(ok):
            raise MissingAtomError([(kind, j, int(v)) for v in k.ravel()[~ok]])
        src = self.b[j] if kind else self.a[j]
        return src[:, pos].reshape((src.shape[0],) + k.shape)

    def covariance_error_bound(self):
        """Bound on covariance errors caused by truncating the filters."""
        return 4.0 * (self.j_max - self.j_min + 1) * self.filters.tail_energy


def sample_atoms(j_range, k_windows, seed, paths=(0,), filter_tol=1e-10):
    """Sample atoms on the requested windows (closed under the cascade).

    j_range: (j_min, j_max); k_windows: dict level -> list of (lo, hi) intervals.
    """
    j_min, j_max = int(j_range[0]), int(j_range[1])
    if j_max < j_min:
        raise ValueError("j_max must be >= j_min")
    if j_max - j_min > 40:
        raise ValueError("at most 41 levels can be sampled")
    for j, ivs in k_windows.items():
        if not j_min <= j <= j_max:
            raise ValueError(f"window at level {j} outside {j_range}")
        for lo, hi in ivs:
            if hi < lo:
                raise ValueError("empty window")
    fp = filter_pair(filter_tol)
    layouts = close_windows(k_windows, j_min, j_max, fp.L)
    a, b = {}, {}
    for j, aj, bj in cascade(layouts, seed, paths, fp):
        a[j], b[j] = aj, bj
    field_ = AtomField(j_min, j_max, layouts, a, b, int(seed), np.asarray(paths, dtype=np.int64), fp)
    if field_.covariance_error_bound() > 1e-6:
        raise RuntimeError("filter truncation covariance bound exceeds 1e-6")
    return field_


@dataclass(frozen=True)
class ChaosValue:
    idx: WaveletIndex
    value: np.ndarray
    group_spec: tuple


def group_atoms(idx: WaveletIndex):
    """Distinct 1-d atoms of a tensor index with their multiplicities."""
    counts = Counter(zip(idx.eps, idx.k))
    return tuple(sorted((Atom(e, idx.j, k), g) for (e, k), g in counts.items()))


def chaos_eval(idx: WaveletIndex, atoms: AtomField):
    """I_d of a tensor wavelet: product of He_gamma over its distinct atoms."""
    groups = group_atoms(idx)
    val = np.ones(atoms.paths.size)
    for atom, g in groups:
        x = atoms.get(atom.kind, atom.j, np.array([atom.k]))[:, 0]
        val = val * hermite(g, x)
    return ChaosValue(idx, val, tuple(g for _, g in groups))


def chaos_cov(idx: WaveletIndex, idx2: WaveletIndex, inner=None):
    """E[I_d(psi_idx) I_d(psi_idx2)] = sum over permutations of products of 1-d inner products."""
    d = idx.d
    if idx2.d != d:
        raise ValueError("indices of different orders")
    if d > 6:
        raise ValueError("permutation enumeration limited to d <= 6")
    A = idx.atoms()
    B = idx2.atoms()
    if idx.j == idx2.j:
        # orthonormal family: count matching permutations
        return float(sum(1 for s in itertools.permutations(range(d)) if all(A[s[i]] == B[i] for i in range(d))))
    inner = inner or atom_inner
    gram = np.array([[inner(x, y) for y in B] for x in A])
    return float(sum(math.prod(gram[s[i], i] for i in range(d)) for s in itertools.permutations(range(d))))


def log_bound_profile(values, d):
    """Running sup of |I_d| / (log(e + n))^(d/2) over the first n enumerated values."""
    v = np.abs(np.asarray(values, dtype=float))
    n = np.arange(1, v.size + 1)
    return np.maximum.accumulate(v / np.log(np.e + n) ** (d / 2))


def tail_exponent(samples, d, qmin=1e-4, qmax=0.05):
    """Slope of log(-log P(|X| > x)) against log x over the tail quantile range."""
    x = np.sort(np.abs(np.asarray(samples, dtype=float)))[::-1]
    n = x.size
    p = np.arange(1, n + 1) / (n + 1)
    sel = (p >= qmin) & (p <= qmax)
    return float(np.polyfit(np.log(x[sel]), np.log(-np.log(p[sel])), 1)[0])
