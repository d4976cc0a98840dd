"""Riesz potential and its inverse applied to tensor Meyer wavelets.

All values come from the inversion integral over the compact spectral support
of the wavelet, where the radial multiplier is smooth. The integral is a
tensor Gauss-Legendre sum, evaluated axis by axis as matrix products.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .meyer_basis import (BASIS_VERSION, PHI_EDGES, PSI_EDGES, WaveletIndex, gauss_pieces,
                          phi_hat, psi_hat)
from .riesz_core import ProcessParams

KINDS = ("I", "D")


class TableAccuracyError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(f"{message} (estimated error {achieved:.3e})")
        self.achieved = achieved


def axis_rule(kind, xmax, half=False, density=1.0):
    """Gauss-Legendre rule on the spectral support of phi (kind 0) or psi (kind 1).

    Node counts grow with the largest |x| to be evaluated so that exp(i x xi)
    stays resolved on every piece. With half=True only xi > 0 is covered.
    """
    edges = PSI_EDGES if kind else PHI_EDGES
    pos = list(edges)
    if kind:
        pieces = [(a, b) for a, b in zip(pos[:-1], pos[1:])]
    else:
        # split the flat part at 2pi/3 into two halves for faster convergence
        pieces = [(0.0, pos[1] / 2), (pos[1] / 2, pos[1]), (pos[1], pos[2])]
    if not half:
        pieces = [(-b, -a) for a, b in reversed(pieces)] + pieces
    xs, ws = [], []
    for a, b in pieces:
        n = int(density * (18 + 0.53 * (b - a) * (xmax + 1)))
        x, w = gauss_pieces((a, b), n)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _component(kind, xi):
    return psi_hat(xi) if kind else phi_hat(xi).astype(complex)


def _multiplier(eps, rules, exponent, deriv=0):
    """Tensor of prod_i c_i(xi_i) * |xi|^exponent * (i sum xi)^deriv * weights."""
    d = len(eps)
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    r2 = sum(g**2 for g in grids)
    F = r2 ** (exponent / 2) + 0j
    if deriv:
        F = F * (1j * sum(grids)) ** deriv
    for i, (e, (xi, w)) in enumerate(zip(eps, rules)):
        shape = [1] * d
        shape[i] = xi.size
        F = F * (_component(e, xi) * w).reshape(shape)
    return F


def _rules(eps, xmax, density=1.0):
    # first axis on xi > 0 only; the integrand is Hermitian, so the result is 2 Re
    return [axis_rule(e, xm, half=(i == 0), density=density) for i, (e, xm) in enumerate(zip(eps, xmax))]


def potential_grid(eps, exponent, axes, deriv=0, density=1.0):
    """Values on the tensor grid axes[0] x ... x axes[d-1].

    Computes (2 pi)^-d int exp(i x.xi) psi_hat^(eps)(xi) |xi|^exponent (i sum xi)^deriv dxi.
    """
    eps = tuple(eps)
    axes = [np.asarray(a, dtype=float) for a in axes]
    xmax = [float(np.max(np.abs(a), initial=0.0)) for a in axes]
    rules = _rules(eps, xmax, density)
    T = _multiplier(eps, rules, exponent, deriv)
    # contract the last axis first; each step replaces a node axis with a point axis
    for i in reversed(range(len(eps))):
        E = np.exp(1j * np.multiply.outer(axes[i], rules[i][0]))
        T = np.tensordot(T, E, axes=([i], [1]))
        T = np.moveaxis(T, -1, i)
    return 2 * T.real / (2 * np.pi) ** len(eps)


def potential_points(eps, exponent, points, deriv=0, density=1.0):
    """Values at individual points of shape (n, d)."""
    eps = tuple(eps)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = len(eps)
    xmax = [float(np.max(np.abs(pts[:, i]), initial=0.0)) for i in range(d)]
    rules = _rules(eps, xmax, density)
    T = _multiplier(eps, rules, exponent, deriv)
    n = pts.shape[0]
    # A[p, a_1..a_m] accumulates the partial contraction for point p
    A = np.tensordot(np.exp(1j * np.multiply.outer(pts[:, d - 1], rules[d - 1][0])), T, axes=([1], [d - 1]))
    # A has shape (n, a_0, ..., a_{d-2}); contract remaining axes pointwise
    for i in reversed(range(d - 1)):
        E = np.exp(1j * np.multiply.outer(pts[:, i], rules[i][0]))
        A = np.einsum("p...a,pa->p...", A, E)
    return 2 * A.real.reshape(n) / (2 * np.pi) ** d


def order_exponent(kind, params: ProcessParams):
    a1 = params.alpha + 1
    if kind == "I":
        return -a1
    if kind == "D":
        return a1
    raise ValueError(f"kind must be one of {KINDS}")


@dataclass(frozen=True)
class PotentialTable:
    """Lattice samples of I^{alpha+1} psi^(eps) (kind I) or D^{alpha+1} psi^(eps) (kind D)."""

    eps: tuple
    alpha_plus_1: float
    kind: str
    R: float
    delta: float
    values: np.ndarray = field(repr=False)
    decay_constant: float
    decay_exponent: float
    quad_error: float

    @property
    def d(self):
        return len(self.eps)

    @property
    def axis(self):
        n = int(round(2 * self.R / self.delta))
        return -self.R + self.delta * np.arange(n + 1)

    def envelope(self, x):
        r = np.linalg.norm(np.atleast_2d(x), axis=-1)
        return self.decay_constant / (1 + r) ** self.decay_exponent

    def lattice_mean(self):
        return float(self.values.sum() * self.delta**self.d)


def fit_decay(axis, values, rmin=2.0):
    """Envelope C/(1+|x|)^p: p from a log-log fit of the running radial maximum."""
    d = values.ndim
    grids = np.meshgrid(*[axis] * d, indexing="ij")
    r = np.sqrt(sum(g**2 for g in grids)).ravel()
    v = np.abs(values).ravel()
    order = np.argsort(r)[::-1]
    env = np.maximum.accumulate(v[order])[::-1]
    rs = r[order][::-1]
    R = axis[-1]
    sel = (rs >= rmin) & (rs <= R) & (env > 0)
    # thin out to one sample per unit radius band before fitting
    bands = np.unique(np.floor(rs[sel] * 4), return_index=True)[1]
    x = np.log1p(rs[sel][bands])
    y = np.log(env[sel][bands])
    p = -np.polyfit(x, y, 1)[0]
    C = float(np.max(v * (1 + r) ** p))
    return C, float(p)


def build_table(eps, params: ProcessParams, kind="I", R=32.0, delta=1 / 16, check=True, cache=True):
    """Tabulate the potential (or the inverse operator) of psi^(eps) on [-R, R]^d."""
    eps = tuple(int(e) for e in eps)
    if len(eps) != params.d or not any(eps):
        raise ValueError("eps must be a nonzero vector of length d")
    if R < 16 or delta > 1 / 8:
        raise ValueError("table needs R >= 16 and delta <= 1/8")
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    return _build_table(eps, float(params.alpha + 1), kind, float(R), float(delta), check, cache)


def _cache_dir():
    root = os.environ.get("RIESZCHAOS_CACHE")
    if root:
        return Path(root)
    return Path.home() / ".cache" / "rieszchaos"


def _cache_key(*parts):
    text = json.dumps([BASIS_VERSION, *parts], sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def _load(key):
    path = _cache_dir() / f"{key}.npz"
    if path.exists():
        try:
            with np.load(path, allow_pickle=False) as z:
                return {k: z[k] for k in z.files}
        except (OSError, ValueError):
            return None
    return None


def _store(key, **arrays):
    try:
        d = _cache_dir()
        d.mkdir(parents=True, exist_ok=True)
        tmp = d / f"{key}.{os.getpid()}.tmp.npz"
        np.savez(tmp, **arrays)
        os.replace(tmp, d / f"{key}.npz")
    except OSError:
        pass


@lru_cache(maxsize=32)
def _build_table(eps, a1, kind, R, delta, check, cache):
    exponent = -a1 if kind == "I" else a1
    n = int(round(2 * R / delta))
    axis = -R + delta * np.arange(n + 1)
    key = _cache_key("table", eps, a1, kind, R, delta)
    hit = _load(key) if cache else None
    if hit is not None:
        values, qerr = hit["values"], float(hit["qerr"])
    else:
        values = potential_grid(eps, exponent, [axis] * len(eps))
        qerr = 0.0
        if check:
            # compare against a denser rule at the lattice corners and a few interior points
            probe = np.array([[R] * len(eps), [-R] * len(eps), [R / 2] + [0.3] * (len(eps) - 1),
                              [0.5] * len(eps)])
            a = potential_points(eps, exponent, probe)
            b = potential_points(eps, exponent, probe, density=1.6)
            qerr = float(np.max(np.abs(a - b)))
        if cache:
            _store(key, values=values, qerr=np.array(qerr))
    if qerr > 1e-9:
        raise TableAccuracyError("spectral quadrature did not reach 1e-9", qerr)
    C, p = fit_decay(axis, values)
    return PotentialTable(eps, a1, kind, R, delta, values, C, p, qerr)


def lagrange_weights(frac, order):
    """Weights of the order-point Lagrange stencil at offsets 0..order-1 for position frac in it."""
    nodes = np.arange(order, dtype=float)
    frac = np.asarray(frac, dtype=float)[..., None]
    w = np.ones(frac.shape[:-1] + (order,))
    for m in range(order):
        others = np.delete(nodes, m)
        w[..., m] = np.prod((frac - others) / (nodes[m] - others), axis=-1)
    return w


def _interp(table: PotentialTable, x, order):
    d = table.d
    n = table.values.shape[0]
    u = (x + table.R) / table.delta
    start = np.clip(np.floor(u).astype(int) - (order // 2 - 1), 0, n - order)
    frac = u - start
    W = [lagrange_weights(frac[:, i], order) for i in range(d)]
    out = np.zeros(x.shape[0])
    offs = np.arange(order)
    if d == 1:
        idx = start[:, 0:1] + offs
        return np.sum(W[0] * table.values[idx], axis=1)
    # accumulate over the stencil, one offset combination at a time
    for combo in itertools.product(range(order), repeat=d):
        w = np.ones(x.shape[0])
        ind = []
        for i, c in enumerate(combo):
            w = w * W[i][:, c]
            ind.append(start[:, i] + c)
        out += w * table.values[tuple(ind)]
    return out


def eval_potential(table: PotentialTable, x, mode="interpolate", order=10, return_truncated=False):
    """Evaluate a table at points x (shape (n, d) or (d,)).

    interpolate: tensor Lagrange interpolation on the lattice; points outside
    [-R, R]^d give 0 and are flagged. exact: direct spectral quadrature.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x).reshape(-1, table.d)
    if mode == "exact":
        vals = potential_points(table.eps, -table.alpha_plus_1 if table.kind == "I" else table.alpha_plus_1, x)
        trunc = np.zeros(x.shape[0], dtype=bool)
    elif mode == "interpolate":
        trunc = np.max(np.abs(x), axis=1) > table.R
        vals = np.zeros(x.shape[0])
        inside = ~trunc
        if np.any(inside):
            vals[inside] = _interp(table, x[inside], order)
    else:
        raise ValueError("mode must be 'interpolate' or 'exact'")
    if single:
        vals, trunc = vals[0], bool(trunc[0])
    return (vals, trunc) if return_truncated else vals


def coeff(t, idx: WaveletIndex, params: ProcessParams, tables, mode="interpolate"):
    """Coefficient of h_t on psi^(eps)_{j,k}: 2^{-jH} [P(2^j t* - k) - P(-k)] with P the potential."""
    table = tables[idx.eps]
    k = np.asarray(idx.k, dtype=float)
    x1 = 2.0**idx.j * t - k
    v = eval_potential(table, np.stack([x1, -k]), mode=mode)
    return 2.0 ** (-idx.j * params.H) * float(v[0] - v[1])


def coeff_direct(t, js, ks, params: ProcessParams, density=1.0):
    """<h_t, psi_{j_1,k_1} x ... x psi_{j_d,k_d}> by tensor quadrature of the Parseval integral."""
    d = params.d
    js = [int(j) for j in js]
    ks = [int(k) for k in ks]
    if len(js) != d or len(ks) != d:
        raise ValueError("need d levels and d shifts")
    if t == 0:
        return 0.0
    rules = []
    for i, (j, k) in enumerate(zip(js, ks)):
        xmax = abs(k) + 2.0**j * t + 1
        xi, w = axis_rule(1, xmax, half=(i == 0), density=density)
        s = 2.0**j
        # atom transform, conjugated: 2^{-j/2} e^{+i k xi / 2^j} conj psi_hat(xi / 2^j)
        rules.append((xi * s, w * s, np.sqrt(1 / s) * np.exp(1j * k * xi) * np.conj(psi_hat(xi))))
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    r2 = sum(g**2 for g in grids)
    T = (np.exp(-1j * t * sum(grids)) - 1) * r2 ** (-(params.alpha + 1) / 2)
    for i, (xi, w, f) in enumerate(rules):
        shape = [1] * d
        shape[i] = xi.size
        T = T * (w * f).reshape(shape)
    return float(2 * np.sum(T).real / (2 * np.pi) ** d)


def compose_potential(eps, a, b, points, R=64.0, delta=1 / 8):
    """I^a applied to sampled values of I^b psi^(eps) (d = 1).

    The inner potential is sampled on a lattice; since it is band limited below
    pi/delta, its transform is recovered from the samples by the trapezoid rule,
    multiplied by |xi|^-a and inverted by quadrature.
    """
    eps = tuple(eps)
    if len(eps) != 1:
        raise ValueError("compose_potential is implemented for d = 1")
    axis = np.arange(-R, R + delta / 2, delta)
    inner = potential_grid(eps, -b, [axis])
    xi, w = axis_rule(1, max(np.max(np.abs(points)), R), half=True)
    spec = delta * np.exp(-1j * np.outer(xi, axis)) @ inner
    E = np.exp(1j * np.outer(np.asarray(points, dtype=float), xi))
    return 2 * (E @ (w * spec * xi ** (-a))).real / (2 * np.pi)
