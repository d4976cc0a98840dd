"""Meyer scaling function and wavelet in the Fourier domain, tensor indexing and filters."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

TWO_PI_3 = 2 * np.pi / 3
FOUR_PI_3 = 4 * np.pi / 3
EIGHT_PI_3 = 8 * np.pi / 3
BASIS_VERSION = "meyer-c3-v1"


def nu(x):
    """C^3 transition polynomial, 0 below 0 and 1 above 1, nu(x) + nu(1-x) = 1."""
    x = np.clip(x, 0.0, 1.0)
    return x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)


def phi_hat(xi):
    a = np.abs(np.asarray(xi, dtype=float))
    out = np.where(a <= TWO_PI_3, 1.0, 0.0)
    mid = (a > TWO_PI_3) & (a < FOUR_PI_3)
    return np.where(mid, np.cos(np.pi / 2 * nu(3 * a / (2 * np.pi) - 1)), out)


def psi_modulus(xi):
    """|psi_hat|, supported on 2pi/3 <= |xi| <= 8pi/3."""
    a = np.abs(np.asarray(xi, dtype=float))
    lo = (a >= TWO_PI_3) & (a <= FOUR_PI_3)
    hi = (a > FOUR_PI_3) & (a <= EIGHT_PI_3)
    out = np.where(lo, np.sin(np.pi / 2 * nu(3 * a / (2 * np.pi) - 1)), 0.0)
    return np.where(hi, np.cos(np.pi / 2 * nu(3 * a / (4 * np.pi) - 1)), out)


def psi_hat(xi):
    xi = np.asarray(xi, dtype=float)
    return np.exp(-0.5j * xi) * psi_modulus(xi)


def meyer_hat(xi):
    """(phi_hat(xi), psi_hat(xi)); psi is real and symmetric about 1/2."""
    return phi_hat(xi), psi_hat(xi)


def component_hat(e, xi):
    return psi_hat(xi) if e else phi_hat(xi).astype(complex)


def eps_set(d):
    """Nonzero bit vectors of length d in binary counting order (first entry most significant)."""
    return [tuple(int(b) for b in format(m, f"0{d}b")) for m in range(1, 2**d)]


@dataclass(frozen=True)
class WaveletIndex:
    j: int
    k: tuple
    eps: tuple

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        object.__setattr__(self, "eps", tuple(int(v) for v in self.eps))
        if len(self.k) != len(self.eps):
            raise ValueError("k and eps must have the same length")
        if not any(self.eps) or any(e not in (0, 1) for e in self.eps):
            raise ValueError(f"eps={self.eps} must be a nonzero 0/1 vector")

    @property
    def d(self):
        return len(self.eps)

    def sort_key(self):
        return (abs(self.j), sum(abs(v) for v in self.k), self.eps, self.j, self.k)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def atoms(self):
        """The d one-dimensional factors as (kind, j, k) with kind 0 = phi, 1 = psi."""
        return [Atom(e, self.j, k) for e, k in zip(self.eps, self.k)]


@dataclass(frozen=True, order=True)
class Atom:
    """One-dimensional basis function: kind 0 is phi_{j,k}, kind 1 is psi_{j,k}."""

    kind: int
    j: int
    k: int


def tensor_hat(eps, xi):
    """Fourier transform of the tensor wavelet psi^(eps) at points xi of shape (..., d)."""
    eps = tuple(eps)
    if not any(eps):
        raise ValueError("eps must not be all zero")
    xi = np.asarray(xi, dtype=float)
    out = np.ones(xi.shape[:-1], dtype=complex)
    for i, e in enumerate(eps):
        out = out * component_hat(e, xi[..., i])
    return out


def gauss_pieces(edges, n):
    """Gauss-Legendre nodes and weights on consecutive intervals given by edges."""
    x0, w0 = leggauss(n)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * x0 + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w0)
    return np.concatenate(xs), np.concatenate(ws)


# breakpoints where the transforms switch formula; inside each piece they are analytic
PHI_EDGES = (0.0, TWO_PI_3, FOUR_PI_3)
PSI_EDGES = (TWO_PI_3, np.pi, FOUR_PI_3, 2 * np.pi, EIGHT_PI_3)


def _nodes_for(xmax, width, base=48):
    # GL resolves cos(x xi) on an interval of this width with margin
    return int(base + 0.8 * xmax * width)


def _eval_1d(kind, x):
    """phi(x) or psi(x) by cosine quadrature over the compact spectrum."""
    x = np.asarray(x, dtype=float)
    if kind:
        s = x - 0.5
        n = _nodes_for(np.max(np.abs(s), initial=0.0), np.pi)
        xi, w = gauss_pieces(PSI_EDGES, n)
        vals = np.cos(np.multiply.outer(s, xi)) @ (w * psi_modulus(xi))
    else:
        n = _nodes_for(np.max(np.abs(x), initial=0.0), TWO_PI_3)
        xi, w = gauss_pieces(PHI_EDGES, n)
        vals = np.cos(np.multiply.outer(x, xi)) @ (w * phi_hat(xi))
    return vals / np.pi


def eval_wavelet(idx, x):
    """Value of a tensor wavelet (WaveletIndex) or a 1-d Atom at x."""
    if isinstance(idx, Atom):
        x = np.asarray(x, dtype=float)
        return 2.0 ** (idx.j / 2) * _eval_1d(idx.kind, 2.0**idx.j * x - idx.k)
    x = np.asarray(x, dtype=float)
    out = 2.0 ** (idx.j * idx.d / 2) * np.ones(x.shape[:-1])
    for i, (e, k) in enumerate(zip(idx.eps, idx.k)):
        out = out * _eval_1d(e, 2.0**idx.j * x[..., i] - k)
    return out


def atom_hat(atom: Atom, xi):
    """Fourier transform of a 1-d atom: 2^{-j/2} e^{-i k xi / 2^j} base_hat(xi / 2^j)."""
    s = 2.0 ** (-atom.j)
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(s) * np.exp(-1j * atom.k * xi * s) * component_hat(atom.kind, xi * s)


def _atom_band(atom: Atom):
    lo, hi = (TWO_PI_3, EIGHT_PI_3) if atom.kind else (0.0, FOUR_PI_3)
    s = 2.0**atom.j
    return lo * s, hi * s


def atom_inner(a1: Atom, a2: Atom):
    """<a1, a2> by Gauss-Legendre quadrature of the Parseval integral."""
    lo1, hi1 = _atom_band(a1)
    lo2, hi2 = _atom_band(a2)
    lo, hi = max(lo1, lo2), min(hi1, hi2)
    if lo >= hi:
        return 0.0
    edges = set([lo, hi])
    for a in (a1, a2):
        base = PSI_EDGES if a.kind else PHI_EDGES
        edges.update(e * 2.0**a.j for e in base if lo < e * 2.0**a.j < hi)
    edges = sorted(edges)
    shift = max(abs(a1.k) * 2.0 ** (-a1.j), abs(a2.k) * 2.0 ** (-a2.j)) + 1
    n = _nodes_for(2 * shift, max(np.diff(edges)))
    xi, w = gauss_pieces(edges, n)
    # real functions: integrate over xi > 0 and double
    val = np.sum(w * atom_hat(a1, xi) * np.conj(atom_hat(a2, xi)))
    return float(np.real(val) / np.pi)


@dataclass(frozen=True, eq=False)
class FilterPair:
    """Two-scale coefficients: phi_{j,k} = sum h_{n-2k} phi_{j+1,n}, psi_{j,k} = sum g_{n-2k} phi_{j+1,n}.

    h is stored for n in [-L, L] and g for n in [1-L, 1+L].
    """

    h: np.ndarray
    g: np.ndarray
    L: int
    tail_energy: float
    basis_version: str = BASIS_VERSION
    tol: float = field(default=1e-10, compare=False)

    @property
    def h_start(self):
        return -self.L

    @property
    def g_start(self):
        return 1 - self.L

    def h_at(self, n):
        n = np.asarray(n)
        i = n - self.h_start
        ok = (i >= 0) & (i < self.h.size)
        return np.where(ok, self.h[np.clip(i, 0, self.h.size - 1)], 0.0)

    def g_at(self, n):
        n = np.asarray(n)
        i = n - self.g_start
        ok = (i >= 0) & (i < self.g.size)
        return np.where(ok, self.g[np.clip(i, 0, self.g.size - 1)], 0.0)

    def to_json(self):
        return json.dumps({"basis_version": self.basis_version, "L": self.L, "tol": self.tol,
                           "tail_energy": self.tail_energy, "h": self.h.tolist(), "g": self.g.tolist()})

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        if obj["basis_version"] != BASIS_VERSION:
            raise ValueError("filter cache was built for another basis version")
        return cls(np.array(obj["h"]), np.array(obj["g"]), int(obj["L"]), float(obj["tail_energy"]),
                   obj["basis_version"], float(obj["tol"]))


class FilterTruncationError(RuntimeError):
    def __init__(self, tol, achieved):
        super().__init__(f"filter tail {achieved:.3e} cannot reach tol={tol:.1e} with L <= 4096")
        self.achieved = achieved


def lowpass_coefficients(nmax):
    """h_n for n = 0..nmax, with h_n = sqrt2/(2pi) int_{|x|<=2pi/3} phi_hat(2x) cos(n x) dx."""
    n = np.arange(nmax + 1, dtype=float)
    # flat part |x| <= pi/3 in closed form
    flat = np.where(n == 0, np.pi / 3, np.sin(n * np.pi / 3) / np.where(n == 0, 1, n))
    xi, w = gauss_pieces((np.pi / 3, TWO_PI_3), _nodes_for(nmax, np.pi / 3, base=64))
    trans = np.cos(np.outer(n, xi)) @ (w * phi_hat(2 * xi))
    return np.sqrt(2) / np.pi * (flat + trans)


@lru_cache(maxsize=8)
def filter_pair(tol=1e-10):
    """Truncated Meyer filter pair with discarded energy of h below tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    nmax = 4096
    h = lowpass_coefficients(nmax)
    energy = h**2
    energy[1:] *= 2
    # tail beyond L, summed from the far end for accuracy
    tail = np.cumsum(energy[::-1])[::-1]
    tails = np.append(tail[1:], 0.0)
    ok = np.nonzero(tails < tol)[0]
    if ok.size == 0 or ok[0] >= nmax:
        raise FilterTruncationError(tol, float(tails[nmax - 1]))
    L = int(ok[0])
    hs = np.concatenate([h[1:L + 1][::-1], h[:L + 1]])
    n = np.arange(1 - L, L + 2)
    g = (-1.0) ** (n - 1) * hs[(1 - n) + L]
    return FilterPair(hs, g, L, float(tails[L]), BASIS_VERSION, tol)

