"""Process parameters, the Riesz kernel and the process kernel h_t."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

# Values of (order - dimension) for which the kernel carries a logarithm.
LOG_BRANCH_OFFSETS = (0, 2, 4, 6)


class DomainError(ValueError):
    """Argument outside the domain where a formula is defined."""


class QuadratureError(RuntimeError):
    """Quadrature failed to reach its accuracy target."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class ProcessParams:
    """Hurst index H, chaos order d and the derived Riesz order alpha."""

    H: float
    d: int
    alpha: float
    variance_norm: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.H < 1.0:
            raise DomainError(f"H={self.H} outside (1/2, 1)")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d={self.d} must be an integer >= 1")
        if self.alpha != self.H + self.d / 2 - 1:
            raise DomainError("alpha must equal H + d/2 - 1")
        if self.variance_norm <= 0:
            raise DomainError("variance_norm must be positive")
        # the kernel of the process is always on the pure power branch
        assert kernel_branch(self.alpha + 1, self.d) == "power"

    @property
    def kernel_exponent(self):
        return self.H - self.d / 2


@dataclass(frozen=True)
class RieszKernelSpec:
    alpha: float
    d: int
    branch: str
    gamma: float


def _is_int(x, tol=1e-12):
    return abs(x - round(x)) <= tol


def kernel_branch(alpha, d):
    """'power_log' when alpha - d is one of the listed even offsets, else 'power'."""
    off = alpha - d
    if _is_int(off) and int(round(off)) in LOG_BRANCH_OFFSETS:
        return "power_log"
    return "power"


def gamma_constant(alpha, d):
    """Normalizing constant of the Riesz kernel of order alpha in dimension d."""
    if d < 1:
        raise DomainError("d must be >= 1")
    # alpha = -2k, k = 0, 1, 2, ...
    if alpha <= 0 and _is_int(alpha / 2):
        return 1.0
    off = alpha - d
    if off >= 0 and _is_int(off / 2):
        if d % 2:
            raise DomainError(f"alpha={alpha} hits a Gamma pole and d={d} is odd")
        m = int(round(off / 2))
        sign = (-1.0) ** ((d - 2) // 2)
        return sign * math.pi ** (d / 2) * 2.0 ** (alpha - 1) * math.factorial(m) * special.gamma(alpha / 2)
    return 2.0**alpha * math.pi ** (d / 2) * special.gamma(alpha / 2) / special.gamma((d - alpha) / 2)


def kernel_spec(alpha, d):
    return RieszKernelSpec(alpha, d, kernel_branch(alpha, d), gamma_constant(alpha, d))


def riesz_kernel(x, alpha, d):
    """k_alpha(x); x has shape (..., d). Raises at the origin."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(np.reshape(x, (-1, d)), axis=1).reshape(x.shape[:-1] if x.ndim else ())
    if np.any(r == 0):
        raise DomainError("Riesz kernel is singular at the origin")
    spec = kernel_spec(alpha, d)
    v = r ** (alpha - d)
    if spec.branch == "power_log":
        v = v * np.log(1.0 / r)
    return v / spec.gamma


def kernel_h(t, x, params: ProcessParams):
    """Process kernel k_{alpha+1}(t* - x) - k_{alpha+1}(x)."""
    if t < 0:
        raise DomainError("t must be >= 0")
    x = np.asarray(x, dtype=float)
    d = params.d
    r0 = np.linalg.norm(x, axis=-1)
    r1 = np.linalg.norm(t - x, axis=-1)
    if np.any(r0 == 0) or np.any(r1 == 0):
        raise DomainError("h_t is singular at 0 and at t*")
    g = gamma_constant(params.alpha + 1, d)
    b = params.kernel_exponent
    return (r1**b - r0**b) / g


def _quad(f, a, b, **kw):
    val, err = integrate.quad(f, a, b, limit=200, epsabs=0.0, epsrel=1e-11, **kw)
    return val, err


def _norm_sq_unit(H, d):
    """||h_1||^2 by quadrature reduced to the (axis, distance-to-axis) half plane.

    With e the unit diagonal, write x = s e + y with y orthogonal to e and q = |y|;
    the kernel depends on (s, q) only. The reflection s -> a - s swaps the two
    singular terms, so the half s < a/2 is integrated and doubled. Polar
    coordinates about the origin isolate the singularity there, and the far
    field is mapped to sigma = a / rho, where the integrand behaves like
    sigma^(1 - 2H).
    """
    alpha = H + d / 2 - 1
    b = H - d / 2
    g = gamma_constant(alpha + 1, d)
    a = math.sqrt(d)
    errs = []

    def _diff_sq(rho, c):
        # (r1^b - rho^b)^2 / g^2 with r1^2 = a^2 - 2 a rho c + rho^2, free of cancellation
        u = (a * a - 2 * a * rho * c) / (rho * rho)
        return (rho**b * math.expm1(0.5 * b * math.log1p(u)) / g) ** 2

    if d == 1:
        def f2(s):
            return _diff_sq(abs(s), -1.0 if s < 0 else 1.0)

        near1, e1 = _quad(f2, -a, 0.0)
        near2, e2 = _quad(f2, 0.0, a / 2)
        # s = -a / sigma on (-inf, -a]
        def far(sg):
            sg = max(sg, 1e-12)
            return f2(-a / sg) * a / sg**2 / sg ** (1 - 2 * H)

        far, e3 = _quad(far, 0.0, 1.0,
                        weight="alg", wvar=(1 - 2 * H, 0.0))
        return 2 * (near1 + near2 + far), 2 * (e1 + e2 + e3)

    sphere = 2 * math.pi ** ((d - 1) / 2) / special.gamma((d - 1) / 2)

    f2 = _diff_sq
    def inner(theta):
        c = math.cos(theta)
        rmax = a / (2 * c) if c > 1e-15 else math.inf
        r_near = min(rmax, a)
        v1, e1 = _quad(lambda r: r ** (d - 1) * f2(r, c), 0.0, r_near)
        v2 = e2 = 0.0
        if rmax > a:
            lo = a / rmax if math.isfinite(rmax) else 0.0

            def far(sg):
                sg = max(sg, 1e-12)
                r = a / sg
                return r ** (d - 1) * f2(r, c) * a / sg**2

            if lo == 0.0:
                v2, e2 = _quad(lambda sg: far(sg) / max(sg, 1e-12) ** (1 - 2 * H), 0.0, 1.0,
                               weight="alg", wvar=(1 - 2 * H, 0.0))
            else:
                v2, e2 = _quad(far, lo, 1.0)
        errs.append(e1 + e2)
        return (v1 + v2) * math.sin(theta) ** (d - 2)

    val, e_outer = integrate.quad(inner, 0.0, math.pi, points=[math.pi / 3, math.pi / 2],
                                  limit=200, epsabs=0.0, epsrel=1e-10)
    err = e_outer + math.pi * max(errs)
    return 2 * sphere * val, 2 * sphere * err


@lru_cache(maxsize=64)
def _unit_norm(H, d):
    val, err = _norm_sq_unit(H, d)
    target = 1e-6 if d <= 2 else 1e-4
    if not np.isfinite(val) or err > target * val:
        raise QuadratureError("kernel_norm did not converge", err / max(val, 1e-300))
    return math.sqrt(val)


def kernel_norm(t, params: ProcessParams):
    """L2 norm of h_t, computed at t=1 by quadrature and rescaled by t^H."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0:
        return 0.0
    return t**params.H * _unit_norm(float(params.H), int(params.d))


def derive_params(H, d, normalize=True):
    """Validate (H, d) and derive alpha; optionally normalize E[X_1^2] to one."""
    if not 0.5 < H < 1.0:
        raise DomainError(f"H={H} outside (1/2, 1)")
    if int(d) != d or d < 1:
        raise DomainError(f"d={d} must be an integer >= 1")
    d = int(d)
    alpha = H + d / 2 - 1
    norm = 1.0
    if normalize:
        norm = 1.0 / math.sqrt(math.factorial(d) * _unit_norm(float(H), d) ** 2)
    return ProcessParams(H=float(H), d=d, alpha=alpha, variance_norm=norm)

