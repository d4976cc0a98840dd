"""Arbitrary-precision reference values frozen into the unit tests.

Each value is computed straight from its defining integral or closed form
with mpmath, independently of the package code. Run it to regenerate them.
"""

import mpmath as mp

pi = mp.pi


def nu(x):
    x = min(max(x, 0), 1)
    return x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)


def phi_hat(a):
    a = abs(a)
    if a <= 2 * pi / 3:
        return mp.mpf(1)
    if a < 4 * pi / 3:
        return mp.cos(pi / 2 * nu(3 * a / (2 * pi) - 1))
    return mp.mpf(0)


def psi_mod(a):
    a = abs(a)
    if 2 * pi / 3 <= a <= 4 * pi / 3:
        return mp.sin(pi / 2 * nu(3 * a / (2 * pi) - 1))
    if 4 * pi / 3 < a <= 8 * pi / 3:
        return mp.cos(pi / 2 * nu(3 * a / (4 * pi) - 1))
    return mp.mpf(0)


def gamma_constant(alpha, d):
    alpha = mp.mpf(alpha)
    return 2**alpha * pi ** (mp.mpf(d) / 2) * mp.gamma(alpha / 2) / mp.gamma((d - alpha) / 2)


def kernel_norm_sq(H, d):
    """||h_1||^2 from its Fourier-side closed form."""
    H = mp.mpf(H)
    return ((2 * pi) ** (1 - d) * pi ** (mp.mpf(d - 1) / 2) * d**H * mp.gamma(H + 0.5)
            / (mp.gamma(H + mp.mpf(d) / 2) * mp.gamma(2 * H + 1) * mp.sin(pi * H)))


def lowpass(n):
    f = lambda x: phi_hat(2 * x) * mp.cos(n * x)
    return mp.sqrt(2) / pi * mp.quad(f, [0, pi / 3, 2 * pi / 3])


def potential_1d(x, a1):
    x = mp.mpf(x)
    f = lambda s: s ** (-a1) * psi_mod(s) * mp.cos(s * (x - mp.mpf("0.5")))
    return mp.quad(f, [2 * pi / 3, pi, 4 * pi / 3, 2 * pi, 8 * pi / 3]) / pi


def potential_2d(x, eps, a1):
    x1, x2 = (mp.mpf(v) for v in x)

    def comp(e, s, y):
        if e:
            return psi_mod(s) * mp.cos(s * (y - mp.mpf("0.5")))
        return phi_hat(s) * mp.cos(s * y)
    edges = [(0, 2 * pi / 3, 4 * pi / 3), (2 * pi / 3, pi, 4 * pi / 3, 2 * pi, 8 * pi / 3)]
    f = lambda s, t: (s * s + t * t) ** (-a1 / 2) * comp(eps[0], s, x1) * comp(eps[1], t, x2)
    return 4 * mp.quad(f, list(edges[eps[0]]), list(edges[eps[1]])) / (2 * pi) ** 2


def main():
    mp.mp.dps = 30
    for a, d in [(0.7, 1), (1.2, 2), (2.3, 3), (0.5, 2)]:
        print("gamma_constant", a, d, mp.nstr(gamma_constant(a, d), 17))
    for H, d in [(0.7, 1), (0.75, 2), (0.6, 3)]:
        print("kernel_norm^2", H, d, mp.nstr(kernel_norm_sq(H, d), 17))
    for n in [0, 1, 2, 5]:
        print("h_n", n, mp.nstr(lowpass(n), 17))
    a1 = mp.mpf("0.7") + mp.mpf("0.5")
    for x in [0, 0.5, 3.25, -2]:
        print("potential d=1", x, mp.nstr(potential_1d(x, a1), 17))
    mp.mp.dps = 15
    a1 = mp.mpf("0.7") + 1
    for x, eps in [((0.3, -0.4), (0, 1)), ((1.5, 2.0), (1, 1)), ((0.0, 0.0), (1, 0))]:
        print("potential d=2", x, eps, mp.nstr(potential_2d(x, eps, a1), 15))


if __name__ == "__main__":
    main()
