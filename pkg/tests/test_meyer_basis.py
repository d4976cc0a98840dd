import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rieszchaos.meyer_basis import (EIGHT_PI_3, TWO_PI_3, Atom, FilterPair, WaveletIndex, atom_inner,
                                    eps_set, eval_wavelet, filter_pair, gauss_pieces, meyer_hat, phi_hat,
                                    psi_hat, psi_modulus, tensor_hat)


# [TRIVIAL] and [STATED] support conditions
def test_meyer_hat_examples():
    ph, ps = meyer_hat(0.0)
    assert ph == 1.0 and ps == 0.0
    assert psi_hat(np.pi / 2) == 0.0
    assert psi_hat(3 * np.pi) == 0.0
    assert phi_hat(1.5 * np.pi) == 0.0


@given(st.floats(-20, 20))
def test_partition_of_unity(xi):
    total = phi_hat(xi) ** 2 + sum(psi_modulus(xi / 2**j) ** 2 for j in range(12))
    assert total == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-30, 30))
def test_supports(xi):
    a = abs(xi)
    if a > 4 * np.pi / 3:
        assert phi_hat(xi) == 0.0
    if a < TWO_PI_3 or a > EIGHT_PI_3:
        assert psi_modulus(xi) == 0.0


def test_eps_set_order():
    assert eps_set(2) == [(0, 1), (1, 0), (1, 1)]
    assert len(eps_set(3)) == 7


def test_wavelet_index_rejects_zero_eps():
    with pytest.raises(ValueError):
        WaveletIndex(0, (1, 2), (0, 0))


def test_wavelet_index_total_order():
    a = WaveletIndex(0, (1,), (1,))
    b = WaveletIndex(-2, (0,), (1,))
    c = WaveletIndex(1, (3,), (1,))
    assert sorted([c, b, a]) == [a, c, b]


# [TRIVIAL]
def test_tensor_hat_examples():
    assert tensor_hat((1, 1), np.array([np.pi, np.pi])) == pytest.approx(psi_hat(np.pi) ** 2)
    assert tensor_hat((0, 1), np.array([0.5, 1.2])) == 0.0
    with pytest.raises(ValueError):
        tensor_hat((0, 0), np.zeros(2))


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.sampled_from(eps_set(2)))
def test_tensor_hat_annulus(xi, eps):
    xi = np.array(xi)
    v = tensor_hat(eps, xi)
    if v != 0:
        assert any(TWO_PI_3 <= abs(x) <= EIGHT_PI_3 for x, e in zip(xi, eps) if e)
        assert np.linalg.norm(xi) >= TWO_PI_3


# [DERIVED] Parseval for an orthonormal element, by quadrature on the compact support
def test_tensor_hat_normalization():
    edges = np.array([-EIGHT_PI_3, -4 * np.pi / 3, -TWO_PI_3, 0, TWO_PI_3, 4 * np.pi / 3, EIGHT_PI_3])
    x, w = gauss_pieces(edges, 80)
    X, Y = np.meshgrid(x, x, indexing="ij")
    v = np.abs(tensor_hat((1, 0), np.stack([X, Y], axis=-1))) ** 2
    assert np.sum(v * np.outer(w, w)) / (2 * np.pi) ** 2 == pytest.approx(1.0, abs=1e-10)


# [TRIVIAL] Sum h = sqrt 2, up to the truncated tail
def test_filter_pair_sums_and_identities():
    fp = filter_pair(1e-10)
    assert fp.tail_energy < 1e-10
    assert fp.h.sum() == pytest.approx(math.sqrt(2), abs=1e-5)
    n = np.arange(-fp.L - 20, fp.L + 21)
    h, g = fp.h_at(n), fp.g_at(n)
    for m in range(-8, 9):
        hs, gs = fp.h_at(n - 2 * m), fp.g_at(n - 2 * m)
        assert np.dot(h, hs) == pytest.approx(1.0 if m == 0 else 0.0, abs=1e-8)
        assert np.dot(g, gs) == pytest.approx(1.0 if m == 0 else 0.0, abs=1e-8)
        assert np.dot(h, gs) == pytest.approx(0.0, abs=1e-8)


def test_filter_pair_json_roundtrip():
    fp = filter_pair(1e-10)
    back = FilterPair.from_json(fp.to_json())
    assert np.array_equal(back.h, fp.h) and np.array_equal(back.g, fp.g)
    assert (back.L, back.tail_energy, back.tol) == (fp.L, fp.tail_energy, fp.tol)
    obj = json.loads(fp.to_json())
    obj["basis_version"] = "other"
    with pytest.raises(ValueError):
        FilterPair.from_json(json.dumps(obj))


def test_filter_pair_rejects_bad_tol():
    with pytest.raises(ValueError):
        filter_pair(0.0)


# [DERIVED] oracle: mpmath quadrature of the low-pass integral, frozen
@pytest.mark.parametrize("n,expected", [(0, 0.74375040006195428), (1, 0.44409466964876158),
                                        (2, -0.03504825887364087), (5, 0.063667249127492502)])
def test_filter_oracle(n, expected):
    assert float(filter_pair().h_at(n)) == pytest.approx(expected, abs=1e-12)


# [DERIVED] h_0 by a time-domain inner product of eval_wavelet values
def test_h0_time_domain():
    x = np.arange(-300, 300, 1 / 16)
    v = np.sum(eval_wavelet(Atom(0, 0, 0), x) * eval_wavelet(Atom(0, 1, 0), x)) / 16
    assert v == pytest.approx(float(filter_pair().h_at(0)), abs=1e-6)


# [TRIVIAL]
def test_eval_wavelet_dilation():
    x = np.linspace(-3, 3, 13)
    a = eval_wavelet(Atom(1, 2, 3), x)
    b = 2.0 ** 1 * eval_wavelet(Atom(1, 0, 0), 4 * x - 3) / 2 ** 0
    assert np.allclose(a, b, atol=1e-10, rtol=0)
    pts = np.array([[0.3, -0.2], [1.1, 0.7]])
    idx = WaveletIndex(1, (2, -1), (1, 0))
    direct = eval_wavelet(idx, pts)
    manual = 2.0 ** 1 * eval_wavelet(Atom(1, 0, 0), 2 * pts[:, 0] - 2) * eval_wavelet(Atom(0, 0, 0), 2 * pts[:, 1] + 1)
    assert np.allclose(direct, manual, atol=1e-12)


# [STATED] vanishing moments: psi_hat is identically 0 on a neighbourhood of the origin,
# so every derivative there (every moment) vanishes; the low moments are also checked in time.
def test_vanishing_moments():
    xi = np.linspace(-2.0, 2.0, 401)
    assert np.all(psi_modulus(xi) == 0)
    x = np.arange(-400, 400, 0.05)
    v = eval_wavelet(Atom(1, 0, 0), x) * 0.05
    assert abs(v.sum()) < 1e-8
    assert abs(((x - 0.5) * v).sum()) < 1e-8
    assert abs(((x - 0.5) ** 2 * v).sum()) < 1e-6


# [DERIVED] orthonormality by numerical inner products
def test_orthogonality_example():
    assert atom_inner(Atom(1, 0, 0), Atom(1, 1, 5)) == pytest.approx(0.0, abs=1e-8)


def test_gram_matrix_of_random_tensor_elements():
    rng = np.random.default_rng(7)
    idx = set()
    while len(idx) < 30:
        j = int(rng.integers(-2, 3))
        idx.add(WaveletIndex(j, tuple(int(v) for v in rng.integers(-3, 4, 2)), eps_set(2)[rng.integers(3)]))
    idx = sorted(idx)
    cache = {}

    def inner(a, b):
        key = (a, b)
        if key not in cache:
            cache[key] = atom_inner(a, b)
        return cache[key]

    G = np.array([[np.prod([inner(x, y) for x, y in zip(p.atoms(), q.atoms())]) for q in idx] for p in idx])
    assert np.max(np.abs(G - np.eye(len(idx)))) < 1e-7
