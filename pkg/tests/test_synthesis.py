import numpy as np
import pytest
from scipy import stats

from rieszchaos.riesz_core import derive_params, kernel_norm
from rieszchaos.synthesis import (TailBudgetError, TruncationSpec, fbm_reference, level_masses, resolve_truncation,
                                  sample_values, second_moment, synth_field, synth_high, synth_path, synth_paths)

P1 = derive_params(0.7, 1)
P2 = derive_params(0.7, 2)
GRID = np.linspace(0, 1, 65)


@pytest.fixture(scope="module")
def mc2():
    times = np.array([0.125, 0.25, 0.5, 0.75, 1.0])
    return times, sample_values(P2, times, seed=606, n_paths=4000, threads=4)


def _z(x, target):
    return abs(x.mean() - target) / (x.std(ddof=1) / np.sqrt(x.size))


def test_truncation_spec_validation():
    with pytest.raises(ValueError):
        TruncationSpec(j_min=0)
    with pytest.raises(ValueError):
        TruncationSpec(j_min=-30, j_max=12)
    with pytest.raises(ValueError):
        TruncationSpec(k_halfwidth=0)
    assert TruncationSpec.for_grid(2**14).j_max == 15
    assert TruncationSpec.for_grid(100).j_max == 12


def test_tail_budget_error():
    with pytest.raises(TailBudgetError) as err:
        resolve_truncation(P2, TruncationSpec(j_min=-2, j_max=3))
    assert err.value.report["total"] > 1e-4


def test_resolved_truncation_meets_budget():
    tr = resolve_truncation(P2, TruncationSpec())
    assert tr.j_min < 0 and tr.tail_report["total"] <= 1e-4
    assert tr.tail_report["captured"] == pytest.approx(1.0, abs=1e-3)


# [TRIVIAL]
@pytest.mark.parametrize("params", [P1, P2])
def test_path_starts_at_zero(params):
    p = synth_path(params, GRID, seed=3)
    assert p.total[0] == 0.0 and p.low[0] == 0.0 and p.high[0] == 0.0
    assert np.all(np.isfinite(p.total))


def test_determinism_and_path_addressing():
    a = synth_paths(P2, GRID, seed=9, n_paths=6, threads=1)
    b = synth_paths(P2, GRID, seed=9, n_paths=6, threads=4)
    c = synth_path(P2, GRID, seed=9, path_index=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.total, y.total)
    assert np.array_equal(a[4].low, c.low) and np.array_equal(a[4].high, c.high)
    d = synth_path(P2, GRID, seed=10, path_index=4)
    assert not np.array_equal(c.total, d.total)


# [DERIVED] oracle: exact quadratic form of the coefficient covariance
def test_second_moment_quadratic_form():
    tr = TruncationSpec()
    for t in (0.25, 0.5, 1.0):
        assert second_moment(P2, t, tr) == pytest.approx(t ** (2 * 0.7), rel=5e-3)
    raw = derive_params(0.7, 2, normalize=False)
    m = level_masses(raw, resolve_truncation(raw, tr))
    assert sum(m.values()) == pytest.approx(kernel_norm(1.0, raw) ** 2, rel=1e-2)


def test_d2_variance_monte_carlo(mc2):
    times, X = mc2
    for i, t in enumerate(times):
        assert _z(X[:, i] ** 2, t**1.4) <= 3


# self-similarity at the moment level
def test_self_similarity_ratios(mc2):
    times, X = mc2
    m = (X**2).mean(axis=0)
    for c, (i, j) in [(0.5, (2, 4)), (0.25, (1, 4)), (0.5, (0, 1))]:
        ratio = m[i] / m[j]
        # delta-method standard error of a ratio of means
        a, b = X[:, i] ** 2, X[:, j] ** 2
        cov = np.cov(a, b) / a.size
        se = ratio * np.sqrt(cov[0, 0] / m[i] ** 2 + cov[1, 1] / m[j] ** 2 - 2 * cov[0, 1] / (m[i] * m[j]))
        assert abs(ratio - c**1.4) <= 3 * se


def test_increment_stationarity_and_moment_scaling():
    times = np.array([0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0])
    X = sample_values(P2, times, seed=707, n_paths=4000, threads=4)
    inc = [X[:, i + 1] - X[:, i] for i in (0, 3, 6)]
    for a in inc:
        for b in inc:
            if a is not b:
                assert stats.ks_2samp(a, b).pvalue > 0.05
    for p in (2, 4):
        ref = np.abs(X[:, -1]) ** p
        m1 = ref.mean()
        for s_i, t_i in [(0, 4), (2, 6), (1, 7)]:
            v = np.abs(X[:, t_i] - X[:, s_i]) ** p / (times[t_i] - times[s_i]) ** (p * 0.7)
            se = np.sqrt(v.var() / v.size + ref.var() / ref.size)
            assert abs(v.mean() - m1) <= 3 * se


def test_refinement_convergence():
    times = np.array([0.3, 0.6, 1.0])
    base = TruncationSpec()
    tr = resolve_truncation(P2, base)
    # the 40-level span caps the refinement at j_max = j_min + 40
    fine = TruncationSpec(j_min=tr.j_min, j_max=tr.j_min + 40, k_halfwidth=2 * base.k_halfwidth)
    x0 = sample_values(P2, times, base, seed=5, n_paths=400)
    x1 = sample_values(P2, times, fine, seed=5, n_paths=400)
    rel = np.mean((x1 - x0) ** 2, axis=0) / times**1.4
    assert np.all(rel <= tr.tail_report["total"])


def test_low_part_is_smooth():
    second = []
    for n in (257, 513, 1025):
        p = synth_path(P2, np.linspace(0, 1, n), seed=12)
        second.append(np.max(np.abs(np.diff(p.low, 2))))
    # O(dt^2): halving the step divides second differences by about four
    assert second[1] / second[0] == pytest.approx(0.25, abs=0.05)
    assert second[2] / second[1] == pytest.approx(0.25, abs=0.05)


def test_grid_validation():
    with pytest.raises(ValueError):
        synth_path(P1, np.array([0.0, 1.5]))


# [TRIVIAL] diagonal restriction and origin
def test_field_diagonal_matches_high_path():
    axis = np.linspace(0, 1, 33)
    tr = TruncationSpec(j_max=6, tail_budget=1.0)
    f = synth_field(P2, (axis, axis), tr, seed=21, path_index=2)
    hp = synth_path(P2, axis, TruncationSpec(j_max=6, tail_budget=1.0), seed=21, path_index=2)
    assert np.max(np.abs(np.diag(f.values) - hp.high)) < 1e-10
    assert f.values[0, 0] == 0.0
    assert np.isfinite(f.growth["C_hat"])


def test_synth_high_beyond_unit_interval():
    t = np.linspace(0, 16, 257)
    h = synth_high(P2, t, TruncationSpec(j_max=6, tail_budget=1.0), seed=4)
    assert h[0] == 0.0 and np.all(np.isfinite(h))
    hp = synth_path(P2, t[:17], TruncationSpec(j_max=6, tail_budget=1.0), seed=4)
    assert np.allclose(h[:17], hp.high, atol=1e-12)


def test_field_rejects_d3():
    with pytest.raises(ValueError):
        synth_field(derive_params(0.7, 3), [np.zeros(2)] * 3)


# [TRIVIAL] fBm reference normalization
def test_fbm_reference():
    grid = np.linspace(0, 1, 257)
    B = fbm_reference(0.7, grid, 20000, seed=1)
    assert B.shape == (20000, 257) and np.all(B[:, 0] == 0)
    assert _z(B[:, -1] ** 2, 1.0) <= 3
    assert _z(B[:, -1] * B[:, 128], 0.5) <= 3
    assert np.array_equal(fbm_reference(0.7, grid, 5, seed=1), fbm_reference(0.7, grid, 5, seed=1))
    with pytest.raises(ValueError):
        fbm_reference(0.7, np.array([0.0, 0.1, 0.3]), 1, 0)


def test_fbm_reference_increments_against_formula():
    grid = np.linspace(0, 1, 65)
    B = fbm_reference(0.75, grid, 20000, seed=2)
    for s, t in [(8, 40), (16, 64), (1, 2)]:
        want = 0.5 * (grid[t] ** 1.5 + grid[s] ** 1.5 - (grid[t] - grid[s]) ** 1.5)
        assert _z(B[:, s] * B[:, t], want) <= 3


# [DERIVED] oracle: the reference generator; KS between increment marginals
def test_ks_against_fbm():
    grid = np.linspace(0, 1, 257)
    X = sample_values(derive_params(0.75, 1), grid[[100, 116]], seed=31, n_paths=2000, threads=4)
    B = fbm_reference(0.75, grid, 2000, seed=32)
    assert stats.ks_2samp(X[:, 1] - X[:, 0], B[:, 116] - B[:, 100]).pvalue > 0.01
