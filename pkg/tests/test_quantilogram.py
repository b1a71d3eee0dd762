import math

import numpy as np
import pytest

from spillvar import DomainError, cross_quantilogram, quantilogram_matrix
from spillvar.quantilogram import empirical_quantile, quantile_hits

from simdata import make_panel


def brute_force_cq(x, y, tau, lag):
    """Independent double-loop oracle for the hit-process cross-correlation."""
    def lower_quantile(s):
        return sorted(s)[max(math.ceil(tau * len(s)), 1) - 1]

    qx, qy = lower_quantile(x), lower_quantile(y)
    psi_x = [(1.0 if v - qx < 0 else 0.0) - tau for v in x]
    psi_y = [(1.0 if v - qy < 0 else 0.0) - tau for v in y]
    num = sx = sy = 0.0
    for t in range(len(x)):
        s = t - lag
        if 0 <= s < len(y):
            num += psi_x[t] * psi_y[s]
            sx += psi_x[t] ** 2
            sy += psi_y[s] ** 2
    return num / math.sqrt(sx * sy)


class TestCrossQuantilogram:
    def test_self_at_lag_zero_is_one(self):
        x = np.random.default_rng(0).normal(size=200)
        assert cross_quantilogram(x, x, 0.05, 0) == 1.0

    @pytest.mark.parametrize("tau", [0.05, 0.10, 0.5, 0.95])
    @pytest.mark.parametrize("lag", [-3, -1, 0, 1, 2, 5])
    def test_matches_brute_force(self, tau, lag):
        rng = np.random.default_rng(42)
        x = rng.normal(size=50)
        y = 0.4 * x + rng.normal(size=50)
        got = cross_quantilogram(x, y, tau, lag)
        assert got == pytest.approx(brute_force_cq(x, y, tau, lag), abs=1e-12)

    def test_independent_series_small_correlation(self):
        for seed in range(3):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=5000)
            y = rng.normal(size=5000)
            assert abs(cross_quantilogram(x, y, 0.05, 1)) < 0.05

    def test_bounded_by_one(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = np.round(rng.normal(size=80), 1)  # ties on purpose
            y = np.round(rng.normal(size=80), 1)
            assert abs(cross_quantilogram(x, y, 0.1, 2)) <= 1.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=150)
        y = rng.normal(size=150)
        base = cross_quantilogram(x, y, 0.05, 1)
        assert cross_quantilogram(np.exp(x), y, 0.05, 1) == base
        assert cross_quantilogram(x, y**3, 0.05, 1) == base

    def test_swap_symmetry(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=120)
        y = rng.normal(size=120)
        for lag in (-4, -1, 0, 2, 7):
            assert cross_quantilogram(x, y, 0.05, lag) == cross_quantilogram(y, x, 0.05, -lag)

    def test_constant_series_rejected(self):
        x = np.ones(50)
        y = np.random.default_rng(0).normal(size=50)
        with pytest.raises(DomainError):
            cross_quantilogram(x, y, 0.05, 1)

    def test_validation(self):
        x = np.arange(10.0)
        with pytest.raises(ValueError):
            cross_quantilogram(x, x[:5], 0.05, 1)
        with pytest.raises(ValueError):
            cross_quantilogram(x, x, 1.5, 1)
        with pytest.raises(ValueError):
            cross_quantilogram(x, x, 0.05, 9)


class TestHits:
    def test_hit_values_and_mean(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=400)
        tau = 0.05
        h = quantile_hits(x, tau)
        assert set(np.round(np.unique(h), 12)) <= {-tau, 1 - tau}
        assert abs(h.mean()) < 2.0 / len(x)

    def test_lower_quantile_convention(self):
        x = np.arange(1.0, 101.0)  # 1..100
        # ceil(0.05*100) = 5th order statistic
        assert empirical_quantile(x, 0.05) == 5.0
        assert empirical_quantile(x, 0.001) == 1.0


class TestMatrix:
    def test_layout_rows_receive_columns_send(self):
        rng = np.random.default_rng(7)
        panel = make_panel(rng.normal(size=(300, 3)))
        m = quantilogram_matrix(panel, 0.05, 1)
        assert m.shape == (3, 3)
        for i in range(3):
            for j in range(3):
                assert m[i, j] == cross_quantilogram(
                    panel.returns[:, i], panel.returns[:, j], 0.05, 1
                )
