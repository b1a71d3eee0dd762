"""Cross-quantilogram: cross-correlation of quantile-hit processes.

Measures whether one series crossing its tail quantile at t-k predicts the
other crossing its own quantile at t. Used as a pre-modeling diagnostic on
the return panel before any spillover structure is imposed.
"""

from __future__ import annotations

import math

import numpy as np

from .data import ReturnPanel
from .errors import DomainError


def empirical_quantile(x, tau: float) -> float:
    """Lower empirical quantile: the order statistic at rank ceil(tau*n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise DomainError("empty sample")
    k = max(math.ceil(tau * n), 1)
    return float(np.partition(x, k - 1)[k - 1])


def quantile_hits(x, tau: float) -> np.ndarray:
    """Demeaned hit process psi = 1{x - q < 0} - tau against the sample quantile."""
    x = np.asarray(x, dtype=float)
    q = empirical_quantile(x, tau)
    return (x < q).astype(float) - tau


def cross_quantilogram(x, y, tau: float, lag: int) -> float:
    """Correlation of x's quantile hits at t with y's hits at t-lag.

    Both numerator and the two sums of squares run over the overlapping
    index range only. Result is in [-1, 1] by Cauchy-Schwarz.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError("series must have equal length")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0,1), got {tau}")
    if x.size <= abs(lag) + 1:
        raise ValueError(f"need more than |lag|+1={abs(lag) + 1} observations")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise DomainError("degenerate (constant) series")
    hx = quantile_hits(x, tau)
    hy = quantile_hits(y, tau)
    if lag >= 0:
        a, b = hx[lag:], hy[: hx.size - lag]
    else:
        a, b = hx[: hx.size + lag], hy[-lag:]
    return float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))


def quantilogram_matrix(panel: ReturnPanel, tau: float, lag: int) -> np.ndarray:
    """N x N matrix, entry (i, j) = cross_quantilogram(asset_i at t, asset_j at t-lag)."""
    n = panel.n_assets
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = cross_quantilogram(
                panel.returns[:, i], panel.returns[:, j], tau, lag
            )
    return out
