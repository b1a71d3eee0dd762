"""VaR backtests: violation rate, unconditional/conditional coverage and
the dynamic quantile regression test.

Likelihood-ratio computations use the 0*log(0) = 0 convention so boundary
counts (no hits, all hits, empty transition cells) stay finite. Chi-square
upper tails come from the regularized incomplete gamma function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of chi-square via the regularized incomplete gamma."""
    if x <= 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(gammaincc(df / 2.0, x / 2.0))


def _nlogp(n: float, p: float) -> float:
    """n*log(p) with 0*log(0) = 0."""
    if n == 0:
        return 0.0
    return n * math.log(p)


def hit_sequence(r, var) -> np.ndarray:
    """Binary violations 1{r_t <= var_t}."""
    r = np.asarray(r, dtype=float)
    var = np.asarray(var, dtype=float)
    if r.shape != var.shape:
        raise ValueError("returns and VaR must have equal length")
    return (r <= var).astype(int)


def violation_rate(h) -> float:
    h = np.asarray(h)
    if h.size < 1:
        raise ValueError("empty hit sequence")
    return float(np.mean(h))


def kupiec_uc(h, tau: float) -> tuple[float, float]:
    """Unconditional coverage likelihood ratio; p from chi-square(1)."""
    h = np.asarray(h)
    t = h.size
    n1 = int(h.sum())
    n0 = t - n1
    pi = n1 / t
    lr = -2.0 * (
        _nlogp(n0, 1.0 - tau)
        + _nlogp(n1, tau)
        - _nlogp(n0, 1.0 - pi)
        - _nlogp(n1, pi)
    )
    lr = max(lr, 0.0)
    return lr, chi2_sf(lr, 1)


def independence_lr(h) -> float:
    """First-order Markov vs constant-probability likelihood ratio."""
    h = np.asarray(h)
    prev, curr = h[:-1], h[1:]
    n00 = int(np.sum((prev == 0) & (curr == 0)))
    n01 = int(np.sum((prev == 0) & (curr == 1)))
    n10 = int(np.sum((prev == 1) & (curr == 0)))
    n11 = int(np.sum((prev == 1) & (curr == 1)))
    total = n00 + n01 + n10 + n11
    pi01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    pi11 = n11 / (n10 + n11) if n10 + n11 else 0.0
    pibar = (n01 + n11) / total if total else 0.0
    l_const = _nlogp(n00 + n10, 1.0 - pibar) + _nlogp(n01 + n11, pibar)
    l_markov = (
        _nlogp(n00, 1.0 - pi01)
        + _nlogp(n01, pi01)
        + _nlogp(n10, 1.0 - pi11)
        + _nlogp(n11, pi11)
    )
    return max(-2.0 * (l_const - l_markov), 0.0)


def christoffersen_cc(h, tau: float) -> tuple[float, float]:
    """Joint coverage-and-independence LR = LR_uc + LR_ind; p from chi-square(2)."""
    h = np.asarray(h)
    if h.size < 2:
        raise ValueError("need at least two observations")
    lr_uc, _ = kupiec_uc(h, tau)
    lr = lr_uc + independence_lr(h)
    return lr, chi2_sf(lr, 2)


@dataclass(frozen=True)
class DqResult:
    stat: float
    p_value: float
    lags: int
    df: int
    degenerate: bool  # regressors were rank deficient; df reduced to the rank


def dq_test(h, var, tau: float, lags: int = 4) -> DqResult:
    """Dynamic quantile test: Wald statistic from regressing the demeaned
    hits on a constant, their own lags, and the contemporaneous VaR.

    With rank-deficient regressors (e.g. constant VaR) the least-squares
    pseudo-solution is used and the chi-square degrees of freedom drop to
    the design rank, flagged via ``degenerate``.
    """
    h = np.asarray(h, dtype=float)
    var = np.asarray(var, dtype=float)
    if h.shape != var.shape:
        raise ValueError("hits and VaR must have equal length")
    if lags < 0:
        raise ValueError("lags must be >= 0")
    t = h.size
    if t <= lags + 2:
        raise ValueError(f"need T > lags + 2 = {lags + 2}, got {t}")
    demeaned = h - tau
    cols = [np.ones(t - lags)]
    for j in range(1, lags + 1):
        cols.append(demeaned[lags - j : t - j])
    cols.append(var[lags:])
    X = np.column_stack(cols)
    y = demeaned[lags:]
    theta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ theta
    stat = float(fitted @ fitted) / (tau * (1.0 - tau))
    df = int(rank)
    degenerate = df < lags + 2
    return DqResult(stat=stat, p_value=chi2_sf(stat, df), lags=lags, df=df, degenerate=degenerate)


@dataclass(frozen=True)
class BacktestReport:
    """All VaR diagnostics for one (asset, model) pair."""

    n_obs: int
    violation_rate: float
    uc_lr: float
    uc_p: float
    cc_lr: float
    cc_p: float
    dq_stat: float
    dq_p: float
    dq_lags: int
    dq_degenerate: bool


def backtest_path(r, var, tau: float, dq_lags: int = 4) -> BacktestReport:
    """Evaluate a VaR path against realized returns."""
    h = hit_sequence(r, var)
    uc_lr, uc_p = kupiec_uc(h, tau)
    cc_lr, cc_p = christoffersen_cc(h, tau)
    dq = dq_test(h, var, tau, lags=dq_lags)
    return BacktestReport(
        n_obs=h.size,
        violation_rate=violation_rate(h),
        uc_lr=uc_lr,
        uc_p=uc_p,
        cc_lr=cc_lr,
        cc_p=cc_p,
        dq_stat=dq.stat,
        dq_p=dq.p_value,
        dq_lags=dq.lags,
        dq_degenerate=dq.degenerate,
    )
