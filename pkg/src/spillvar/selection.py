"""Influential-asset selection via recursive partial correlation.

For a target asset, candidates are the other panel columns lagged one day.
The first candidate (highest absolute correlation with the target) must be
significant at level alpha; each later candidate is the remaining column
whose residual — after projecting out the already-selected set — correlates
most with the target's regression residual, and is kept only if it is
significant at alpha *and* improves the adjusted R². Weights over the final
set are the squared loadings of the first principal component of the
selected assets' correlation matrix, so they are nonnegative and sum to 1.
An empty set means no spillover is detected and the weights are zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import ReturnPanel
from .errors import DomainError, SingularDesignError

ADJ_R2_TOL = 1e-12  # "improves" means strictly, up to this guard


@dataclass(frozen=True)
class SpilloverWeights:
    """Selected source columns for one target, with PCA-derived weights."""

    target: int
    sources: tuple[int, ...]
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(int(j) for j in self.sources))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.target in self.sources:
            raise ValueError("target cannot be its own spillover source")
        if len(self.sources) != self.weights.size:
            raise ValueError("one weight per source required")
        if self.sources:
            if np.any(self.weights < 0.0):
                raise ValueError("weights must be nonnegative")
            if abs(self.weights.sum() - 1.0) > 1e-10:
                raise ValueError("nonempty weights must sum to 1")
        elif self.weights.size:
            raise ValueError("empty source set takes no weights")

    @property
    def empty(self) -> bool:
        return not self.sources


@dataclass(frozen=True)
class SelectionStep:
    """One candidate considered by the selection loop."""

    candidate: int
    correlation: float  # signed value that picked the candidate
    p_value: float  # coefficient p-value once added to the regression
    adj_r2: float
    accepted: bool


@dataclass
class SelectionTrace:
    target: int
    alpha: float
    steps: list[SelectionStep] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "alpha": self.alpha,
            "steps": [vars(s) for s in self.steps],
        }


@dataclass(frozen=True)
class OlsFit:
    coef: np.ndarray  # intercept first
    t_stats: np.ndarray
    p_values: np.ndarray
    adj_r2: float
    residuals: np.ndarray


def ols_step(y, Z) -> OlsFit:
    """Least squares of y on [1, Z]; p-values from t(T-k-1)."""
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    T, k = Z.shape
    if T != y.size:
        raise ValueError(f"{T} regressor rows for {y.size} observations")
    X = np.column_stack([np.ones(T), Z])
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesignError("design matrix [1, Z] is rank deficient")
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ coef
    dof = T - k - 1
    if dof < 1:
        raise ValueError(f"need T > k + 1, got T={T}, k={k}")
    rss = float(residuals @ residuals)
    sigma2 = rss / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    t_stats = np.empty_like(coef)
    nz = se > 0.0
    t_stats[nz] = coef[nz] / se[nz]
    t_stats[~nz] = np.sign(coef[~nz]) * np.inf
    t_stats[~nz & (coef == 0.0)] = 0.0
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss > 0.0:
        adj_r2 = 1.0 - (rss / dof) / (tss / (T - 1))
    else:
        adj_r2 = 0.0
    return OlsFit(coef=coef, t_stats=t_stats, p_values=p_values, adj_r2=adj_r2, residuals=residuals)


def _pearson_columns(y, X):
    """Correlation of y with every column of X; 0 (with a warning) for
    zero-variance columns."""
    yc = y - y.mean()
    Xc = X - X.mean(axis=0)
    sy = float(yc @ yc)
    sx = np.einsum("ij,ij->j", Xc, Xc)
    dead = sx <= 0.0
    if sy <= 0.0:
        warnings.warn("target series has zero variance", RuntimeWarning, stacklevel=3)
        return np.zeros(X.shape[1])
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} zero-variance column(s); correlation reported as 0",
            RuntimeWarning,
            stacklevel=3,
        )
    denom = np.sqrt(sy * np.where(dead, 1.0, sx))
    corr = (yc @ Xc) / denom
    corr[dead] = 0.0
    return corr


def lagged_correlation(target, columns, lag: int = 1) -> np.ndarray:
    """Correlation of target_t with each column at t-lag over the overlap."""
    target = np.asarray(target, dtype=float)
    X = columns.returns if isinstance(columns, ReturnPanel) else np.asarray(columns, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if lag < 1:
        raise ValueError("lag must be a positive integer")
    if target.size != X.shape[0]:
        raise ValueError("target and columns must share the time index")
    if lag >= target.size:
        raise ValueError("lag must be smaller than the sample length")
    return _pearson_columns(target[lag:], X[: target.size - lag])


def pca_weights(X) -> np.ndarray:
    """Squared loadings of the first principal component of the correlation
    matrix of X's columns; nonnegative, sum to 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] < 1:
        raise ValueError("need at least one column")
    std = X.std(axis=0)
    if np.any(std <= 0.0):
        raise DomainError("zero-variance column in PCA input")
    if X.shape[1] == 1:
        return np.array([1.0])
    corr = np.corrcoef(X, rowvar=False)
    eigvals, eigvecs = np.linalg.eigh(corr)
    loading = eigvecs[:, np.argmax(eigvals)]
    w = loading**2
    return w / w.sum()


def select_influential(panel: ReturnPanel, target: int, alpha: float = 0.10, lag: int = 1):
    """Run the recursive selection for one target column of the panel.

    Returns (SpilloverWeights, SelectionTrace). Deterministic: ties in the
    absolute correlation break toward the lowest column index.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if panel.n_assets < 2:
        raise ValueError("panel needs at least two assets")
    if not 0 <= target < panel.n_assets:
        raise ValueError(f"target {target} outside panel columns")

    trace = SelectionTrace(target=target, alpha=alpha)
    others = [j for j in range(panel.n_assets) if j != target]
    y = panel.returns[lag:, target]
    lagged = panel.returns[: panel.n_obs - lag]

    corr = lagged_correlation(panel.returns[:, target], panel.returns[:, others], lag)
    pick = int(np.argmax(np.abs(corr)))
    first = others[pick]
    fit = ols_step(y, lagged[:, [first]])
    p_first = float(fit.p_values[1])
    if not p_first < alpha:
        trace.steps.append(
            SelectionStep(first, float(corr[pick]), p_first, float(fit.adj_r2), False)
        )
        return SpilloverWeights(target, (), np.array([])), trace

    selected = [first]
    remaining = [j for j in others if j != first]
    trace.steps.append(
        SelectionStep(first, float(corr[pick]), p_first, float(fit.adj_r2), True)
    )
    best_adj_r2 = float(fit.adj_r2)
    residuals = fit.residuals

    while remaining:
        Z = lagged[:, selected]
        V = lagged[:, remaining]
        proj = ols_step_residual_matrix(V, Z)
        partial = _pearson_columns(residuals, proj)
        pick = int(np.argmax(np.abs(partial)))
        candidate = remaining[pick]
        fit = ols_step(y, lagged[:, selected + [candidate]])
        adj_r2 = float(fit.adj_r2)
        p_new = float(fit.p_values[-1])
        accepted = adj_r2 > best_adj_r2 + ADJ_R2_TOL and p_new < alpha
        trace.steps.append(
            SelectionStep(candidate, float(partial[pick]), p_new, adj_r2, accepted)
        )
        if not accepted:
            break
        selected.append(candidate)
        remaining.remove(candidate)
        best_adj_r2 = adj_r2
        residuals = fit.residuals

    weights = pca_weights(panel.returns[:, selected])
    return SpilloverWeights(target, tuple(selected), weights), trace


def ols_step_residual_matrix(V, Z) -> np.ndarray:
    """Residuals of each column of V regressed on [1, Z], in one solve."""
    V = np.asarray(V, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    X = np.column_stack([np.ones(Z.shape[0]), Z])
    coef, _, _, _ = np.linalg.lstsq(X, V, rcond=None)
    return V - X @ coef
