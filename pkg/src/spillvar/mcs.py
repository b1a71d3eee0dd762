"""Model Confidence Set by sequential elimination with the range statistic.

Pairwise mean loss differentials are studentized with moving-block
bootstrap variances; the worst model is eliminated while equal predictive
ability is rejected, and each model's MCS p-value is the cumulative
maximum of the rejection p-values up to its elimination. One bootstrap
index set is drawn per run and reused across elimination rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEGENERATE_VAR = 1e-14


@dataclass(frozen=True)
class McsResult:
    labels: tuple[str, ...]
    p_values: np.ndarray  # aligned with labels
    elimination_order: tuple[str, ...]  # first eliminated -> last survivor
    survivors: tuple[str, ...]
    level: float

    def as_dict(self) -> dict[str, float]:
        return {lab: float(p) for lab, p in zip(self.labels, self.p_values)}


def moving_block_indices(rng: np.random.Generator, n_obs: int, block_length: int, reps: int) -> np.ndarray:
    """reps x n_obs index matrix of concatenated random blocks."""
    if not 1 <= block_length <= n_obs:
        raise ValueError("need 1 <= block_length <= n_obs")
    n_blocks = math.ceil(n_obs / block_length)
    starts = rng.integers(0, n_obs - block_length + 1, size=(reps, n_blocks))
    offsets = np.arange(block_length)
    idx = (starts[:, :, None] + offsets).reshape(reps, n_blocks * block_length)
    return idx[:, :n_obs]


def mcs_range(
    losses,
    labels=None,
    bootstrap_reps: int = 1000,
    block_length: int = 10,
    seed: int = 0,
    level: float = 0.25,
) -> McsResult:
    """Run the elimination over a P x M per-date loss matrix.

    Degenerate pairs (bootstrap variance below 1e-14) studentize to 0 when
    the mean gap is also negligible and to +/-inf otherwise, so identical
    columns all survive with p = 1 while a constant loss offset is
    eliminated with p ~ 0.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2 or losses.shape[1] < 2:
        raise ValueError("losses must be P x M with M >= 2")
    if not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite")
    p_obs, m = losses.shape
    if labels is None:
        labels = tuple(f"m{i}" for i in range(m))
    labels = tuple(labels)
    if len(labels) != m:
        raise ValueError("one label per loss column required")
    if bootstrap_reps < 500:
        raise ValueError("need at least 500 bootstrap replications")
    if not 1 <= block_length < p_obs:
        raise ValueError("need 1 <= block_length < P")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0,1)")

    mu = losses.mean(axis=0)
    dbar = mu[:, None] - mu[None, :]

    # All columns mutually identical: nothing to studentize, everyone stays.
    diffs = losses[:, :, None] - losses[:, None, :]
    if float(np.var(diffs, axis=0).max()) < DEGENERATE_VAR and float(np.abs(dbar).max()) < DEGENERATE_VAR:
        return McsResult(
            labels=labels,
            p_values=np.ones(m),
            elimination_order=labels,
            survivors=labels,
            level=level,
        )

    rng = np.random.default_rng(seed)
    idx = moving_block_indices(rng, p_obs, block_length, bootstrap_reps)
    boot_mu = losses[idx].mean(axis=1)  # B x M
    boot_d = boot_mu[:, :, None] - boot_mu[:, None, :] - dbar[None, :, :]
    variances = np.mean(boot_d**2, axis=0)

    scale = np.sqrt(np.where(variances < DEGENERATE_VAR, 1.0, variances))
    tmat = dbar / scale
    zboot = boot_d / scale
    degenerate = variances < DEGENERATE_VAR
    if degenerate.any():
        gap = np.abs(dbar) < DEGENERATE_VAR
        with np.errstate(invalid="ignore"):
            tmat = np.where(degenerate, np.where(gap, 0.0, np.sign(dbar) * np.inf), tmat)
        zboot = np.where(degenerate[None, :, :], 0.0, zboot)

    included = np.ones(m, dtype=bool)
    eliminated: list[tuple[int, float]] = []
    while included.sum() > 1:
        live = np.flatnonzero(included)
        sub = tmat[np.ix_(live, live)]
        t_range = sub.max()
        sim = zboot[:, live][:, :, live].max(axis=(1, 2))
        p_round = float(np.mean(sim >= t_range))
        worst_row = int(np.argmax(sub.max(axis=1)))
        worst = int(live[worst_row])
        eliminated.append((worst, p_round))
        included[worst] = False
    last = int(np.flatnonzero(included)[0])
    eliminated.append((last, 1.0))

    p_values = np.empty(m)
    running = 0.0
    order = []
    for model, p_round in eliminated:
        running = max(running, p_round)
        p_values[model] = running
        order.append(labels[model])
    survivors = tuple(lab for lab, p in zip(labels, p_values) if p >= level)
    return McsResult(
        labels=labels,
        p_values=p_values,
        elimination_order=tuple(order),
        survivors=survivors,
        level=level,
    )
