"""Rolling-window one-step-ahead VaR/ES forecasting.

At each window position the full universe (all baselines, then the
spillover models) is re-estimated per the re-estimation frequency; between
refits the recursion state rolls forward on realized returns with frozen
parameters. The forecast for date t+1 is a deterministic function of data
through date t: the spillover proxy entering a forecast is built from the
source assets' filtered VaR at the forecast origin, which is in the
information set. When a re-estimation fails for an asset, its parameters
(not its forecast) are carried from the previous fit and the records are
flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import ReturnPanel
from .errors import EstimationError
from .estimation import FitResult, OptimizerConfig, derive_seed, fit_universe, fz0_loss
from .models import (
    ModelSpec,
    as_theta,
    es_from_var,
    filter_path,
    forecast_step,
    nested_baseline,
)


@dataclass(frozen=True)
class RollingConfig:
    """Fixed-length window sliding by ``step``; refit every ``refit_every``
    positions (None = fit once at the first window)."""

    window: int = 3974
    step: int = 1
    refit_every: int | None = 1
    horizon: int = 1

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.refit_every is not None and self.refit_every < 1:
            raise ValueError("refit_every must be >= 1 or None")
        if self.horizon != 1:
            raise ValueError("only one-step-ahead forecasting is supported")


@dataclass(frozen=True)
class ForecastRecord:
    date: object  # numpy datetime64[D]
    target: int
    model_id: str
    var_forecast: float
    es_forecast: float
    realized: float
    fz0: float
    hit: bool
    refit: bool  # parameters re-estimated at this position
    carried: bool  # estimation failed; parameters carried from a previous fit


class _UniverseState:
    """Frozen parameters plus the rolling recursion state of every asset.

    States are (re)built by filtering the estimation window with the given
    parameters, so carried parameters still face fresh returns.
    """

    def __init__(self, spec, stage1_params, fits, carried, window_panel, filtered_through):
        self.spec = spec
        self.base_spec = nested_baseline(spec)
        self.stage1_params = stage1_params
        self.fits: dict[int, FitResult] = fits
        self.carried = carried
        t = window_panel.n_obs
        var_matrix = np.full((t, window_panel.n_assets), np.nan)
        self.base_var: dict[int, float] = {}
        for i, params in stage1_params.items():
            path = filter_path(self.base_spec, params, window_panel.returns[:, i])
            var_matrix[:, i] = path.var
            self.base_var[i] = float(path.var[-1])
        self.state: dict[int, tuple[float, float, float]] = {}
        for i, fit in fits.items():
            if fit.spec.mode == "baseline":
                v = self.base_var[i]
                self.state[i] = (v, v, 0.0)
                continue
            sources = fit.metadata.get("proxy_sources", [])
            if sources:
                w = np.asarray(fit.metadata["proxy_weights"], dtype=float)
                proxy = var_matrix[:, sources] @ w
            else:
                proxy = np.zeros(t)
            path = filter_path(fit.spec, fit.params, window_panel.returns[:, i], proxy)
            self.state[i] = (float(path.var[-1]), float(path.qp[-1]), float(path.qs[-1]))
        self.filtered_through = filtered_through

    def _proxy_now(self, target: int) -> float:
        meta = self.fits[target].metadata
        sources = meta.get("proxy_sources", [])
        if not sources:
            return 0.0
        weights = meta.get("proxy_weights", [])
        return float(sum(w * self.base_var[j] for j, w in zip(sources, weights)))

    def advance(self, returns_row) -> None:
        """Roll every recursion one step using the last filtered index."""
        new_base = {}
        for i, params in self.stage1_params.items():
            v = self.base_var[i]
            new_base[i], _, _ = forecast_step(
                self.base_spec, params, (v, v, 0.0), float(returns_row[i])
            )
        new_state = {}
        for i, fit in self.fits.items():
            s_now = self._proxy_now(i) if fit.spec.mode != "baseline" else 0.0
            new_state[i] = forecast_step(
                fit.spec, fit.theta, self.state[i], float(returns_row[i]), s_now
            )
        self.base_var = new_base
        self.state = new_state
        self.filtered_through += 1


def rolling_forecast(
    panel: ReturnPanel,
    spec: ModelSpec,
    weights_by_target,
    rolling: RollingConfig | None = None,
    opt: OptimizerConfig | None = None,
    workers: int = 1,
) -> dict[int, list[ForecastRecord]]:
    """Produce floor((T - window)/step) one-step-ahead records per asset."""
    rolling = rolling or RollingConfig()
    opt = opt or OptimizerConfig()
    t_total = panel.n_obs
    n_fc = (t_total - rolling.window) // rolling.step
    if n_fc < 1:
        raise ValueError(
            f"panel of {t_total} rows leaves no forecasts after a window of {rolling.window}"
        )

    records: dict[int, list[ForecastRecord]] = {i: [] for i in range(panel.n_assets)}
    state: _UniverseState | None = None

    for pos in range(n_fc):
        start = pos * rolling.step
        target_idx = start + rolling.window
        due = state is None or (
            rolling.refit_every is not None and pos % rolling.refit_every == 0
        )
        refit = False
        if due:
            window_panel = _slice_panel(panel, start, start + rolling.window)
            cfg = replace(opt, seed=derive_seed(opt.seed, 101, pos))
            warm1 = (
                {i: as_theta(nested_baseline(spec), p) for i, p in state.stage1_params.items()}
                if state
                else None
            )
            warm2 = (
                {i: f.theta for i, f in state.fits.items() if f.spec.mode != "baseline"}
                if state
                else None
            )
            universe = fit_universe(
                window_panel, spec, weights_by_target, cfg,
                workers=workers, warm_stage1=warm1, warm_stage2=warm2,
            )
            stage1_params: dict[int, dict] = {}
            fits: dict[int, FitResult] = {}
            carried: set[int] = set()
            for i in range(panel.n_assets):
                if i in universe.stage1:
                    stage1_params[i] = universe.stage1[i].params
                elif state is not None and i in state.stage1_params:
                    stage1_params[i] = state.stage1_params[i]
                    carried.add(i)
                if i in universe.fits and i not in universe.failures:
                    fits[i] = universe.fits[i]
                elif state is not None and i in state.fits:
                    fits[i] = state.fits[i]
                    carried.add(i)
                elif i in universe.fits:
                    fits[i] = universe.fits[i]  # first window: degraded fit beats none
            if not fits:
                raise EstimationError(f"no asset could be fit: {universe.failures}")
            state = _UniverseState(
                spec, stage1_params, fits, carried, window_panel, target_idx - 1
            )
            refit = True

        # roll the frozen-parameter recursions through the forecast origin;
        # the post-advance state IS the one-step-ahead forecast
        while state.filtered_through < target_idx:
            state.advance(panel.returns[state.filtered_through])

        realized_row = panel.returns[target_idx]
        for i, fit in state.fits.items():
            var_f, _, _ = state.state[i]
            es_f = float(es_from_var(fit.params["gamma"], var_f))
            realized = float(realized_row[i])
            records[i].append(
                ForecastRecord(
                    date=panel.dates[target_idx],
                    target=i,
                    model_id=fit.spec.model_id,
                    var_forecast=var_f,
                    es_forecast=es_f,
                    realized=realized,
                    fz0=float(fz0_loss(var_f, es_f, realized, spec.tau)),
                    hit=realized <= var_f,
                    refit=refit,
                    carried=i in state.carried,
                )
            )
    return records


def _slice_panel(panel: ReturnPanel, start: int, stop: int) -> ReturnPanel:
    return ReturnPanel(
        dates=panel.dates[start:stop],
        tickers=panel.tickers,
        returns=panel.returns[start:stop],
    )
