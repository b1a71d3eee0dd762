"""Command-line orchestration.

Subcommands: select, quantilogram, estimate, backtest, forecast, mcs, and
pipeline (select -> estimate -> backtest -> forecast -> mcs). Configuration
comes from an optional JSON file plus flag overrides; every stage writes
its artifacts and a manifest into the output directory. All randomness
derives from one master seed.

Exit codes: 0 success, 2 validation error, 3 estimation failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import report
from .backtest import backtest_path
from .data import ReturnPanel, load_panel
from .errors import (
    EmptyPanelError,
    EstimationError,
    PanelFormatError,
    SpillvarError,
    ValidationError,
)
from .estimation import OptimizerConfig, derive_seed, fit_universe
from .forecast import RollingConfig, rolling_forecast
from .mcs import mcs_range
from .models import MODES, VARIANTS, ModelSpec, spillover_share
from .quantilogram import quantilogram_matrix
from .selection import select_influential

STAGES = ("select", "estimate", "backtest", "forecast", "mcs")


@dataclass
class RunConfig:
    data: str = ""
    data_format: str = "returns"
    out: str = "out"
    tau: float = 0.05
    alpha: float = 0.10
    variants: list[str] = field(default_factory=lambda: ["SAV"])
    modes: list[str] = field(default_factory=lambda: ["se"])
    component_lag: str = "own"
    lag: int = 1
    seed: int = 0
    n_random_starts: int = 10_000
    n_best_refined: int = 10
    window: int = 3974
    step: int = 1
    refit_every: int | None = 1
    bootstrap_reps: int = 1000
    block_length: int = 10
    mcs_level: float = 0.25
    dq_lags: int = 4
    workers: int = 1
    figures: bool = True

    def validate(self) -> None:
        problems = []
        if not self.data:
            problems.append("data path is required")
        elif not Path(self.data).exists():
            problems.append(f"data file not found: {self.data}")
        if self.data_format not in ("returns", "prices"):
            problems.append(f"data_format must be 'returns' or 'prices', got {self.data_format!r}")
        if not 0.0 < self.tau < 1.0:
            problems.append(f"tau must be in (0,1), got {self.tau}")
        if not 0.0 < self.alpha < 1.0:
            problems.append(f"alpha must be in (0,1), got {self.alpha}")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            problems.append(f"variants must be a nonempty subset of {VARIANTS}, got {self.variants}")
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes:
            problems.append(f"modes must be a nonempty subset of {MODES}, got {self.modes}")
        if self.component_lag not in ("own", "total"):
            problems.append(f"component_lag must be 'own' or 'total', got {self.component_lag!r}")
        for name in ("lag", "n_random_starts", "n_best_refined", "window", "step",
                     "bootstrap_reps", "block_length", "dq_lags", "workers"):
            if int(getattr(self, name)) < (0 if name == "dq_lags" else 1):
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if self.refit_every is not None and self.refit_every < 1:
            problems.append(f"refit_every must be >= 1 or null, got {self.refit_every}")
        if not 0.0 < self.mcs_level < 1.0:
            problems.append(f"mcs_level must be in (0,1), got {self.mcs_level}")
        if self.n_best_refined > self.n_random_starts:
            problems.append("n_best_refined cannot exceed n_random_starts")
        if problems:
            raise ValidationError("; ".join(problems))

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            n_random_starts=self.n_random_starts,
            n_best_refined=self.n_best_refined,
            seed=self.seed,
        )

    def rolling_config(self) -> RollingConfig:
        return RollingConfig(window=self.window, step=self.step, refit_every=self.refit_every)

    def model_specs(self) -> list[ModelSpec]:
        return [
            ModelSpec(variant=v, mode=m, tau=self.tau, component_lag=self.component_lag)
            for v in self.variants
            for m in self.modes
        ]

    def knobs(self) -> dict:
        return {
            "component_lag": self.component_lag,
            "selection_gate": "per-insertion coefficient p-value < alpha and adjusted-R2 improvement",
            "selection_lag": self.lag,
            "pca_basis": "correlation matrix of selected assets, contemporaneous returns",
            "var_init": "empirical tau-quantile of first min(300, T) returns",
            "proxy_basis": "stage-1 in-sample VaR, same variant",
            "dq_lags": self.dq_lags,
            "mcs_block_length": self.block_length,
            "mcs_bootstrap_reps": self.bootstrap_reps,
            "mcs_statistic": "range",
            "seed_derivation": "SeedSequence([master, stage, unit])",
        }


def _model_tag(spec: ModelSpec) -> str:
    return f"{spec.variant}_{spec.mode}"


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-." else "_" for c in name)


class Stage:
    """Timing + manifest bookkeeping shared by all subcommands."""

    def __init__(self, name: str, cfg: RunConfig, out: Path):
        self.name = name
        self.cfg = cfg
        self.out = out
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def mark(self, label: str) -> None:
        now = time.perf_counter()
        self.timings[label] = round(now - self._t0, 6)
        self._t0 = now

    def finish(self) -> None:
        report.write_manifest(
            self.out / f"{self.name}_manifest.json",
            self.name,
            asdict(self.cfg),
            self.timings,
            report.file_digest(self.cfg.data),
            self.cfg.knobs(),
        )


def _load_panel(cfg: RunConfig) -> ReturnPanel:
    return load_panel(cfg.data, mode=cfg.data_format)


def _weights_path(out: Path) -> Path:
    return out / "select_weights.csv"


def _compute_weights(cfg: RunConfig, panel: ReturnPanel):
    weights, traces = {}, {}
    for i in range(panel.n_assets):
        weights[i], traces[i] = select_influential(panel, i, alpha=cfg.alpha, lag=cfg.lag)
    return weights, traces


def _get_weights(cfg: RunConfig, panel: ReturnPanel, out: Path):
    """Shared intermediate: reuse the select stage's file when present."""
    path = _weights_path(out)
    if path.exists():
        return report.read_weights_csv(path, panel.tickers)
    weights, _ = _compute_weights(cfg, panel)
    return weights


def stage_select(cfg: RunConfig, panel: ReturnPanel, out: Path) -> None:
    stage = Stage("select", cfg, out)
    weights, traces = _compute_weights(cfg, panel)
    stage.mark("selection")
    report.write_weights_csv(_weights_path(out), panel.tickers, weights)
    for i, trace in traces.items():
        payload = trace.to_dict()
        payload["target_ticker"] = panel.tickers[i]
        payload["sources"] = [panel.tickers[j] for j in weights[i].sources]
        payload["weights"] = [float(w) for w in weights[i].weights]
        report.write_json(out / f"{_safe(panel.tickers[i])}_selection_trace.json", payload)
    stage.mark("write")
    stage.finish()


def stage_quantilogram(cfg: RunConfig, panel: ReturnPanel, out: Path) -> None:
    stage = Stage("quantilogram", cfg, out)
    matrix = quantilogram_matrix(panel, cfg.tau, cfg.lag)
    stage.mark("compute")
    report.write_matrix_csv(out / "quantilogram.csv", matrix, panel.tickers)
    if cfg.figures:
        report.render_heatmap(
            matrix, panel.tickers, out / "quantilogram_heatmap.png",
            title=f"Cross-quantilogram, tau={cfg.tau}, lag {cfg.lag}",
        )
    stage.mark("write")
    stage.finish()


def stage_estimate(cfg: RunConfig, panel: ReturnPanel, out: Path) -> None:
    stage = Stage("estimate", cfg, out)
    weights = _get_weights(cfg, panel, out)
    stage.mark("weights")
    component_rows = []
    qs_by_target: dict[int, dict[str, np.ndarray]] = {}
    for spec in cfg.model_specs():
        opt = cfg.optimizer_config()
        universe = fit_universe(panel, spec, weights, opt, workers=cfg.workers)
        if universe.failures:
            print(f"estimation failures ({spec.model_id}): {universe.failures}", file=sys.stderr)
        for i, fit in universe.fits.items():
            ticker = panel.tickers[i]
            base = f"{_safe(ticker)}_{_model_tag(spec)}"
            report.write_json(out / f"{base}_fit.json", report.fit_payload(fit, ticker))
            report.write_quantile_path_csv(out / f"{base}_path.csv", panel.dates, fit.path)
            if fit.spec.mode == "se":
                share = spillover_share(fit.path)
                for t in range(panel.n_obs):
                    component_rows.append(
                        (str(panel.dates[t]), ticker, fit.spec.model_id,
                         fit.path.var[t], fit.path.qs[t], share[t])
                    )
                qs_by_target.setdefault(i, {})[fit.spec.model_id] = fit.path.qs
        stage.mark(f"fit_{_model_tag(spec)}")
    if component_rows:
        report.write_component_paths_csv(out / "component_paths.csv", component_rows)
    if cfg.figures:
        for i, components in qs_by_target.items():
            ticker = panel.tickers[i]
            report.render_component_paths(
                panel.dates, panel.returns[:, i], components,
                out / f"{_safe(ticker)}_components.png",
                title=f"{ticker}: spillover component",
            )
    stage.mark("write")
    stage.finish()


def _read_path_csv(path: Path):
    import csv as _csv

    dates, var = [], []
    with open(path, newline="") as fh:
        for row in _csv.DictReader(fh):
            dates.append(row["date"])
            var.append(float(row["var"]))
    return dates, np.array(var)


def stage_backtest(cfg: RunConfig, panel: ReturnPanel, out: Path) -> None:
    stage = Stage("backtest", cfg, out)
    rows = []
    for spec in cfg.model_specs():
        for i, ticker in enumerate(panel.tickers):
            path_file = out / f"{_safe(ticker)}_{_model_tag(spec)}_path.csv"
            if not path_file.exists():
                raise FileNotFoundError(
                    f"missing {path_file}; run the estimate stage first"
                )
            _, var = _read_path_csv(path_file)
            if var.size != panel.n_obs:
                raise ValidationError(
                    f"{path_file} has {var.size} rows but the panel has {panel.n_obs}"
                )
            rep = backtest_path(panel.returns[:, i], var, cfg.tau, dq_lags=cfg.dq_lags)
            rows.append(
                (ticker, spec.model_id, rep.n_obs, rep.violation_rate,
                 rep.uc_lr, rep.uc_p, rep.cc_lr, rep.cc_p,
                 rep.dq_stat, rep.dq_p, rep.dq_lags, int(rep.dq_degenerate))
            )
    stage.mark("tests")
    report.write_backtest_csv(out / "backtest.csv", rows)
    stage.mark("write")
    stage.finish()


def stage_forecast(cfg: RunConfig, panel: ReturnPanel, out: Path) -> None:
    stage = Stage("forecast", cfg, out)
    weights = _get_weights(cfg, panel, out)
    stage.mark("weights")
    for spec in cfg.model_specs():
        opt = cfg.optimizer_config()
        rolling = cfg.rolling_config()
        per_target = rolling_forecast(panel, spec, weights, rolling, opt, workers=cfg.workers)
        for i, records in per_target.items():
            if not records:
                continue
            ticker = panel.tickers[i]
            base = f"{_safe(ticker)}_{_model_tag(spec)}"
            report.write_forecast_csv(out / f"{base}_forecast.csv", records)
            if cfg.figures:
                report.render_forecast_paths(
                    records, out / f"{base}_forecast.png",
                    title=f"{ticker} {spec.model_id}: one-step-ahead VaR/ES",
                )
        stage.mark(f"roll_{_model_tag(spec)}")
    stage.finish()


def stage_mcs(cfg: RunConfig, panel: ReturnPanel, out: Path) -> None:
    stage = Stage("mcs", cfg, out)
    specs = cfg.model_specs()
    if len(specs) < 2:
        raise ValidationError("mcs needs at least two models; widen variants/modes")
    labels = [spec.model_id for spec in specs]
    results = {}
    for i, ticker in enumerate(panel.tickers):
        columns = []
        dates_ref = None
        for spec in specs:
            path = out / f"{_safe(ticker)}_{_model_tag(spec)}_forecast.csv"
            if not path.exists():
                raise FileNotFoundError(f"missing {path}; run the forecast stage first")
            dates, losses = report.read_forecast_losses(path)
            if dates_ref is None:
                dates_ref = dates
            elif dates != dates_ref:
                raise ValidationError(f"forecast dates differ across models for {ticker}")
            columns.append(losses)
        results[ticker] = mcs_range(
            np.column_stack(columns),
            labels=labels,
            bootstrap_reps=cfg.bootstrap_reps,
            block_length=cfg.block_length,
            seed=derive_seed(cfg.seed, 7, i),
            level=cfg.mcs_level,
        )
    stage.mark("mcs")
    report.write_mcs_csv(out / "mcs.csv", panel.tickers, labels, results)
    stage.mark("write")
    stage.finish()


def stage_pipeline(cfg: RunConfig, panel: ReturnPanel, out: Path) -> None:
    for name in STAGES:
        runner = globals()[f"stage_{name}"]
        try:
            runner(cfg, panel, out)
        except Exception as exc:
            raise PipelineFailure(name, exc) from exc


class PipelineFailure(SpillvarError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline failed at stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spillvar",
        description="Tail-risk spillover modeling: selection, estimation, backtests, forecasts, MCS.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("select", "quantilogram", "estimate", "backtest", "forecast", "mcs", "pipeline"):
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--data", help="input CSV: date column plus one column per ticker")
        p.add_argument("--format", dest="data_format", choices=["returns", "prices"],
                       help="interpret table values as returns or prices")
        p.add_argument("--out", help="output directory (created if missing)")
        p.add_argument("--tau", type=float, help="quantile level (default 0.05)")
        p.add_argument("--alpha", type=float, help="selection significance level (default 0.10)")
        p.add_argument("--variants", help="comma list from SAV,AS,IG")
        p.add_argument("--modes", help="comma list from baseline,se,x")
        p.add_argument("--component-lag", dest="component_lag", choices=["own", "total"])
        p.add_argument("--lag", type=int, help="selection/quantilogram lag (default 1)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--starts", dest="n_random_starts", type=int,
                       help="random starts per fit (default 10000)")
        p.add_argument("--refine", dest="n_best_refined", type=int,
                       help="starts refined by simplex (default 10)")
        p.add_argument("--window", type=int, help="rolling window length (default 3974)")
        p.add_argument("--step", type=int, help="rolling step (default 1)")
        p.add_argument("--refit-every", dest="refit_every", type=int,
                       help="re-estimate every k positions; 0 = fit once")
        p.add_argument("--bootstrap-reps", dest="bootstrap_reps", type=int,
                       help="MCS bootstrap replications (default 1000)")
        p.add_argument("--block-length", dest="block_length", type=int,
                       help="MCS bootstrap block length (default 10)")
        p.add_argument("--mcs-level", dest="mcs_level", type=float,
                       help="MCS survivor level (default 0.25)")
        p.add_argument("--dq-lags", dest="dq_lags", type=int, help="DQ test lags (default 4)")
        p.add_argument("--workers", type=int, help="parallel workers (default 1)")
        p.add_argument("--no-figures", dest="figures", action="store_false", default=None,
                       help="skip PNG rendering")
    return parser


def _version() -> str:
    from . import __version__

    return __version__


def load_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ValidationError(f"config file not found: {args.config}")
        try:
            values.update(json.loads(cfg_path.read_text()))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for name in known:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    for key in ("variants", "modes"):
        if isinstance(values.get(key), str):
            values[key] = [v.strip() for v in values[key].split(",") if v.strip()]
    if values.get("refit_every") == 0:
        values["refit_every"] = None
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _error_report(stage: str, exc: Exception) -> None:
    print(
        json.dumps({"error": type(exc).__name__, "message": str(exc), "stage": stage}),
        file=sys.stderr,
    )


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (ValidationError, ValueError)):
        return 2
    if isinstance(exc, EstimationError):
        return 3
    if isinstance(exc, (OSError, PanelFormatError, EmptyPanelError)):
        return 4
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg = load_config(args)
    except Exception as exc:
        _error_report("config", exc)
        return 2
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        panel = _load_panel(cfg)
        if command == "pipeline":
            stage_pipeline(cfg, panel, out)
        else:
            globals()[f"stage_{command}"](cfg, panel, out)
    except PipelineFailure as exc:
        _error_report(exc.stage, exc.cause)
        return _exit_code(exc.cause)
    except Exception as exc:
        _error_report(command, exc)
        code = _exit_code(exc)
        if code == 1:
            raise
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
