"""Joint VaR/ES estimation by multi-start Nelder-Mead on the FZ0 loss.

The criterion is the strictly consistent joint VaR/ES scoring rule in its
zero-degree-homogeneous (asymmetric-Laplace likelihood) normalization,

    -1{r_t <= var_t} * (var_t - r_t) / (tau * es_t)
    + var_t / es_t + log(-es_t) - 1,

whose expectation is minimized exactly at the true quantile/expected-
shortfall pair. ``al_fz_loss`` sums it over the estimation sample;
``fz0_loss`` returns it per observation for out-of-sample scoring. The
loss is non-smooth in the parameters through the indicator, so the search
is derivative-free: uniform draws over constraint-respecting boxes, then
simplex refinement of the best candidates. Constraint violations and
infeasible filtered paths score +inf and can never be returned.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .errors import DomainError, EstimationError
from .models import (
    ModelSpec,
    QuantilePath,
    _MODE_CODE,
    _VARIANT_CODE,
    _recursion,
    _unpack,
    as_theta,
    build_proxy,
    default_var_init,
    es_from_var,
    filter_path,
    nested_baseline,
    param_names,
    params_feasible,
)

MIN_SAMPLE_RECOMMENDED = 500


@dataclass(frozen=True)
class OptimizerConfig:
    """Multi-start search settings. Defaults follow desk-scale practice:
    10^4 uniform draws, simplex refinement of the 10 best."""

    n_random_starts: int = 10_000
    n_best_refined: int = 10
    simplex_xtol: float = 1e-6
    simplex_ftol: float = 1e-9
    max_iterations: int = 5000
    penalty_scheme: str = "hard"
    seed: int = 0

    def __post_init__(self):
        if self.n_random_starts < 1:
            raise ValueError("n_random_starts must be >= 1")
        if not 1 <= self.n_best_refined <= self.n_random_starts:
            raise ValueError("need 1 <= n_best_refined <= n_random_starts")
        if self.simplex_xtol <= 0 or self.simplex_ftol <= 0:
            raise ValueError("simplex tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.penalty_scheme != "hard":
            raise ValueError("only the 'hard' (+inf rejection) penalty scheme is implemented")


@dataclass(frozen=True)
class FitResult:
    """One estimated model: parameters, in-sample loss and filtered path."""

    spec: ModelSpec
    params: dict[str, float]
    loss: float
    path: QuantilePath
    starts_tried: int
    converged: bool
    metadata: dict = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        return as_theta(self.spec, self.params)


@njit(cache=True)
def _al_fz_sum(var, es, r, tau):
    total = 0.0
    for t in range(r.shape[0]):
        hit = 1.0 if r[t] <= var[t] else 0.0
        total += -hit * (var[t] - r[t]) / (tau * es[t]) + var[t] / es[t] + math.log(-es[t]) - 1.0
    return total


def al_fz_loss(var, es, r, tau: float) -> float:
    """In-sample joint loss summed over the sample; +inf if any es_t >= 0."""
    var = np.ascontiguousarray(var, dtype=float)
    es = np.ascontiguousarray(es, dtype=float)
    r = np.ascontiguousarray(r, dtype=float)
    if not var.shape == es.shape == r.shape:
        raise ValueError("var, es and r must have equal length")
    if not np.all(es < 0.0):
        return math.inf
    return float(_al_fz_sum(var, es, r, tau))


def fz0_loss(var, es, r, tau: float):
    """Per-observation out-of-sample score; es must be strictly negative."""
    var = np.asarray(var, dtype=float)
    es = np.asarray(es, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(es >= 0.0):
        raise DomainError("fz0_loss requires es < 0")
    hit = (r <= var).astype(float)
    return -hit * (var - r) / (tau * es) + var / es + np.log(-es) - 1.0


def derive_seed(master: int, *key: int) -> int:
    """Deterministic child seed for a named subtask of a master-seeded run."""
    ss = np.random.SeedSequence([int(master), *(int(k) for k in key)])
    return int(ss.generate_state(1, np.uint64)[0])


def _start_boxes(spec: ModelSpec):
    ig = spec.variant == "IG"
    lo, hi = [], []

    def box(a, b):
        lo.append(a)
        hi.append(b)

    box(0.0 if ig else -1.0, 1.0)  # omega
    box(0.5, 0.999)  # beta1
    box(0.0 if ig else -1.0, 1.0)  # beta2
    if spec.variant == "AS":
        box(-1.0, 1.0)  # beta3
    box(-2.0, 0.0)  # gamma
    if spec.mode == "se":
        box(0.0, 0.5)  # phi1
        box(0.0, 1.5)  # phi2
    elif spec.mode == "x":
        box(0.0 if ig else -1.5, 1.5)  # beta_s
    return np.array(lo), np.array(hi)


def _draw_starts(spec, config, rng, fixed_idx, fixed_vals):
    lo, hi = _start_boxes(spec)
    k = lo.size
    want = config.n_random_starts
    starts: list[np.ndarray] = []
    attempts = 0
    cap = 100 * want + 1000
    while len(starts) < want and attempts < cap:
        batch = rng.uniform(lo, hi, size=(min(max(want, 64), cap - attempts), k))
        attempts += batch.shape[0]
        if fixed_idx.size:
            batch[:, fixed_idx] = fixed_vals
        for row in batch:
            if params_feasible(spec, row):
                starts.append(row.copy())
                if len(starts) == want:
                    break
    return starts


def _make_objective(spec, r, s, var0, fixed_idx, fixed_vals):
    vc = _VARIANT_CODE[spec.variant]
    mc = _MODE_CODE[spec.mode]
    lag_own = spec.component_lag == "own"
    tau = spec.tau
    k = len(param_names(spec))
    free_idx = np.setdiff1d(np.arange(k), fixed_idx)

    def objective(free):
        theta = np.empty(k)
        theta[free_idx] = free
        if fixed_idx.size:
            theta[fixed_idx] = fixed_vals
        if not params_feasible(spec, theta):
            return math.inf
        omega, b1, b2, b3, gamma, phi1, phi2, bs = _unpack(spec, theta)
        var, _qp, _qs, feasible = _recursion(
            vc, mc, lag_own, omega, b1, b2, b3, phi1, phi2, bs, r, s, var0, 0.0
        )
        if not feasible:
            return math.inf
        value = _al_fz_sum(var, es_from_var(gamma, var), r, tau)
        return value if math.isfinite(value) else math.inf

    return objective, free_idx


def estimate(
    spec: ModelSpec,
    r,
    proxy=None,
    config: OptimizerConfig | None = None,
    extra_starts=(),
    fixed_params: dict[str, float] | None = None,
    metadata: dict | None = None,
) -> FitResult:
    """Fit one model to one return series.

    ``extra_starts`` are appended to the random draws (used for warm
    starting); ``fixed_params`` pins named parameters during the search.
    Deterministic given (data, config.seed).
    """
    config = config or OptimizerConfig()
    r = np.ascontiguousarray(r, dtype=float)
    if r.size < MIN_SAMPLE_RECOMMENDED:
        warnings.warn(
            f"sample of {r.size} observations is below the recommended "
            f"{MIN_SAMPLE_RECOMMENDED}; estimates may be unstable",
            RuntimeWarning,
            stacklevel=2,
        )
    if spec.mode == "baseline":
        if proxy is not None:
            raise ValueError("baseline mode takes no spillover proxy")
        s = np.zeros(r.size)
    else:
        if proxy is None:
            raise ValueError(f"{spec.mode} mode requires a spillover proxy")
        s = np.ascontiguousarray(proxy, dtype=float)
        if s.shape != r.shape:
            raise ValueError("proxy and returns must have equal length")

    meta = dict(metadata or {})

    # A proxy that is identically zero leaves the spillover parameters
    # unidentified and the model collapses to its baseline; fit that instead
    # so the reported loss matches the baseline fit exactly.
    if spec.mode != "baseline" and fixed_params is None and not np.any(s):
        base = estimate(nested_baseline(spec), r, None, config)
        params = dict(base.params)
        for name in param_names(spec):
            params.setdefault(name, 0.0)
        path = filter_path(spec, params, r, proxy=s)
        meta.update(base.metadata, degenerate_proxy=True)
        return FitResult(
            spec=spec,
            params=params,
            loss=base.loss,
            path=path,
            starts_tried=base.starts_tried,
            converged=base.converged,
            metadata=meta,
        )

    names = param_names(spec)
    if fixed_params:
        unknown = set(fixed_params) - set(names)
        if unknown:
            raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
        fixed_idx = np.array([names.index(n) for n in fixed_params], dtype=int)
        fixed_vals = np.array([float(fixed_params[n]) for n in fixed_params])
    else:
        fixed_idx = np.array([], dtype=int)
        fixed_vals = np.array([])

    var0 = default_var_init(r, spec.tau)
    objective, free_idx = _make_objective(spec, r, s, var0, fixed_idx, fixed_vals)

    rng = np.random.default_rng(config.seed)
    starts = _draw_starts(spec, config, rng, fixed_idx, fixed_vals)
    for extra in extra_starts:
        theta = as_theta(spec, extra)
        if fixed_idx.size:
            theta[fixed_idx] = fixed_vals
        starts.append(theta)
    if not starts:
        raise EstimationError("no feasible start found")

    start_losses = np.array([objective(theta[free_idx]) for theta in starts])
    finite = np.flatnonzero(np.isfinite(start_losses))
    if finite.size == 0:
        raise EstimationError("no feasible start found")
    order = finite[np.argsort(start_losses[finite], kind="stable")]

    best_theta = starts[order[0]].copy()
    best_loss = float(start_losses[order[0]])
    best_success = False
    for idx in order[: min(config.n_best_refined, order.size)]:
        res = minimize(
            objective,
            starts[idx][free_idx],
            method="Nelder-Mead",
            options={
                "xatol": config.simplex_xtol,
                "fatol": config.simplex_ftol,
                "maxiter": config.max_iterations,
                "maxfev": 4 * config.max_iterations,
            },
        )
        if res.fun < best_loss:
            best_loss = float(res.fun)
            best_theta = np.empty(len(names))
            best_theta[free_idx] = res.x
            if fixed_idx.size:
                best_theta[fixed_idx] = fixed_vals
            best_success = bool(res.success)

    params = {n: float(v) for n, v in zip(names, best_theta)}
    path = filter_path(spec, params, r, proxy=s if spec.mode != "baseline" else None)
    loss = al_fz_loss(path.var, path.es, r, spec.tau)
    meta.setdefault("seed", config.seed)
    meta.setdefault("var_init", var0)
    return FitResult(
        spec=spec,
        params=params,
        loss=loss,
        path=path,
        starts_tried=len(starts),
        converged=best_success,
        metadata=meta,
    )


@dataclass
class UniverseFit:
    """Two-stage fit over a panel: baselines for every asset, then the
    spillover-mode model for each target with nonempty weights."""

    spec: ModelSpec
    fits: dict[int, FitResult]
    stage1: dict[int, FitResult]
    var_matrix: np.ndarray
    failures: dict[int, str]


def _stage1_task(args):
    spec, column, config, extras = args
    try:
        return True, estimate(spec, column, None, config, extra_starts=extras)
    except EstimationError as exc:
        return False, str(exc)


def fit_universe(
    panel,
    spec: ModelSpec,
    weights_by_target,
    config: OptimizerConfig | None = None,
    workers: int = 1,
    warm_stage1: dict[int, np.ndarray] | None = None,
    warm_stage2: dict[int, np.ndarray] | None = None,
) -> UniverseFit:
    """Stage 1: fit the baseline variant to every asset and collect the
    in-sample VaR matrix. Stage 2: for each target with nonempty weights,
    build its proxy from the stage-1 VaRs (same variant) and fit the se/x
    model. Targets with empty weights keep their baseline fit.

    Per-asset seeds derive from config.seed, so results are independent of
    worker scheduling.
    """
    config = config or OptimizerConfig()
    warm_stage1 = warm_stage1 or {}
    warm_stage2 = warm_stage2 or {}
    n = panel.n_assets
    base_spec = nested_baseline(spec)

    tasks = []
    for i in range(n):
        cfg = replace(config, seed=derive_seed(config.seed, 1, i))
        extras = [warm_stage1[i]] if i in warm_stage1 else []
        tasks.append((base_spec, panel.returns[:, i], cfg, extras))

    stage1: dict[int, FitResult] = {}
    failures: dict[int, str] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_stage1_task, tasks))
    else:
        outcomes = [_stage1_task(task) for task in tasks]
    for i, (ok, payload) in enumerate(outcomes):
        if ok:
            stage1[i] = payload
        else:
            failures[i] = f"stage1: {payload}"

    var_matrix = np.full((panel.n_obs, n), np.nan)
    for i, fit in stage1.items():
        var_matrix[:, i] = fit.path.var

    fits: dict[int, FitResult] = dict(stage1)
    if spec.mode == "baseline":
        return UniverseFit(spec, fits, stage1, var_matrix, failures)

    for target in range(n):
        if target in failures:
            continue
        weights = weights_by_target.get(target)
        if weights is None or not weights.sources:
            continue
        bad_sources = [j for j in weights.sources if j in failures]
        if bad_sources:
            failures[target] = f"stage2 skipped: source fits failed for {bad_sources}"
            continue
        proxy = build_proxy(var_matrix, weights)
        cfg = replace(config, seed=derive_seed(config.seed, 2, target))
        base_theta = stage1[target].theta
        pad = len(param_names(spec)) - base_theta.size
        extras = [np.concatenate([base_theta, np.zeros(pad)])]
        if target in warm_stage2:
            extras.append(warm_stage2[target])
        meta = {
            "proxy_variant": spec.variant,
            "proxy_sources": [int(j) for j in weights.sources],
            "proxy_weights": [float(w) for w in weights.weights],
            "proxy_basis": "stage1_insample_var",
        }
        try:
            fits[target] = estimate(
                spec,
                panel.returns[:, target],
                proxy,
                cfg,
                extra_starts=extras,
                metadata=meta,
            )
        except EstimationError as exc:
            failures[target] = f"stage2: {exc}"
    return UniverseFit(spec, fits, stage1, var_matrix, failures)
