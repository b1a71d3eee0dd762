"""Conditional-quantile recursions and the VaR/ES link.

Three driving variants for the one-day tail quantile:

    SAV  var_t = omega + b1*var_{t-1} + b2*|r_{t-1}|
    AS   var_t = omega + b1*var_{t-1} + b2*max(r_{t-1},0) + b3*min(r_{t-1},0)
    IG   var_t = -sqrt(omega + b1*var_{t-1}^2 + b2*r_{t-1}^2)

each available in three modes:

    baseline  the recursion above
    se        two components, var_t = qp_t + qs_t, where qp follows the
              variant recursion (lagging its own value by default) and
              qs_t = phi1*qs_{t-1} + phi2*s_{t-1} is the spillover
              component driven by the cross-asset proxy s
    x         the baseline recursion plus one exogenous spillover term
              beta_s*s_{t-1} (inside the square root, as beta_s*s^2, for IG)

ES is tied to VaR through a positive scaling, es_t = (1 + exp(gamma))*var_t,
so es_t <= var_t < 0 whenever the path is feasible. Infeasible paths (a
nonnegative quantile, or a negative square-root argument) are flagged, not
raised, so derivative-free search can traverse bad parameter regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .quantilogram import empirical_quantile

VARIANTS = ("SAV", "AS", "IG")
MODES = ("baseline", "se", "x")

_VARIANT_CODE = {"SAV": 0, "AS": 1, "IG": 2}
_MODE_CODE = {"baseline": 0, "se": 1, "x": 2}

INIT_WINDOW = 300  # observations used for the starting quantile


@dataclass(frozen=True)
class ModelSpec:
    """Variant x mode x quantile level, plus the component-lag convention.

    ``component_lag`` selects what the proper-risk component lags in se
    mode: its own previous value ("own", the default) or the previous
    total quantile ("total"). ``signed_phi1`` widens the spillover
    autoregression to phi1 in (-1, 1) instead of [0, 1).
    """

    variant: str
    mode: str = "baseline"
    tau: float = 0.05
    component_lag: str = "own"
    signed_phi1: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0,1), got {self.tau}")
        if self.component_lag not in ("own", "total"):
            raise ValueError(f"component_lag must be 'own' or 'total', got {self.component_lag!r}")

    @property
    def model_id(self) -> str:
        suffix = {"baseline": "", "se": "-SE", "x": "-X"}[self.mode]
        return self.variant + suffix


def param_names(spec: ModelSpec) -> tuple[str, ...]:
    names = ["omega", "beta1", "beta2"]
    if spec.variant == "AS":
        names.append("beta3")
    names.append("gamma")
    if spec.mode == "se":
        names += ["phi1", "phi2"]
    elif spec.mode == "x":
        names.append("beta_s")
    return tuple(names)


def as_theta(spec: ModelSpec, params) -> np.ndarray:
    """Normalize a mapping or sequence of parameters to the canonical vector."""
    names = param_names(spec)
    if isinstance(params, dict):
        missing = set(names) - set(params)
        if missing:
            raise ValueError(f"missing parameters: {sorted(missing)}")
        theta = np.array([float(params[n]) for n in names])
    else:
        theta = np.asarray(params, dtype=float)
        if theta.shape != (len(names),):
            raise ValueError(f"expected {len(names)} parameters {names}, got shape {theta.shape}")
    return theta


def _unpack(spec: ModelSpec, theta: np.ndarray):
    """Return (omega, b1, b2, b3, gamma, phi1, phi2, beta_s) with unused slots 0."""
    if spec.variant == "AS":
        omega, b1, b2, b3, gamma = theta[:5]
        rest = theta[5:]
    else:
        omega, b1, b2, gamma = theta[:4]
        b3 = 0.0
        rest = theta[4:]
    phi1 = phi2 = bs = 0.0
    if spec.mode == "se":
        phi1, phi2 = rest
    elif spec.mode == "x":
        (bs,) = rest
    return float(omega), float(b1), float(b2), float(b3), float(gamma), float(phi1), float(phi2), float(bs)


def params_feasible(spec: ModelSpec, params) -> bool:
    """Check the identification constraints for this variant and mode."""
    theta = as_theta(spec, params)
    if not np.all(np.isfinite(theta)):
        return False
    omega, b1, b2, _b3, _gamma, phi1, _phi2, bs = _unpack(spec, theta)
    if not 0.0 < b1 < 1.0:
        return False
    if spec.variant == "IG" and (omega < 0.0 or b2 < 0.0):
        return False
    if spec.mode == "se":
        lo = -1.0 if spec.signed_phi1 else 0.0
        if not (lo <= phi1 < 1.0 and abs(phi1) < 1.0):
            return False
        if not b1 > phi1:
            return False
    if spec.mode == "x" and spec.variant == "IG" and bs < 0.0:
        return False
    return True


@dataclass(frozen=True)
class QuantilePath:
    """Filtered per-day quantities. qs is identically zero outside se mode."""

    var: np.ndarray
    es: np.ndarray
    qp: np.ndarray
    qs: np.ndarray
    feasible: bool


@njit(cache=True)
def _recursion(variant, mode, lag_own, omega, b1, b2, b3, phi1, phi2, bs, r, s, qp0, qs0):
    T = r.shape[0]
    var = np.empty(T)
    qp = np.empty(T)
    qs = np.empty(T)
    qp[0] = qp0
    qs[0] = qs0
    var[0] = qp0 + qs0
    feasible = var[0] < 0.0
    for t in range(1, T):
        rt = r[t - 1]
        if mode == 1:
            lagv = qp[t - 1] if lag_own else var[t - 1]
        else:
            lagv = var[t - 1]
        if variant == 2:
            arg = omega + b1 * lagv * lagv + b2 * rt * rt
            if mode == 2:
                arg += bs * s[t - 1] * s[t - 1]
            if arg >= 0.0:
                base = -math.sqrt(arg)
            else:
                base = np.nan
                feasible = False
        else:
            if variant == 0:
                drive = b2 * abs(rt)
            else:
                rp = rt if rt > 0.0 else 0.0
                rn = rt if rt < 0.0 else 0.0
                drive = b2 * rp + b3 * rn
            base = omega + b1 * lagv + drive
            if mode == 2:
                base += bs * s[t - 1]
        if mode == 1:
            qp[t] = base
            qs[t] = phi1 * qs[t - 1] + phi2 * s[t - 1]
            var[t] = qp[t] + qs[t]
        else:
            qp[t] = base
            qs[t] = 0.0
            var[t] = base
        if not var[t] < 0.0:
            feasible = False
    return var, qp, qs, feasible


def default_var_init(r, tau: float) -> float:
    """Starting quantile: empirical tau-quantile of the first observations."""
    r = np.asarray(r, dtype=float)
    return empirical_quantile(r[: min(INIT_WINDOW, r.size)], tau)


def filter_path(spec: ModelSpec, params, r, proxy=None, init=None) -> QuantilePath:
    """Run the quantile recursion over a return series.

    ``proxy`` (the cross-asset spillover series s_t) is required in se and
    x modes and ignored otherwise. ``init`` overrides the starting quantile.
    """
    r = np.ascontiguousarray(r, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise ValueError("r must be a nonempty 1-d series")
    theta = as_theta(spec, params)
    if spec.mode == "baseline":
        s = np.zeros(r.size)
    else:
        if proxy is None:
            raise ValueError(f"{spec.mode} mode requires a spillover proxy")
        s = np.ascontiguousarray(proxy, dtype=float)
        if s.shape != r.shape:
            raise ValueError(f"proxy length {s.size} != returns length {r.size}")
    var0 = float(init) if init is not None else default_var_init(r, spec.tau)
    omega, b1, b2, b3, gamma, phi1, phi2, bs = _unpack(spec, theta)
    var, qp, qs, feasible = _recursion(
        _VARIANT_CODE[spec.variant],
        _MODE_CODE[spec.mode],
        spec.component_lag == "own",
        omega, b1, b2, b3, phi1, phi2, bs,
        r, s, var0, 0.0,
    )
    es = es_from_var(gamma, var)
    return QuantilePath(var=var, es=es, qp=qp, qs=qs, feasible=bool(feasible))


def forecast_step(spec: ModelSpec, params, state, r_last: float, s_last: float = 0.0):
    """Advance the recursion one step from ``state`` = (var, qp, qs) at time T.

    Returns the (var, qp, qs) triple for T+1, computed from the time-T state,
    the time-T return and the time-T proxy value only.
    """
    theta = as_theta(spec, params)
    var_t, qp_t, qs_t = (float(v) for v in state)
    omega, b1, b2, b3, _gamma, phi1, phi2, bs = _unpack(spec, theta)
    r2 = np.array([r_last, 0.0])
    s2 = np.array([s_last, 0.0])
    if spec.mode != "se":
        qp_t, qs_t = var_t, 0.0
    var, qp, qs, _ = _recursion(
        _VARIANT_CODE[spec.variant],
        _MODE_CODE[spec.mode],
        spec.component_lag == "own",
        omega, b1, b2, b3, phi1, phi2, bs,
        r2, s2, qp_t, qs_t,
    )
    return float(var[1]), float(qp[1]), float(qs[1])


def es_from_var(gamma: float, var) -> np.ndarray:
    """Scale VaR into ES by the factor 1 + exp(gamma) > 1."""
    return (1.0 + math.exp(gamma)) * np.asarray(var, dtype=float)


def build_proxy(var_matrix, weights) -> np.ndarray:
    """Weighted combination s_t = sum_j w_j * var_{j,t} over the source assets."""
    var_matrix = np.asarray(var_matrix, dtype=float)
    if var_matrix.ndim != 2:
        raise ValueError("var_matrix must be T x N")
    if not weights.sources:
        return np.zeros(var_matrix.shape[0])
    idx = np.array(weights.sources, dtype=int)
    if idx.max() >= var_matrix.shape[1]:
        raise ValueError("source index outside var_matrix columns")
    return var_matrix[:, idx] @ np.asarray(weights.weights, dtype=float)


def spillover_share(path: QuantilePath) -> np.ndarray:
    """Per-day share qs_t / var_t of total tail risk carried by spillovers."""
    var = path.var
    out = np.zeros_like(var)
    ok = np.abs(var) > 1e-12
    out[ok] = path.qs[ok] / var[ok]
    return out


def nested_baseline(spec: ModelSpec) -> ModelSpec:
    """The baseline spec this se/x spec collapses to when spillovers vanish."""
    return replace(spec, mode="baseline")
