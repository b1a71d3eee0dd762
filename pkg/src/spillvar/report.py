"""Artifact writers: delimited tables, JSON fit/trace documents, run
manifests, and the matplotlib figures rendered alongside them.

Float cells are written with ``repr`` so identical doubles serialize to
identical bytes: rerunning with the same config and seed reproduces every
CSV byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, stage, config_echo, timings, input_digest, knobs) -> None:
    write_json(
        path,
        {
            "stage": stage,
            "tool_version": __version__,
            "config": config_echo,
            "timings_seconds": timings,
            "input_digest_sha256": input_digest,
            "knobs": knobs,
        },
    )


def write_weights_csv(path, tickers, weights_by_target) -> None:
    rows = []
    for target in sorted(weights_by_target):
        w = weights_by_target[target]
        if not w.sources:
            continue
        for j, wj in zip(w.sources, w.weights):
            rows.append((tickers[target], tickers[j], wj))
    write_csv(path, ["target", "source", "weight"], rows)


def read_weights_csv(path, tickers):
    """Inverse of write_weights_csv; targets absent from the file are empty."""
    from .selection import SpilloverWeights

    index = {t: i for i, t in enumerate(tickers)}
    collected: dict[int, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            tgt = index[row["target"]]
            collected.setdefault(tgt, []).append((index[row["source"]], float(row["weight"])))
    out = {}
    for i in range(len(tickers)):
        pairs = collected.get(i, [])
        out[i] = SpilloverWeights(
            target=i,
            sources=tuple(j for j, _ in pairs),
            weights=np.array([w for _, w in pairs]),
        )
    return out


def write_matrix_csv(path, matrix, labels) -> None:
    rows = [(lab, *row) for lab, row in zip(labels, np.asarray(matrix))]
    write_csv(path, ["", *labels], rows)


def write_quantile_path_csv(path, dates, qpath) -> None:
    rows = zip(
        (str(d) for d in dates), qpath.var, qpath.es, qpath.qp, qpath.qs
    )
    write_csv(path, ["date", "var", "es", "qp", "qs"], rows)


def fit_payload(fit, ticker) -> dict:
    return {
        "ticker": ticker,
        "model": fit.spec.model_id,
        "variant": fit.spec.variant,
        "mode": fit.spec.mode,
        "tau": fit.spec.tau,
        "component_lag": fit.spec.component_lag,
        "params": fit.params,
        "loss": fit.loss,
        "starts_tried": fit.starts_tried,
        "converged": fit.converged,
        "feasible_path": fit.path.feasible,
        "metadata": fit.metadata,
    }


def write_backtest_csv(path, rows) -> None:
    write_csv(
        path,
        [
            "ticker", "model", "n_obs", "violation_rate",
            "uc_lr", "uc_p", "cc_lr", "cc_p",
            "dq_stat", "dq_p", "dq_lags", "dq_degenerate",
        ],
        rows,
    )


def write_forecast_csv(path, records) -> None:
    rows = [
        (
            str(rec.date), rec.model_id, rec.var_forecast, rec.es_forecast,
            rec.realized, rec.fz0, int(rec.hit), int(rec.refit), int(rec.carried),
        )
        for rec in records
    ]
    write_csv(
        path,
        ["date", "model", "var_forecast", "es_forecast", "realized", "fz0", "hit", "refit", "carried"],
        rows,
    )


def read_forecast_losses(path):
    """Return (dates, fz0 array) from a forecast CSV."""
    dates, losses = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            dates.append(row["date"])
            losses.append(float(row["fz0"]))
    return dates, np.array(losses)


def write_mcs_csv(path, tickers_in_order, model_labels, results) -> None:
    """One row per asset; per model a p-value column and a survivor flag column."""
    header = ["ticker"]
    for label in model_labels:
        header += [label, f"{label}_in_set"]
    rows = []
    for ticker in tickers_in_order:
        res = results[ticker]
        pmap = res.as_dict()
        row = [ticker]
        for label in model_labels:
            row += [pmap[label], int(label in res.survivors)]
        rows.append(row)
    write_csv(path, header, rows)


def write_component_paths_csv(path, rows) -> None:
    """Long-format spillover component data: one row per (date, ticker, model)."""
    write_csv(path, ["date", "ticker", "model", "var", "qs", "share"], rows)


# ---------------------------------------------------------------------------
# figures


def render_heatmap(matrix, labels, path, title="Cross-quantilogram, lag 1") -> None:
    matrix = np.asarray(matrix)
    n = len(labels)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.4 * n + 2.0),) * 2)
    im = ax.imshow(matrix, cmap="viridis")
    ax.set_xticks(range(n), labels, rotation=90, fontsize=7)
    ax.set_yticks(range(n), labels, fontsize=7)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_component_paths(dates, returns, components, path, title) -> None:
    """Returns in grey behind the spillover component of each model."""
    x = np.asarray(dates, dtype="datetime64[D]")
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(x, returns, color="0.6", linewidth=0.5, label="returns")
    for label, series in components.items():
        ax.plot(x, series, linewidth=0.9, label=label)
    ax.axhline(0.0, color="k", linewidth=0.4)
    ax.set_title(title)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_forecast_paths(records, path, title) -> None:
    x = np.asarray([rec.date for rec in records], dtype="datetime64[D]")
    realized = [rec.realized for rec in records]
    var_f = [rec.var_forecast for rec in records]
    es_f = [rec.es_forecast for rec in records]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(x, realized, color="0.6", linewidth=0.5, label="realized")
    ax.plot(x, var_f, color="tab:red", linewidth=0.9, label="VaR forecast")
    ax.plot(x, es_f, color="tab:purple", linewidth=0.9, label="ES forecast")
    hits = [rec for rec in records if rec.hit]
    if hits:
        ax.scatter(
            np.asarray([rec.date for rec in hits], dtype="datetime64[D]"),
            [rec.realized for rec in hits],
            color="tab:red", s=12, zorder=3, label="violations",
        )
    ax.set_title(title)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
