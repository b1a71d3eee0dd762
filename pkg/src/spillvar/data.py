"""Return-panel and OHLC ingestion.

Input tables are delimited text: one header row, first column an ISO
``YYYY-MM-DD`` date, one column per ticker, ``.`` decimal separator and
``,`` delimiter. Cells may be empty; the loader keeps only dates on which
every ticker has a value (inner join). Prices are converted to returns in
percent units, 100 * ln(p_t / p_{t-1}).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import DomainError, EmptyPanelError, PanelFormatError

LOG_SCALE = 100.0  # returns are stored as 100 x log-return


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned T x N matrix of daily percent log-returns."""

    dates: np.ndarray  # datetime64[D], length T
    tickers: tuple[str, ...]
    returns: np.ndarray  # T x N float64

    def __post_init__(self):
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        r = np.ascontiguousarray(np.asarray(self.returns, dtype=float))
        if r.ndim != 2:
            raise ValueError("returns must be a 2-d array")
        object.__setattr__(self, "returns", r)
        t, n = r.shape
        if t < 1 or n < 1:
            raise EmptyPanelError(f"panel is degenerate: shape {r.shape}")
        if len(self.dates) != t:
            raise ValueError(f"{len(self.dates)} dates for {t} return rows")
        if len(self.tickers) != n:
            raise ValueError(f"{len(self.tickers)} tickers for {n} columns")
        if t > 1 and not np.all(np.diff(self.dates).astype(int) > 0):
            raise ValueError("dates must be strictly increasing")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns contain non-finite values")

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def column(self, ticker: str) -> np.ndarray:
        return self.returns[:, self.tickers.index(ticker)]


@dataclass(frozen=True)
class OhlcSeries:
    """Daily open/high/low/close prices for one asset."""

    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))
        for name in ("open", "high", "low", "close"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        o, h, l, c = self.open, self.high, self.low, self.close
        if not (len(o) == len(h) == len(l) == len(c) == len(self.dates)):
            raise ValueError("OHLC columns must share one date index")
        if np.any(l <= 0):
            raise DomainError("nonpositive price in OHLC series")
        body_lo = np.minimum(o, c)
        body_hi = np.maximum(o, c)
        if np.any(l > body_lo) or np.any(body_hi > h):
            raise DomainError("OHLC ordering violated: need low <= open,close <= high")


def _parse_table(path, fields_required=None):
    """Read a delimited table into (header, rows of (line_no, date, cells))."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("empty file", line=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise PanelFormatError("header must name a date column and at least one ticker", line=1)
        width = len(header)
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != width:
                raise PanelFormatError(
                    f"expected {width} fields, found {len(raw)}", line=line_no
                )
            try:
                day = date.fromisoformat(raw[0].strip())
            except ValueError:
                raise PanelFormatError(f"bad date {raw[0]!r}", line=line_no) from None
            cells = []
            for col, cell in zip(header[1:], raw[1:]):
                cell = cell.strip()
                if not cell:
                    cells.append(math.nan)
                    continue
                try:
                    cells.append(float(cell))
                except ValueError:
                    raise PanelFormatError(
                        f"bad number {cell!r} in column {col}", line=line_no
                    ) from None
            rows.append((line_no, day, cells))
    if fields_required is not None and header[1:] != fields_required:
        raise PanelFormatError(
            f"expected columns {fields_required}, found {header[1:]}", line=1
        )
    return header, rows


def prices_to_returns(prices: np.ndarray) -> np.ndarray:
    """Percent log-returns 100*ln(p_t/p_{t-1}); drops the first row."""
    p = np.asarray(prices, dtype=float)
    if np.any(p <= 0):
        raise DomainError("nonpositive price; cannot take log-returns")
    return LOG_SCALE * np.diff(np.log(p), axis=0)


def load_panel(path, mode: str = "returns") -> ReturnPanel:
    """Load a multi-ticker table, align on common dates, return a panel.

    ``mode`` selects whether table values are returns (used as-is) or
    prices (converted to percent log-returns).
    """
    if mode not in ("returns", "prices"):
        raise ValueError(f"mode must be 'returns' or 'prices', got {mode!r}")
    header, rows = _parse_table(path)
    tickers = tuple(header[1:])
    if not rows:
        raise EmptyPanelError("no data rows")
    rows.sort(key=lambda item: item[1])
    seen = {}
    for line_no, day, _ in rows:
        if day in seen:
            raise PanelFormatError(f"duplicate date {day}", line=line_no)
        seen[day] = line_no
    values = np.array([cells for _, _, cells in rows], dtype=float)
    complete = ~np.isnan(values).any(axis=1)
    if complete.sum() < 2:
        raise EmptyPanelError(
            f"only {int(complete.sum())} dates common to all tickers; need at least 2"
        )
    dates = np.array([day for _, day, _ in rows], dtype="datetime64[D]")[complete]
    values = values[complete]
    if mode == "prices":
        values = prices_to_returns(values)
        dates = dates[1:]
    return ReturnPanel(dates=dates, tickers=tickers, returns=values)


def write_panel(panel: ReturnPanel, path) -> None:
    """Write a panel back to the CSV interchange format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *panel.tickers])
        for day, row in zip(panel.dates, panel.returns):
            writer.writerow([str(day), *(repr(float(v)) for v in row)])


def load_ohlc(path) -> OhlcSeries:
    """Load a date,open,high,low,close table for one asset."""
    _, rows = _parse_table(path, fields_required=["open", "high", "low", "close"])
    if not rows:
        raise EmptyPanelError("no data rows")
    rows.sort(key=lambda item: item[1])
    dates = np.array([day for _, day, _ in rows], dtype="datetime64[D]")
    vals = np.array([cells for _, _, cells in rows], dtype=float)
    if np.isnan(vals).any():
        line = rows[int(np.argwhere(np.isnan(vals).any(axis=1))[0, 0])][0]
        raise PanelFormatError("missing OHLC value", line=line)
    return OhlcSeries(dates=dates, open=vals[:, 0], high=vals[:, 1], low=vals[:, 2], close=vals[:, 3])


def garman_klass(series: OhlcSeries) -> np.ndarray:
    """Daily range-based variance: 0.5*ln(H/L)^2 - (2 ln2 - 1)*ln(C/O)^2.

    The raw estimator can dip slightly below zero when the close-open move
    dominates the range; values are clamped at 0 so downstream consumers can
    treat the output as a variance proxy.
    """
    hl = np.log(series.high / series.low)
    co = np.log(series.close / series.open)
    gk = 0.5 * hl**2 - (2.0 * math.log(2.0) - 1.0) * co**2
    return np.maximum(gk, 0.0)
