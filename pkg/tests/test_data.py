import math

import numpy as np
import pytest

from spillvar import (
    DomainError,
    EmptyPanelError,
    OhlcSeries,
    PanelFormatError,
    garman_klass,
    load_ohlc,
    load_panel,
    prices_to_returns,
)
from spillvar.data import ReturnPanel, write_panel

from simdata import make_panel


def write_csv(path, text):
    path.write_text(text)
    return path


class TestLoadPanel:
    def test_prices_to_percent_log_returns(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA\n2020-01-01,100\n2020-01-02,110\n")
        panel = load_panel(f, mode="prices")
        expected = 100.0 * math.log(110.0 / 100.0)  # 9.531017980432493
        assert panel.returns.shape == (1, 1)
        assert panel.returns[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_flat_price_gives_zero_return(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA\n2020-01-01,100\n2020-01-02,100\n")
        panel = load_panel(f, mode="prices")
        assert panel.returns[0, 0] == 0.0

    def test_disjoint_dates_raise_empty_panel(self, tmp_path):
        f = write_csv(
            tmp_path / "p.csv",
            "date,AAA,BBB\n2020-01-01,1.0,\n2020-01-02,2.0,\n2020-01-03,,3.0\n2020-01-06,,4.0\n",
        )
        with pytest.raises(EmptyPanelError):
            load_panel(f)

    def test_alignment_drops_incomplete_dates(self, tmp_path):
        f = write_csv(
            tmp_path / "p.csv",
            "date,AAA,BBB\n2020-01-01,1.0,2.0\n2020-01-02,1.5,\n2020-01-03,-0.5,0.5\n",
        )
        panel = load_panel(f)
        assert panel.n_obs == 2
        assert [str(d) for d in panel.dates] == ["2020-01-01", "2020-01-03"]
        np.testing.assert_allclose(panel.returns, [[1.0, 2.0], [-0.5, 0.5]])

    def test_malformed_row_reports_line_number(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA\n2020-01-01,1.0\n2020-01-02,oops\n")
        with pytest.raises(PanelFormatError, match="line 3"):
            load_panel(f)

    def test_bad_date_reports_line_number(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA\nnot-a-date,1.0\n")
        with pytest.raises(PanelFormatError, match="line 2"):
            load_panel(f)

    def test_ragged_row_reports_line_number(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA,BBB\n2020-01-01,1.0,2.0\n2020-01-02,1.0\n")
        with pytest.raises(PanelFormatError, match="line 3"):
            load_panel(f)

    def test_duplicate_date_rejected(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA\n2020-01-01,1.0\n2020-01-01,2.0\n")
        with pytest.raises(PanelFormatError, match="duplicate"):
            load_panel(f)

    def test_rows_sorted_by_date(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA\n2020-01-03,3.0\n2020-01-01,1.0\n2020-01-02,2.0\n")
        panel = load_panel(f)
        np.testing.assert_allclose(panel.returns[:, 0], [1.0, 2.0, 3.0])

    def test_bad_mode_rejected(self, tmp_path):
        f = write_csv(tmp_path / "p.csv", "date,AAA\n2020-01-01,1.0\n2020-01-02,2.0\n")
        with pytest.raises(ValueError, match="mode"):
            load_panel(f, mode="levels")

    def test_alignment_idempotent_via_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        panel = make_panel(rng.normal(0, 1.3, (40, 3)))
        f = tmp_path / "rt.csv"
        write_panel(panel, f)
        again = load_panel(f)
        assert again.tickers == panel.tickers
        np.testing.assert_array_equal(again.dates, panel.dates)
        np.testing.assert_array_equal(again.returns, panel.returns)

    def test_returns_roundtrip_reconstructs_prices(self, tmp_path):
        rng = np.random.default_rng(1)
        prices = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.02, (60, 2)), axis=0))
        lines = ["date,AAA,BBB"]
        day = np.datetime64("2019-01-01")
        for i, row in enumerate(prices):
            lines.append(f"{day + i},{float(row[0])!r},{float(row[1])!r}")
        f = write_csv(tmp_path / "p.csv", "\n".join(lines) + "\n")
        panel = load_panel(f, mode="prices")
        rebuilt = prices[0] * np.exp(np.cumsum(panel.returns, axis=0) / 100.0)
        np.testing.assert_allclose(rebuilt, prices[1:], rtol=1e-9)


class TestReturnPanel:
    def test_requires_strictly_increasing_dates(self):
        dates = np.array(["2020-01-02", "2020-01-01"], dtype="datetime64[D]")
        with pytest.raises(ValueError, match="increasing"):
            ReturnPanel(dates=dates, tickers=("A",), returns=np.zeros((2, 1)))

    def test_rejects_nan(self):
        dates = np.array(["2020-01-01", "2020-01-02"], dtype="datetime64[D]")
        with pytest.raises(ValueError, match="finite"):
            ReturnPanel(dates=dates, tickers=("A",), returns=np.array([[0.0], [np.nan]]))

    def test_column_lookup(self):
        panel = make_panel(np.arange(6.0).reshape(3, 2), tickers=("X", "Y"))
        np.testing.assert_array_equal(panel.column("Y"), [1.0, 3.0, 5.0])


class TestGarmanKlass:
    def _series(self, o, h, l, c):
        n = len(o)
        dates = np.datetime64("2020-01-01") + np.arange(n)
        return OhlcSeries(dates=dates, open=np.array(o, float), high=np.array(h, float),
                          low=np.array(l, float), close=np.array(c, float))

    def test_degenerate_bar_is_zero(self):
        s = self._series([100], [100], [100], [100])
        assert garman_klass(s)[0] == 0.0

    def test_log_range_e_gives_half(self):
        # H/L = e with C = O = sqrt(H*L): 0.5 * ln(e)^2 - k * 0 = 0.5
        h, l = 100.0 * math.e, 100.0
        mid = math.sqrt(h * l)
        s = self._series([mid], [h], [l], [mid])
        assert garman_klass(s)[0] == pytest.approx(0.5, abs=1e-12)

    def test_worked_bar(self):
        # H/L = 1.02, C/O = 1.01; direct evaluation of the estimator
        o, c, l, h = 100.0, 101.0, 100.0, 102.0
        s = self._series([o], [h], [l], [c])
        expected = 0.5 * math.log(1.02) ** 2 - (2 * math.log(2) - 1) * math.log(1.01) ** 2
        assert garman_klass(s)[0] == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(1.578253730330515e-4, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        o = 50.0 + rng.random(30) * 10
        spread = rng.random(30) * 2 + 0.1
        h = o + spread
        l = o - spread
        c = o + (rng.random(30) - 0.5) * spread
        dates = np.datetime64("2020-01-01") + np.arange(30)
        base = garman_klass(OhlcSeries(dates, o, h, l, c))
        for scale in (0.01, 3.0, 250.0):
            scaled = garman_klass(OhlcSeries(dates, scale * o, scale * h, scale * l, scale * c))
            np.testing.assert_allclose(scaled, base, rtol=1e-12, atol=1e-18)

    def test_nonnegative_on_valid_bars(self):
        rng = np.random.default_rng(8)
        o = 100 * np.exp(rng.normal(0, 0.02, 200))
        c = o * np.exp(rng.normal(0, 0.02, 200))
        h = np.maximum(o, c) * np.exp(np.abs(rng.normal(0, 0.01, 200)))
        l = np.minimum(o, c) * np.exp(-np.abs(rng.normal(0, 0.01, 200)))
        dates = np.datetime64("2020-01-01") + np.arange(200)
        assert np.all(garman_klass(OhlcSeries(dates, o, h, l, c)) >= 0.0)

    def test_nonpositive_price_rejected(self):
        with pytest.raises(DomainError):
            self._series([100], [101], [-1], [100])

    def test_ordering_violation_rejected(self):
        with pytest.raises(DomainError):
            self._series([100], [99], [98], [100])  # open above high

    def test_load_ohlc(self, tmp_path):
        f = tmp_path / "ohlc.csv"
        f.write_text(
            "date,open,high,low,close\n"
            "2020-01-02,10,11,9.5,10.5\n"
            "2020-01-01,10,10.2,9.9,10.1\n"
        )
        s = load_ohlc(f)
        assert str(s.dates[0]) == "2020-01-01"  # sorted
        assert s.high[1] == 11.0


class TestPricesToReturns:
    def test_matches_direct_formula(self):
        p = np.array([100.0, 110.0, 99.0])
        out = prices_to_returns(p)
        np.testing.assert_allclose(
            out, [100 * math.log(1.1), 100 * math.log(99 / 110)], rtol=1e-12
        )

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            prices_to_returns(np.array([100.0, 0.0]))
