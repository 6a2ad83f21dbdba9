"""Tests for CSV panel reading and writing."""

from __future__ import annotations

import numpy as np
import pytest

from factorlab.errors import DataFormatError, InvalidInput
from factorlab.io import read_matrix_csv, read_returns_csv, write_matrix_csv


def test_matrix_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(7, 4)) * 10.0 ** rng.integers(-8, 8, size=(7, 4))
    path = tmp_path / "m.csv"
    write_matrix_csv(path, x)
    back, names = read_matrix_csv(path)
    assert names is None
    assert np.array_equal(back, x)

    second = tmp_path / "m2.csv"
    write_matrix_csv(second, back)
    assert path.read_bytes() == second.read_bytes()


def test_matrix_header_roundtrip(tmp_path):
    x = np.arange(6.0).reshape(2, 3)
    path = tmp_path / "h.csv"
    write_matrix_csv(path, x, header=("a", "b", "c"))
    back, names = read_matrix_csv(path, header=True)
    assert names == ("a", "b", "c")
    assert np.array_equal(back, x)
    with pytest.raises(InvalidInput):
        write_matrix_csv(path, x, header=("a", "b"))


def test_matrix_malformed_inputs(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataFormatError):
        read_matrix_csv(empty)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2,3\n4,5\n")
    with pytest.raises(DataFormatError):
        read_matrix_csv(ragged)

    alpha = tmp_path / "alpha.csv"
    alpha.write_text("1,2\n3,x\n")
    with pytest.raises(DataFormatError):
        read_matrix_csv(alpha)

    holes = tmp_path / "holes.csv"
    holes.write_text("1,2\n3,\n")
    with pytest.raises(DataFormatError):
        read_matrix_csv(holes)

    only_header = tmp_path / "onlyheader.csv"
    only_header.write_text("a,b\n")
    with pytest.raises(DataFormatError):
        read_matrix_csv(only_header, header=True)


def test_returns_with_named_date_column(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text(
        "date,AAA,BBB\n"
        "2020-01-01,0.01,-0.02\n"
        "2020-01-02,0.03,0.04\n"
        "2020-01-03,-0.01,0.00\n"
    )
    x, tickers, dates = read_returns_csv(path)
    assert tickers == ("AAA", "BBB")
    assert dates == ("2020-01-01", "2020-01-02", "2020-01-03")
    assert np.allclose(x, [[0.01, -0.02], [0.03, 0.04], [-0.01, 0.0]])


def test_returns_date_column_detected_by_content(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("when,AAA\n3jan,0.5\n4jan,0.25\n")
    x, tickers, dates = read_returns_csv(path)
    assert tickers == ("AAA",)
    assert dates == ("3jan", "4jan")
    assert x.shape == (2, 1)


def test_returns_without_date_column(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("AAA,BBB\n1,2\n3,4\n")
    x, tickers, dates = read_returns_csv(path)
    assert dates is None
    assert tickers == ("AAA", "BBB")
    assert np.array_equal(x, [[1.0, 2.0], [3.0, 4.0]])


def test_returns_require_ticker_header(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("1,2\n3,4\n5,6\n")
    with pytest.raises(DataFormatError, match="header"):
        read_returns_csv(path)


def test_prices_become_log_returns(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("date,AAA\nd1,100\nd2,110\nd3,121\n")
    x, tickers, dates = read_returns_csv(path, prices=True)
    assert x.shape == (2, 1)  # one fewer row than price rows
    assert np.allclose(x[:, 0], np.log(1.1))
    assert dates == ("d2", "d3")

    bad = tmp_path / "bad.csv"
    bad.write_text("date,AAA\nd1,100\nd2,-4\nd3,121\n")
    with pytest.raises(DataFormatError, match="positive"):
        read_returns_csv(bad, prices=True)


def test_missing_cells_rejected_or_dropped(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("AAA,BBB,CCC\n1,,7\n3,4,8\n5,6,9\n")
    with pytest.raises(DataFormatError, match="BBB"):
        read_returns_csv(path)
    x, tickers, _ = read_returns_csv(path, drop_incomplete_series=True)
    assert tickers == ("AAA", "CCC")
    assert np.array_equal(x, [[1.0, 7.0], [3.0, 8.0], [5.0, 9.0]])

    hopeless = tmp_path / "all.csv"
    hopeless.write_text("AAA\nnan\n2\n")
    with pytest.raises(DataFormatError):
        read_returns_csv(hopeless, drop_incomplete_series=True)
