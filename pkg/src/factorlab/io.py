"""CSV ingestion and emission for numeric panels.

Two panel flavors share the float format (17 significant digits, so a
write/read/write cycle is byte-stable):

* bare matrices (simulated panels): no header unless requested;
* market data: mandatory header row of tickers, an optional leading date
  column, optional conversion of prices to log-returns.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InvalidInput

__all__ = [
    "FLOAT_FORMAT",
    "MISSING_TOKENS",
    "write_matrix_csv",
    "read_matrix_csv",
    "read_returns_csv",
]

FLOAT_FORMAT = "%.17g"
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})


def write_matrix_csv(
    path: str | Path,
    x: np.ndarray,
    header: tuple[str, ...] | None = None,
) -> None:
    """Write a 2-D array as comma-separated rows of ``%.17g`` floats."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInput(f"expected a 2-D array, got shape {x.shape}")
    if header is not None and len(header) != x.shape[1]:
        raise InvalidInput(
            f"header has {len(header)} names for {x.shape[1]} columns"
        )
    with open(path, "w", newline="") as handle:
        out = csv.writer(handle)
        if header is not None:
            out.writerow(header)
        for row in x:
            out.writerow([FLOAT_FORMAT % value for value in row])


def _parse_cell(token: str, where: str) -> float:
    text = token.strip()
    if text.lower() in MISSING_TOKENS:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric cell {token!r} at {where}") from None


def _read_rows(path: str | Path) -> list[list[str]]:
    with open(path, newline="") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        raise DataFormatError(f"{path}: file contains no data rows")
    width = len(rows[0])
    for k, row in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(
                f"{path}: row {k + 1} has {len(row)} cells, expected {width}"
            )
    return rows


def read_matrix_csv(
    path: str | Path, header: bool = False
) -> tuple[np.ndarray, tuple[str, ...] | None]:
    """Read a bare numeric matrix; returns ``(x, column_names_or_None)``.

    Missing cells are rejected: simulated panels are always complete.
    """
    rows = _read_rows(path)
    names: tuple[str, ...] | None = None
    if header:
        names = tuple(cell.strip() for cell in rows[0])
        rows = rows[1:]
        if not rows:
            raise DataFormatError(f"{path}: header but no data rows")
    x = np.array(
        [
            [_parse_cell(cell, f"row {i + 1}, column {j + 1}") for j, cell in enumerate(row)]
            for i, row in enumerate(rows)
        ]
    )
    if np.isnan(x).any():
        raise DataFormatError(f"{path}: matrix contains missing cells")
    return x, names


def _is_numeric(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_returns_csv(
    path: str | Path,
    prices: bool = False,
    drop_incomplete_series: bool = False,
) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...] | None]:
    """Read a market-data panel: header of tickers, optional date column.

    Returns ``(x, tickers, dates_or_None)``.  The leading column is
    treated as dates when its header says so or its cells are not
    numeric.  With ``prices`` the series are converted to log-returns
    ``ln p_t - ln p_{t-1}`` (one fewer row; prices must be positive).
    Series with missing cells are dropped when ``drop_incomplete_series``
    is set and rejected otherwise.
    """
    rows = _read_rows(path)
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a header row plus data rows")
    head = [cell.strip() for cell in rows[0]]
    if all(_is_numeric(cell) for cell in head):
        raise DataFormatError(
            f"{path}: first row is numeric; market data needs a ticker header"
        )
    body = rows[1:]
    date_col = head[0].lower() in {"date", "dates", "time", "day", ""} or not all(
        _is_numeric(row[0]) for row in body
    )
    dates: tuple[str, ...] | None = None
    if date_col:
        if len(head) < 2:
            raise DataFormatError(f"{path}: only a date column, no series")
        dates = tuple(row[0].strip() for row in body)
        head = head[1:]
        body = [row[1:] for row in body]
    x = np.array(
        [
            [_parse_cell(cell, f"row {i + 2}, series {head[j]!r}") for j, cell in enumerate(row)]
            for i, row in enumerate(body)
        ]
    )
    tickers = tuple(head)
    incomplete = np.isnan(x).any(axis=0)
    if incomplete.any():
        bad = [t for t, flag in zip(tickers, incomplete) if flag]
        if not drop_incomplete_series:
            raise DataFormatError(
                f"{path}: series with missing cells: {', '.join(bad)} "
                "(pass the drop-incomplete-series option to skip them)"
            )
        keep = ~incomplete
        x = x[:, keep]
        tickers = tuple(t for t, flag in zip(tickers, keep) if flag)
        if x.shape[1] == 0:
            raise DataFormatError(f"{path}: every series has missing cells")
    if prices:
        if (x <= 0).any():
            raise DataFormatError(
                f"{path}: prices must be positive for log-return conversion"
            )
        x = np.diff(np.log(x), axis=0)
        if dates is not None:
            dates = dates[1:]
    if x.shape[0] < 2:
        raise DataFormatError(f"{path}: fewer than 2 usable observations")
    return x, tickers, dates
