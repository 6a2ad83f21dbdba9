"""Lightweight panel container shared by all modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput


@dataclass(frozen=True, eq=False)
class PanelData:
    """A T x n panel of observations.

    Parameters
    ----------
    values : (T, n) float array
        Rows are time points, columns are series.
    series : tuple of str, optional
        Column names (tickers).
    times : tuple of str, optional
        Row labels (dates).
    """

    values: np.ndarray
    series: tuple[str, ...] | None = None
    times: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInput("panel must be a 2-D array with at least one row and column")
        if self.series is not None and len(self.series) != arr.shape[1]:
            raise InvalidInput("series names do not match the number of columns")
        if self.times is not None and len(self.times) != arr.shape[0]:
            raise InvalidInput("time labels do not match the number of rows")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]


def as_panel_array(x) -> np.ndarray:
    """Return the raw (T, n) array behind a PanelData or array-like."""
    arr = x.values if isinstance(x, PanelData) else np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise InvalidInput("expected a 2-D panel of observations")
    return arr
