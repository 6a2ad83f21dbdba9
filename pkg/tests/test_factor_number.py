"""Tests for the factor-number criteria."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorlab.errors import DegenerateSpectrum, InvalidInput
from factorlab.factor_number import (
    default_r_max,
    gr_ahn_horenstein,
    ic_bai_ng,
)


def enumerate_ic(ev, n, g, r_max):
    """Independent brute-force criterion: direct tail sums, no trace trick."""
    ev = [max(float(x), 0.0) for x in ev]
    return [math.log(sum(ev[q:]) / n) + q * g for q in range(1, r_max + 1)]


def enumerate_gr(ev, r_max):
    ev = [max(float(x), 0.0) for x in ev]
    star = [ev[q - 1] / sum(ev[q:]) for q in range(1, r_max + 2)]
    return [
        math.log1p(star[q - 1]) / math.log1p(star[q])
        for q in range(1, r_max + 1)
    ]


def test_default_r_max_values():
    assert default_r_max(200, 500) == 14
    assert default_r_max(1000, 2000) == 31
    assert default_r_max(4, 100) == 2
    with pytest.raises(InvalidInput):
        default_r_max(1, 100)


def test_ic_single_dominant_eigenvalue():
    n = n_obs = 100
    ev = np.r_[1e8, np.ones(n - 1)]
    res = ic_bai_ng(ev, n, n_obs, r_max=10, penalty=1.0)
    assert res.r_hat == 1
    assert res.method == "BaiNgIC"


def test_ic_matches_enumeration():
    n = n_obs = 100
    ev = np.r_[100.0, 50.0, np.ones(98)]
    g = (n + n_obs) * math.log(min(n, n_obs)) / (n * n_obs)
    expect = enumerate_ic(ev, n, g, 10)
    res = ic_bai_ng(ev, n, n_obs, r_max=10)
    np.testing.assert_allclose(res.criterion_values, expect, rtol=1e-12)
    assert res.r_hat == int(np.argmin(expect)) + 1
    assert res.r_max == 10


def test_ic_tie_breaks_to_smallest_q():
    # with n=2 and penalty log 2 both IC values are exactly 2*log(2)
    ev = np.array([8.0, 2.0, 1.0, 0.5, 0.5])
    res = ic_bai_ng(ev, 2, 8, r_max=2, penalty=math.log(2.0))
    assert res.criterion_values[0] == res.criterion_values[1]
    assert res.r_hat == 1


def test_ic_penalty_callable_and_validation():
    ev = np.r_[50.0, np.ones(20)]
    res = ic_bai_ng(ev, 21, 50, r_max=4, penalty=lambda n, t: 2.0 / t)
    assert 1 <= res.r_hat <= 4
    with pytest.raises(InvalidInput):
        ic_bai_ng(ev, 21, 50, r_max=4, penalty=0.0)
    with pytest.raises(InvalidInput):
        ic_bai_ng(ev, 21, 50, r_max=4, penalty=-1.0)


def test_ic_trace_route_matches_full_spectrum():
    rng = np.random.default_rng(5)
    ev = np.sort(rng.uniform(0.1, 9.0, size=60))[::-1]
    full = ic_bai_ng(ev, 60, 120, r_max=7)
    part = ic_bai_ng(ev[:8], 60, 120, r_max=7, trace=float(ev.sum()))
    np.testing.assert_array_equal(full.criterion_values, part.criterion_values)
    assert full.r_hat == part.r_hat


def test_ic_degenerate_tail():
    ev = np.r_[5.0, np.zeros(9)]
    with pytest.raises(DegenerateSpectrum):
        ic_bai_ng(ev, 10, 10, r_max=3)
    with pytest.raises(DegenerateSpectrum):
        ic_bai_ng(np.zeros(10), 10, 10, r_max=3)


def test_input_validation():
    with pytest.raises(InvalidInput):
        ic_bai_ng(np.array([1.0, 2.0, 3.0]), 10, 10, r_max=2)  # ascending
    with pytest.raises(InvalidInput):
        ic_bai_ng(np.array([3.0, np.nan, 1.0]), 10, 10, r_max=2)
    with pytest.raises(InvalidInput):
        ic_bai_ng(np.array([3.0, 2.0]), 10, 10, r_max=5)  # too short
    with pytest.raises(InvalidInput):
        gr_ahn_horenstein(np.array([3.0, 2.0, 1.0]), 1, 10, r_max=2)
    with pytest.raises(InvalidInput):
        # declared trace below the partial sum it must dominate
        ic_bai_ng(np.array([3.0, 2.0, 1.0]), 10, 10, r_max=2, trace=4.0)


def test_gr_matches_enumeration():
    ev = np.array([8.0, 4.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    expect = enumerate_gr(ev, 3)
    res = gr_ahn_horenstein(ev, 8, 8, r_max=3)
    np.testing.assert_allclose(res.criterion_values, expect, rtol=1e-12)
    assert res.r_hat == int(np.argmax(expect)) + 1
    assert res.method == "AhnHorensteinGR"


def test_gr_single_spike():
    ev = np.r_[1e7, np.full(19, 1e-3)]
    res = gr_ahn_horenstein(ev, 20, 20, r_max=4)
    assert res.r_hat == 1


def test_gr_infinite_ratio_at_rank():
    # rank-3 spectrum: the ratio at q=3 divides by log1p(0) and is +inf
    ev = np.array([4.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    res = gr_ahn_horenstein(ev, 8, 8, r_max=5)
    assert res.r_hat == 3
    assert math.isinf(res.criterion_values[2])
    assert res.criterion_values[1] == 0.0
    assert res.criterion_values[3] == 1.0
    assert res.criterion_values[4] == 1.0


def test_gr_degenerate_spectrum():
    with pytest.raises(DegenerateSpectrum):
        gr_ahn_horenstein(np.r_[5.0, np.zeros(9)], 10, 10, r_max=3)
    with pytest.raises(DegenerateSpectrum):
        gr_ahn_horenstein(np.zeros(10), 10, 10, r_max=3)


def test_gr_trace_route_matches_full_spectrum():
    rng = np.random.default_rng(6)
    ev = np.sort(rng.uniform(0.1, 9.0, size=60))[::-1]
    full = gr_ahn_horenstein(ev, 60, 120, r_max=7)
    part = gr_ahn_horenstein(ev[:8], 60, 120, r_max=7, trace=float(ev.sum()))
    np.testing.assert_array_equal(full.criterion_values, part.criterion_values)
    assert full.r_hat == part.r_hat


@settings(max_examples=60, deadline=None)
@given(
    data=st.data(),
    scale=st.floats(min_value=1e-6, max_value=1e6),
)
def test_gr_scale_invariance(data, scale):
    # dynamic range kept representative of covariance spectra: the
    # trace-minus-partial-sum tails lose relative accuracy when the tail
    # mass is a vanishing fraction of the total
    size = data.draw(st.integers(min_value=6, max_value=40))
    raw = data.draw(
        st.lists(
            st.floats(min_value=0.05, max_value=20.0),
            min_size=size,
            max_size=size,
        )
    )
    ev = np.sort(np.asarray(raw))[::-1].copy()
    r_max = min(4, size - 1)
    base = gr_ahn_horenstein(ev, size, 2 * size, r_max=r_max)
    scaled = gr_ahn_horenstein(ev * scale, size, 2 * size, r_max=r_max)
    assert scaled.r_hat == base.r_hat
    np.testing.assert_allclose(
        scaled.criterion_values, base.criterion_values, rtol=1e-12
    )


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_ic_r_hat_decreases_with_penalty(data):
    size = data.draw(st.integers(min_value=8, max_value=40))
    raw = data.draw(
        st.lists(
            st.floats(min_value=1e-3, max_value=1e3),
            min_size=size,
            max_size=size,
        )
    )
    ev = np.sort(np.asarray(raw))[::-1].copy()
    r_max = min(5, size - 1)
    picks = [
        ic_bai_ng(ev, size, 2 * size, r_max=r_max, penalty=g).r_hat
        for g in (1e-4, 1e-2, 1e-1, 1.0, 10.0)
    ]
    assert all(1 <= r <= r_max for r in picks)
    assert all(a >= b for a, b in zip(picks, picks[1:]))


def test_both_find_rank_at_large_gap():
    n = n_obs = 100
    gap = 1e6
    tail = np.linspace(1.5, 0.5, 97)
    ev = np.r_[3.0 * gap, 2.0 * gap, 1.5 * gap, tail]
    assert ic_bai_ng(ev, n, n_obs, r_max=10).r_hat == 3
    assert gr_ahn_horenstein(ev, n, n_obs, r_max=10).r_hat == 3


def test_result_values_read_only():
    ev = np.r_[100.0, 50.0, np.ones(98)]
    res = ic_bai_ng(ev, 100, 100, r_max=10)
    with pytest.raises(ValueError):
        res.criterion_values[0] = 0.0
