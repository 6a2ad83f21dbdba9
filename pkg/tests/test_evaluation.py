"""Tests for the Monte Carlo study runner and its error metrics."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from factorlab.errors import DegenerateOracle, InvalidInput, StudyFailed
from factorlab.estimators import EstimatorSpec, FactorFit
from factorlab.evaluation import (
    CSV_COLUMNS,
    ORACLE_LABEL,
    AhnHorensteinGR,
    BaiNgIC,
    Fixed,
    McStudyConfig,
    TruePlus,
    localisation_diagnostic,
    relative_errors,
    report_to_csv,
    report_to_json,
    run_study,
)
from factorlab.simulation import Model1, Model2, SimConfig


def small_setting(seed_hint: int = 0, **overrides) -> SimConfig:
    base = dict(n_series=24, n_obs=40, r=2, phi=0.5, model=Model1(), seed=0)
    base.update(overrides)
    return SimConfig(**base)


def tiny_study(**overrides) -> McStudyConfig:
    base = dict(
        settings=(small_setting(),),
        methods=(EstimatorSpec(method="pc", r_hat=1),),
        r_selector=Fixed(2),
        replications=3,
        base_seed=11,
    )
    base.update(overrides)
    return McStudyConfig(**base)


def scaled_fit_from_nus(nus, r_hat=None, extra_keys=()) -> FactorFit:
    records = []
    for j, nu in enumerate(nus):
        rec = {"j": j, "max_coordinate": 0.1, "scale_factor": float(nu)}
        rec.update(extra_keys)
        records.append(rec)
    shape = (4, 3)
    return FactorFit(
        chi_hat=np.zeros(shape),
        eps_hat=np.zeros(shape),
        spec=EstimatorSpec(method="scaled", r_hat=r_hat or len(nus)),
        diagnostics=tuple(records),
    )


# ---------------------------------------------------------------------------
# relative errors


def test_relative_errors_match_double_loop():
    rng = np.random.default_rng(7)
    chi_hat = rng.normal(size=(7, 5))
    chi_true = rng.normal(size=(7, 5))
    denominators = {"avg": 2.5, "max": 1.25}

    per_series = [
        sum((chi_hat[t, i] - chi_true[t, i]) ** 2 for t in range(7))
        for i in range(5)
    ]
    want_avg = sum(per_series) / 5 / denominators["avg"]
    want_max = max(per_series) / denominators["max"]

    got_avg, got_max = relative_errors(chi_hat, chi_true, denominators)
    assert got_avg == pytest.approx(want_avg, rel=1e-12)
    assert got_max == pytest.approx(want_max, rel=1e-12)


def test_relative_errors_zero_for_exact_fit():
    chi = np.arange(12.0).reshape(4, 3)
    assert relative_errors(chi, chi.copy(), {"avg": 3.0, "max": 9.0}) == (0.0, 0.0)


def test_relative_errors_max_dominates_avg():
    rng = np.random.default_rng(8)
    chi_hat = rng.normal(size=(9, 6))
    chi_true = rng.normal(size=(9, 6))
    err_avg, err_max = relative_errors(chi_hat, chi_true, {"avg": 1.0, "max": 1.0})
    assert err_max >= err_avg


def test_relative_errors_rejects_nonpositive_denominators():
    chi = np.ones((3, 2))
    with pytest.raises(DegenerateOracle):
        relative_errors(chi, np.zeros((3, 2)), {"avg": 0.0, "max": 1.0})
    with pytest.raises(DegenerateOracle):
        relative_errors(chi, np.zeros((3, 2)), {"avg": 1.0, "max": -2.0})


def test_relative_errors_rejects_bad_shapes():
    with pytest.raises(InvalidInput):
        relative_errors(np.ones((3, 2)), np.ones((2, 3)), {"avg": 1.0, "max": 1.0})
    with pytest.raises(InvalidInput):
        relative_errors(np.ones(6), np.ones(6), {"avg": 1.0, "max": 1.0})


# ---------------------------------------------------------------------------
# localisation diagnostic


def test_localisation_groups_split_at_true_r():
    fit = scaled_fit_from_nus([1.0, 1.0, 1.0, 1.0, 1.0, 4.0])
    assert localisation_diagnostic(fit, true_r=5) == {"le_r": 1.0, "gt_r": 0.25}


def test_localisation_leading_term_never_counted():
    fit = scaled_fit_from_nus([7.0, 2.0])
    assert localisation_diagnostic(fit, true_r=1) == {"gt_r": 0.5}
    assert localisation_diagnostic(fit, true_r=2) == {"le_r": 0.5}


def test_localisation_empty_when_only_leading_term():
    fit = scaled_fit_from_nus([3.0])
    assert localisation_diagnostic(fit, true_r=1) == {}


def test_localisation_pools_block_records():
    records = []
    for block, nus in enumerate([(1.0, 2.0), (1.0, 4.0)]):
        for j, nu in enumerate(nus):
            records.append(
                {"j": j, "block": block, "max_coordinate": 0.1, "scale_factor": nu}
            )
    fit = FactorFit(
        chi_hat=np.zeros((4, 3)),
        eps_hat=np.zeros((4, 3)),
        spec=EstimatorSpec(method="scaled", r_hat=2, blockwise=True),
        diagnostics=tuple(records),
    )
    got = localisation_diagnostic(fit, true_r=1)
    assert got == {"gt_r": pytest.approx((0.5 + 0.25) / 2)}


def test_localisation_requires_scaled_fit():
    fit = FactorFit(
        chi_hat=np.zeros((4, 3)),
        eps_hat=np.zeros((4, 3)),
        spec=EstimatorSpec(method="pc", r_hat=1),
    )
    with pytest.raises(InvalidInput):
        localisation_diagnostic(fit, true_r=1)
    scaled = scaled_fit_from_nus([1.0])
    with pytest.raises(InvalidInput):
        localisation_diagnostic(scaled, true_r=0)


# ---------------------------------------------------------------------------
# selectors


def test_selector_names():
    assert BaiNgIC().name == "bn"
    assert AhnHorensteinGR().name == "ah"
    assert Fixed(3).name == "fixed-3"
    assert TruePlus(1).name == "true+1"


def test_selector_columns_cover_r_max_and_truth():
    assert Fixed(3).columns_needed(100, 200, 5) == 5
    assert Fixed(9).columns_needed(100, 200, 5) == 9
    assert TruePlus(5).columns_needed(100, 200, 5) == 10
    # default r_max = floor(sqrt(min(n, T))), plus one spare eigenvalue
    assert BaiNgIC().columns_needed(100, 200, 2) == 11


# ---------------------------------------------------------------------------
# study runner


def test_oracle_self_normalizes_single_replication():
    report = run_study(tiny_study(methods=(), replications=1))
    oracle = report.settings[0].methods[0]
    assert oracle.method == ORACLE_LABEL
    assert oracle.mean_avg == 1.0
    assert oracle.mean_max == 1.0


def test_oracle_self_normalizes_many_replications():
    report = run_study(tiny_study(methods=(), replications=4))
    oracle = report.settings[0].methods[0]
    assert oracle.mean_avg == pytest.approx(1.0, abs=1e-12)
    assert oracle.mean_max == pytest.approx(1.0, abs=1e-12)
    assert report.settings[0].d_avg > 0.0
    assert report.settings[0].d_max > 0.0


def test_fixed_at_truth_makes_pc_the_oracle():
    report = run_study(tiny_study(replications=4, r_selector=Fixed(2)))
    oracle, pc = report.settings[0].methods
    assert pc.method == "pc"
    assert np.array_equal(pc.err_avg, oracle.err_avg)
    assert np.array_equal(pc.err_max, oracle.err_max)
    assert report.settings[0].r_hat_counts == {2: 4}


def test_true_plus_zero_matches_oracle():
    report = run_study(tiny_study(replications=3, r_selector=TruePlus(0)))
    oracle, pc = report.settings[0].methods
    assert np.array_equal(pc.err_avg, oracle.err_avg)
    assert np.array_equal(pc.err_max, oracle.err_max)


def test_extra_factors_never_reduce_projection_error():
    report = run_study(tiny_study(replications=3, r_selector=TruePlus(3)))
    oracle, pc = report.settings[0].methods
    # projecting on extra sample eigenvectors moves chi_hat away from chi
    assert np.all(pc.err_avg >= oracle.err_avg - 1e-12)
    assert pc.mean_avg > 1.0


def test_identical_settings_draw_independent_panels():
    setting = small_setting()
    report = run_study(tiny_study(settings=(setting, setting), replications=2))
    first, second = report.settings
    assert not np.array_equal(first.methods[0].err_avg, second.methods[0].err_avg)


def test_thread_count_does_not_change_report():
    config = tiny_study(
        settings=(small_setting(), small_setting(model=Model2(varrho=0.5))),
        methods=(
            EstimatorSpec(method="pc", r_hat=1),
            EstimatorSpec(method="scaled", r_hat=1),
        ),
        replications=4,
    )
    serial = run_study(config)
    threaded = run_study(McStudyConfig(**{**config.__dict__, "threads": 3}))
    a = json.dumps(report_to_json(serial), sort_keys=True)
    b = json.dumps(report_to_json(threaded), sort_keys=True)
    assert a.replace('"threads": 1', '"threads": 3') == b


def test_scaled_method_reports_localisation_groups():
    config = tiny_study(
        settings=(small_setting(n_series=40, n_obs=60, r=2),),
        methods=(
            EstimatorSpec(method="pc", r_hat=1),
            EstimatorSpec(method="scaled", r_hat=1),
        ),
        replications=3,
        r_selector=TruePlus(2),
    )
    report = run_study(config)
    _, pc, scaled = report.settings[0].methods
    assert pc.loc_le_r is None and pc.loc_gt_r is None
    assert 0.0 < scaled.loc_le_r <= 1.0
    assert 0.0 < scaled.loc_gt_r <= 1.0


def test_study_fails_when_selector_needs_too_many_columns():
    config = tiny_study(r_selector=Fixed(30), replications=2)
    with pytest.raises(StudyFailed):
        run_study(config)


def test_injected_failures_excluded_from_every_aggregate():
    class FailOnce:
        name = "fail-once"

        def __init__(self):
            self.calls = 0

        def columns_needed(self, n, t, true_r):
            return true_r

        def select(self, spectrum, true_r):
            self.calls += 1
            if self.calls == 1:
                raise InvalidInput("injected failure")
            return true_r

    config = tiny_study(r_selector=FailOnce(), replications=12)
    report = run_study(config)
    setting = report.settings[0]
    assert setting.failures == 1
    assert setting.replications_done == 11
    assert any("injected failure" in msg for msg in setting.failure_messages)
    for result in setting.methods:
        assert result.err_avg.size == 11
        assert result.err_max.size == 11


def test_study_validation_errors():
    with pytest.raises(InvalidInput):
        run_study(tiny_study(settings=()))
    with pytest.raises(InvalidInput):
        run_study(tiny_study(replications=0))
    with pytest.raises(InvalidInput):
        run_study(tiny_study(threads=0))
    with pytest.raises(InvalidInput):
        run_study(tiny_study(r_selector=object()))
    dup = (EstimatorSpec(method="pc", r_hat=1), EstimatorSpec(method="pc", r_hat=3))
    with pytest.raises(InvalidInput):
        run_study(tiny_study(methods=dup))


def test_full_and_blockwise_labels_coexist():
    config = tiny_study(
        settings=(small_setting(n_series=30, n_obs=64),),
        methods=(
            EstimatorSpec(method="pc", r_hat=1),
            EstimatorSpec(method="pc", r_hat=1, blockwise=True),
        ),
        replications=2,
    )
    report = run_study(config)
    labels = [m.method for m in report.settings[0].methods]
    assert labels == [ORACLE_LABEL, "pc", "pc-block"]


# ---------------------------------------------------------------------------
# serialization


def test_json_report_layout():
    config = tiny_study(
        settings=(small_setting(), small_setting(model=Model2(varrho=0.25))),
        methods=(EstimatorSpec(method="scaled", r_hat=1),),
        replications=2,
        r_selector=TruePlus(1),
    )
    payload = report_to_json(run_study(config))
    assert payload["schema_version"] == 1
    assert payload["selector"] == "true+1"
    assert payload["replications"] == 2
    first, second = payload["settings"]
    assert first["model"] == "model1" and first["varrho"] is None
    assert second["model"] == "model2" and second["varrho"] == 0.25
    assert first["methods"][0]["method"] == ORACLE_LABEL
    assert set(first["r_hat_counts"]) == {"3"}
    scaled = first["methods"][1]
    assert len(scaled["err_avg"]) == 2
    assert scaled["loc_gt_r"] is not None
    json.dumps(payload)  # must be serializable as-is


def test_csv_row_accounting(tmp_path):
    config = tiny_study(
        settings=(small_setting(), small_setting(model=Model2(varrho=0.25))),
        methods=(
            EstimatorSpec(method="pc", r_hat=1),
            EstimatorSpec(method="scaled", r_hat=1),
        ),
        replications=2,
    )
    report = run_study(config)
    out = tmp_path / "study.csv"
    report_to_csv(report, out)
    with open(out, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == list(CSV_COLUMNS)
    body = rows[1:]
    # 2 settings x 2 methods x 2 metrics; the oracle stays out of the CSV
    assert len(body) == 8
    assert all(row[5] != ORACLE_LABEL for row in body)
    assert {row[7] for row in body} == {"err_avg", "err_max"}
    model1_rows = [row for row in body if row[0] == "model1"]
    assert all(row[4] == "" for row in model1_rows)
    model2_rows = [row for row in body if row[0] == "model2"]
    assert all(float(row[4]) == 0.25 for row in model2_rows)
    assert all(int(row[10]) == 2 for row in body)

    # %.17g floats roundtrip to the exact report values
    pc_avg = next(
        row for row in body
        if row[0] == "model1" and row[5] == "pc" and row[7] == "err_avg"
    )
    assert float(pc_avg[8]) == report.settings[0].methods[1].mean_avg
    assert float(pc_avg[9]) == report.settings[0].methods[1].sd_avg


def test_blockwise_study_errors_match_full_sample():
    config = McStudyConfig(
        settings=(
            SimConfig(n_series=200, n_obs=500, r=5, phi=1.0, model=Model1(), seed=0),
        ),
        methods=(
            EstimatorSpec(method="pc", r_hat=1),
            EstimatorSpec(method="pc", r_hat=1, blockwise=True),
        ),
        r_selector=BaiNgIC(),
        replications=5,
        base_seed=29,
    )
    report = run_study(config)
    _, full, block = report.settings[0].methods
    assert block.mean_avg == pytest.approx(full.mean_avg, rel=0.15)
