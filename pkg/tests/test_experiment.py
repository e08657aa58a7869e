"""
Unit tests for fairalloc/experiment.py: trial generation, cell counting,
cross-checks and the comparison report.
"""
import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest
from pydantic import ValidationError

sys.path.insert(0, str(Path(__file__).parent.parent))
from fairalloc.errors import SolverDisagreementError
from fairalloc.experiment import (
    REFERENCE_RATIOS,
    CellResult,
    ExperimentConfig,
    ExperimentReport,
    TrialOutcome,
    estimate_leaves,
    run_experiment,
)
from fairalloc.gen import Culture
from fairalloc.model import ALL_CONCEPTS, FairnessConcept, ProblemKind

SEF, AEF, SAEF = FairnessConcept.SEF, FairnessConcept.AEF, FairnessConcept.SAEF


def small_config(tmp_path, **overrides) -> ExperimentConfig:
    params = dict(
        n_values=[2, 3],
        m=4,
        trials=20,
        weight_ranges=[(1, 5)],
        jobs=1,
        seed=17,
        repro_dir=tmp_path / "repro",
    )
    params.update(overrides)
    return ExperimentConfig(**params)


def table_rows(report: ExperimentReport) -> list[str]:
    return [line for line in report.to_csv().splitlines() if not line.startswith("#")]


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

class TestExperimentConfig:
    def test_defaults_cover_the_published_grid(self):
        config = ExperimentConfig()
        assert config.n_values == [5, 6, 7, 8] and config.m == 8
        assert config.trials == 2000
        assert config.weight_ranges == [(1, 100), (101, 200)]

    @pytest.mark.parametrize("overrides", [
        {"trials": 0},
        {"n_values": []},
        {"n_values": [0]},
        {"weight_ranges": [(3, 2)]},
        {"kind": ProblemKind.HOUSE, "n_values": [5], "m": 4},
    ])
    def test_invalid(self, overrides):
        with pytest.raises(ValidationError):
            ExperimentConfig(**overrides)

    def test_leaf_estimates(self):
        assert estimate_leaves(ExperimentConfig(m=4, n_values=[3]), 3) == 36
        assert estimate_leaves(ExperimentConfig(m=4, n_values=[3], kind=ProblemKind.HOUSE), 3) == 24


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def test_small_run_counts(tmp_path):
    config = small_config(tmp_path)
    report = run_experiment(config, progress=False)
    assert len(report.cells) == 2 * 1 * 2
    for cell in report.cells:
        assert cell.complete
        sef, aef, saef = (cell.counts[c] for c in ALL_CONCEPTS)
        assert saef >= max(sef, aef)
        assert 0 <= saef <= cell.trials


def test_run_is_deterministic(tmp_path):
    config = small_config(tmp_path)
    first = run_experiment(config, progress=False)
    second = run_experiment(config, progress=False)
    assert table_rows(first) == table_rows(second)


def test_worker_count_does_not_change_counts(tmp_path):
    serial = run_experiment(small_config(tmp_path, cultures=[Culture.IC]), progress=False)
    parallel = run_experiment(small_config(tmp_path, cultures=[Culture.IC], jobs=2), progress=False)
    assert table_rows(serial) == table_rows(parallel)


def test_csv_layout(tmp_path):
    report = run_experiment(small_config(tmp_path, concepts=[SAEF], cultures=[Culture.SPUP]), progress=False)
    lines = report.to_csv().splitlines()
    assert lines[0].startswith("culture,weight_range,kind,n,m,trials,sef_ratio,aef_ratio,saef_ratio,seed")
    first = lines[1].split(",")
    assert first[:6] == ["spup", "1-5", "allocation", "2", "4", "20"]
    assert first[6] == "" and first[7] == ""
    assert len(first[8].split(".")[1]) == 4
    assert lines[-1].startswith("# generated ")


def test_budget_refusals_mark_cells_incomplete(tmp_path):
    report = run_experiment(small_config(tmp_path, n_values=[3], trials=3, leaf_budget=10), progress=False)
    cell = report.cells[0]
    assert cell.refused == 3 and not cell.complete
    assert cell.ratio(SAEF) == 0.0
    assert "INCOMPLETE" in report.comparison()


def test_house_run(tmp_path):
    report = run_experiment(small_config(tmp_path, kind=ProblemKind.HOUSE, n_values=[2, 4]), progress=False)
    assert all(cell.kind is ProblemKind.HOUSE for cell in report.cells)


def test_identical_01_trials_are_cross_checked(tmp_path):
    # value range 1-1 makes every instance identical and 0/1, so the polynomial solvers run.
    for kind in ProblemKind:
        config = small_config(tmp_path, value_range=(1, 1), kind=kind)
        report = run_experiment(config, progress=False)
        assert all(cell.complete for cell in report.cells)
    assert not (tmp_path / "repro").exists()


def test_disagreement_writes_repro(tmp_path, monkeypatch):
    def always_none(instance):
        return None

    monkeypatch.setattr("fairalloc.experiment.saef_identical01_dp", always_none)
    config = small_config(tmp_path, value_range=(1, 1), n_values=[2], cultures=[Culture.IC])
    with pytest.raises(SolverDisagreementError, match="always_none"):
        run_experiment(config, progress=False)
    repros = list((tmp_path / "repro").glob("repro_ic_w0_n2_t*.json"))
    assert len(repros) == 1
    assert '"reason"' in repros[0].read_text(encoding="utf-8")


def test_cross_check_can_be_disabled(tmp_path, monkeypatch):
    monkeypatch.setattr("fairalloc.experiment.saef_identical01_dp", lambda instance: None)
    config = small_config(tmp_path, value_range=(1, 1), n_values=[2], cross_check=False)
    run_experiment(config, progress=False)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

def _cell(n, ratios, culture=Culture.IC, weights=(1, 100), trials=10_000) -> CellResult:
    cell = CellResult(culture, weights, ProblemKind.ALLOCATION, n, 8, trials)
    for concept, ratio in zip(ALL_CONCEPTS, ratios):
        cell.counts[concept] = round(ratio * trials)
    return cell


def _report(cells) -> ExperimentReport:
    config = ExperimentConfig(n_values=sorted({c.n for c in cells}), trials=10_000)
    return ExperimentReport(config, cells, datetime(2026, 1, 1, tzinfo=timezone.utc), 1.0)


def test_cell_add_and_ratios():
    cell = CellResult(Culture.IC, (1, 100), ProblemKind.ALLOCATION, 5, 8, 4)
    for flags in [(True, False, True), (False, False, True), None, (True, True, True)]:
        cell.add(TrialOutcome(flags))
    assert cell.refused == 1
    assert cell.ratios() == (2 / 3, 1 / 3, 1.0)


def test_reference_match_is_best_setting():
    exact = [_cell(n, REFERENCE_RATIOS[n]) for n in (5, 6)]
    off = [_cell(n, (0.5, 0.4, 0.6), weights=(101, 200)) for n in (5, 6)]
    report = _report(exact + off)
    setting = (Culture.IC, (1, 100))
    assert report.deviation(setting) == pytest.approx(0.0, abs=1e-4)
    assert report.best_setting() == setting
    assert report.hits_band(setting)
    assert not report.hits_band((Culture.IC, (101, 200)))
    assert report.ordering_holds(setting)
    text = report.comparison()
    assert "best match: ic / weights 1-100" in text
    assert "n=5 band hit" in text


def test_ordering_violations():
    rising = _report([_cell(5, (0.1, 0.05, 0.8)), _cell(6, (0.2, 0.05, 0.7))])
    assert not rising.ordering_holds((Culture.IC, (1, 100)))
    inverted = _report([_cell(5, (0.1, 0.2, 0.8))])
    assert not inverted.ordering_holds((Culture.IC, (1, 100)))
    zero_avg = _report([_cell(8, (0.0, 0.0, 0.3))])
    assert zero_avg.ordering_holds((Culture.IC, (1, 100)))


def test_comparison_not_applicable_off_grid(tmp_path):
    report = run_experiment(small_config(tmp_path, n_values=[2], cultures=[Culture.IC]), progress=False)
    assert report.best_setting() is None
    assert "not applicable" in report.comparison()
