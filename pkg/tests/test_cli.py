"""
Tests for fairalloc/cli.py: subcommands driven through run(argv).

load_settings is patched to the defaults so a user config file never leaks in.
"""
import json
import sys
from pathlib import Path
from unittest.mock import patch

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))
from fairalloc.cli import auto_strategy, build_parser, run, solve
from fairalloc.config_loader import Settings
from fairalloc.errors import PreconditionError, ShapeError
from fairalloc.model import FairnessConcept, Instance, ProblemKind
from fairalloc.serialization import parse_instance, serialize_instance
from fairalloc.specialized import PreferenceClass

SEF, AEF, SAEF = FairnessConcept.SEF, FairnessConcept.AEF, FairnessConcept.SAEF
FIVE_TEN = Instance.from_lists([1, 10], [[5, 10], [5, 10]])
EQUAL_VALUES = Instance.from_lists([1, 2], [[1, 1], [1, 1]])


@pytest.fixture(autouse=True)
def default_settings():
    with patch("fairalloc.cli.load_settings", return_value=Settings(jobs=1)):
        yield


def write_instance(tmp_path, instance, name="instance.json"):
    path = tmp_path / name
    path.write_text(serialize_instance(instance), encoding="utf-8")
    return str(path)


def write_text(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

class TestCheck:
    def test_fair_allocation(self, tmp_path, capsys):
        inst = write_instance(tmp_path, FIVE_TEN)
        alloc = write_text(tmp_path, "alloc.json", '{"bundles": [[1], [2]]}')
        assert run(["check", inst, alloc, "--concept", "saef"]) == 0
        out = capsys.readouterr().out
        assert "allocation: a1: {r1}; a2: {r2}" in out
        assert "SAEF: fair" in out
        assert "complete: yes" in out and "house: yes" in out

    def test_envious_allocation(self, tmp_path, capsys):
        inst = write_instance(tmp_path, FIVE_TEN)
        alloc = write_text(tmp_path, "alloc.json", '{"bundles": [[1], [2]]}')
        assert run(["check", inst, alloc, "--concept", "aef"]) == 1
        out = capsys.readouterr().out
        assert "AEF: NOT fair" in out
        assert "(a2, a1)" in out

    def test_malformed_instance(self, tmp_path, capsys):
        inst = write_text(tmp_path, "bad.json", '{"n": 1}')
        alloc = write_text(tmp_path, "alloc.json", '{"bundles": [[1]]}')
        assert run(["check", inst, alloc]) == 2
        assert capsys.readouterr().err.startswith("ERROR:")

    def test_value_out_of_range(self, tmp_path, capsys):
        text = '{"n": 1, "m": 1, "weights": [1], "utilities": [[100000000000000000000]]}'
        inst = write_text(tmp_path, "huge.json", text)
        alloc = write_text(tmp_path, "alloc.json", '{"bundles": [[1]]}')
        assert run(["check", inst, alloc]) == 2
        assert capsys.readouterr().err.startswith("ERROR: invalid instance document")

    def test_missing_file(self, tmp_path, capsys):
        assert run(["check", str(tmp_path / "nope.json"), str(tmp_path / "nope2.json")]) == 2
        assert "ERROR:" in capsys.readouterr().err

    def test_allocation_for_wrong_instance(self, tmp_path, capsys):
        inst = write_instance(tmp_path, FIVE_TEN)
        alloc = write_text(tmp_path, "alloc.json", '{"bundles": [[1], [2], [3]]}')
        assert run(["check", inst, alloc]) == 2


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

class TestSolve:
    def test_auto_finds_unique_witness(self, tmp_path, capsys):
        assert run(["solve", write_instance(tmp_path, FIVE_TEN)]) == 0
        assert capsys.readouterr().out.strip() == "a1: {r1}; a2: {r2}"

    def test_no_allocation(self, tmp_path, capsys):
        path = write_instance(tmp_path, EQUAL_VALUES)
        assert run(["solve", path, "--concept", "aef", "--strategy", "ilp"]) == 1
        assert capsys.readouterr().out.strip() == "none"

    def test_json_witness(self, tmp_path, capsys):
        path = write_instance(tmp_path, FIVE_TEN)
        assert run(["solve", path, "--strategy", "exact", "--json"]) == 0
        assert json.loads(capsys.readouterr().out) == {"bundles": [[1], [2]]}

    def test_dp_needs_identical_preferences(self, tmp_path, capsys):
        path = write_instance(tmp_path, Instance.from_lists([1, 1], [[1, 0], [0, 1]]))
        assert run(["solve", path, "--strategy", "dp"]) == 2
        assert "identical" in capsys.readouterr().err

    def test_house_needs_enough_resources(self, tmp_path, capsys):
        path = write_instance(tmp_path, Instance.from_lists([1, 1, 1], [[1, 1]] * 3))
        assert run(["solve", path, "--kind", "house"]) == 2

    def test_budget_refusal(self, tmp_path, capsys):
        path = write_instance(tmp_path, Instance.from_lists([1, 2, 3], [[1, 2, 3, 4, 5]] * 2 + [[5, 4, 3, 2, 1]]))
        assert run(["solve", path, "--strategy", "exact", "--leaf-budget", "5"]) == 2
        assert "budget" in capsys.readouterr().err


@pytest.mark.parametrize("strategy", ["exact", "ilp"])
@pytest.mark.parametrize("concept", [SEF, AEF, SAEF])
def test_allocation_strategies_agree(strategy, concept):
    for inst in (FIVE_TEN, EQUAL_VALUES):
        expected = solve(inst, concept, strategy="exact")
        got = solve(inst, concept, strategy=strategy)
        assert (got is None) == (expected is None)


def test_strategies_agree_on_huge_values():
    inst = Instance.from_lists([1, 2], [[2**62] * 3] * 2)
    exact = solve(inst, SAEF, strategy="exact")
    ilp = solve(inst, SAEF, strategy="ilp")
    assert exact is not None and ilp is not None


def test_house_strategies():
    inst = Instance.from_lists([1, 2], [[1, 0, 1], [1, 1, 0]])
    assert solve(inst, SAEF, ProblemKind.HOUSE, "matching") is not None
    assert solve(inst, SEF, ProblemKind.HOUSE, "matching") is not None
    with pytest.raises(PreconditionError):
        solve(inst, AEF, ProblemKind.HOUSE, "matching")
    with pytest.raises(PreconditionError):
        solve(inst, SAEF, ProblemKind.HOUSE, "ilp")
    with pytest.raises(PreconditionError):
        solve(inst, SAEF, ProblemKind.ALLOCATION, "matching")
    identical = Instance.from_lists([1, 2], [[1, 2, 3], [1, 2, 3]])
    assert solve(identical, SAEF, ProblemKind.HOUSE, "dp") is not None
    with pytest.raises(PreconditionError):
        solve(identical, SEF, ProblemKind.HOUSE, "dp")
    with pytest.raises(ShapeError):
        solve(Instance.from_lists([1, 1], [[1], [1]]), SAEF, ProblemKind.HOUSE, "exact")


@pytest.mark.parametrize("pc, concept, kind, expected", [
    (PreferenceClass(True, True), AEF, ProblemKind.ALLOCATION, "dp"),
    (PreferenceClass(True, False), SAEF, ProblemKind.ALLOCATION, "exact"),
    (PreferenceClass(False, True), SAEF, ProblemKind.HOUSE, "matching"),
    (PreferenceClass(True, False), SAEF, ProblemKind.HOUSE, "dp"),
    (PreferenceClass(True, True), AEF, ProblemKind.HOUSE, "exact"),
])
def test_auto_strategy(pc, concept, kind, expected):
    assert auto_strategy(pc, concept, kind) == expected


# ---------------------------------------------------------------------------
# generate / types / reduce / experiment
# ---------------------------------------------------------------------------

def test_generate_writes_document(tmp_path, capsys):
    out = tmp_path / "gen" / "inst.json"
    argv = ["generate", "--n", "3", "--m", "5", "--culture", "spup", "--weight-range", "2-4", "--seed", "9", "--out", str(out)]
    assert run(argv) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["meta"] == {"culture": "spup", "seed": 9, "value_range": [1, 10000], "weight_range": [2, 4]}
    inst = parse_instance(out.read_text(encoding="utf-8"))
    assert (inst.n, inst.m) == (3, 5)
    assert run(argv) == 0
    assert parse_instance(out.read_text(encoding="utf-8")) == inst


def test_generate_rejects_bad_range(capsys):
    with pytest.raises(SystemExit):
        run(["generate", "--n", "2", "--m", "2", "--value-range", "ten"])


def test_generate_invalid_config(capsys):
    assert run(["generate", "--n", "0", "--m", "2"]) == 2
    assert "ERROR:" in capsys.readouterr().err


def test_types_and_lp(tmp_path, capsys):
    path = write_instance(tmp_path, Instance.from_lists([1, 1], [[1, 1, 0], [0, 0, 1]]))
    lp = tmp_path / "model.lp"
    assert run(["types", path, "--lp", str(lp), "--concept", "aef"]) == 0
    out = capsys.readouterr().out
    assert "2 resource type(s):" in out
    text = lp.read_text(encoding="utf-8")
    assert "envy_1_2" in text and text.endswith("End\n")


def test_reduce_and_verify(tmp_path, capsys):
    cnf = write_text(tmp_path, "f.cnf", "c tiny\np cnf 1 1\n1 1 -1 0\n")
    out = tmp_path / "reduced.json"
    gadget = tmp_path / "gadget.json"
    assert run(["reduce", cnf, "--out", str(out), "--gadget-out", str(gadget), "--verify"]) == 0
    assert "equivalent: yes" in capsys.readouterr().out
    inst = parse_instance(out.read_text(encoding="utf-8"))
    assert inst.n == 6
    assert json.loads(gadget.read_text(encoding="utf-8"))["big_m"] == 8


def test_reduce_rejects_short_clause(tmp_path, capsys):
    cnf = write_text(tmp_path, "f.cnf", "p cnf 2 1\n1 -2 0\n")
    assert run(["reduce", cnf]) == 2
    assert "exactly 3" in capsys.readouterr().err


def test_experiment_writes_csv(tmp_path, capsys):
    out = tmp_path / "exp.csv"
    argv = [
        "experiment", "--n", "2", "3", "--m", "4", "--trials", "5", "--cultures", "ic",
        "--weight-range", "1-5", "--jobs", "1", "--no-progress", "--out", str(out),
        "--repro-dir", str(tmp_path / "repro"),
    ]
    assert run(argv) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 2 + 1
    assert "not applicable" in capsys.readouterr().out


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
