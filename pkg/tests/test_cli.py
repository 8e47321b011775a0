"""The command-line front end, driven in-process."""

import json

import pytest
from click.testing import CliRunner

from lincheck.cli import main
from lincheck.histories import History, history_from_json, history_to_json, is_sequential, linearisable_hw
from lincheck.stacks import stack_oracle

from conftest import H23, H32, H32_REPAIRED, H87


@pytest.fixture
def runner():
    return CliRunner()


def _write(tmp_path, name: str, h: History) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(history_to_json(h)))
    return str(path)


# -- check ---------------------------------------------------------------------

def test_check_linearisable_history(runner, tmp_path):
    r = runner.invoke(main, ["check", _write(tmp_path, "h23.json", H23)])
    assert r.exit_code == 0
    assert r.stdout.startswith("linearisable; witness:")


@pytest.mark.parametrize("h", [H32, H32_REPAIRED])
def test_check_rejects(runner, tmp_path, h):
    r = runner.invoke(main, ["check", _write(tmp_path, "h.json", h)])
    assert r.exit_code == 1 and "not linearisable" in r.stdout


def test_check_flags_illegal_input_in_json(runner, tmp_path):
    r = runner.invoke(main, ["check", "--json", _write(tmp_path, "h32.json", H32)])
    obj = json.loads(r.stdout)
    assert r.exit_code == 1 and obj["legal"] is False and obj["witness"] is None


def test_check_json_witness_round_trips(runner, tmp_path):
    r = runner.invoke(main, ["check", "--json", _write(tmp_path, "h87.json", H87), "--valdom", "1"])
    assert r.exit_code == 0
    obj = json.loads(r.stdout)
    hs = history_from_json(obj["witness"])
    assert is_sequential(hs) and stack_oracle().accepts(hs)
    assert obj["config"] == {"file": "h87.json", "spec": "stack", "valdom": [1]}


@pytest.mark.parametrize("content", ['{"events": [', "[]", '{"events": [{"op": "push"}]}'])
def test_check_malformed_input(runner, tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert runner.invoke(main, ["check", str(path)]).exit_code == 2


def test_check_missing_file_and_bad_valdom(runner, tmp_path):
    assert runner.invoke(main, ["check", str(tmp_path / "absent.json")]).exit_code == 2
    good = _write(tmp_path, "h23.json", H23)
    assert runner.invoke(main, ["check", good, "--valdom", "a,b"]).exit_code == 2
    assert runner.invoke(main, ["check", good, "--valdom", ""]).exit_code == 2


# -- simulate ------------------------------------------------------------------

def test_simulate_emits_linearisable_histories(runner, tmp_path):
    out = tmp_path / "ts"
    r = runner.invoke(main, ["simulate", "--program", "TS", "--schedule", "random", "--samples", "60",
                             "--seed", "2", "--emit-histories", str(out), "--json"])
    assert r.exit_code == 0
    report = json.loads(r.stdout)
    files = sorted(out.iterdir())
    assert report["histories"] == len(files) > 0 and report["config"]["run"] == "HTS"
    for f in files:
        assert runner.invoke(main, ["check", str(f)]).exit_code == 0


def test_abstract_stack_histories_are_sequential(runner, tmp_path):
    out = tmp_path / "as"
    r = runner.invoke(main, ["simulate", "--program", "AS", "--emit-histories", str(out)])
    assert r.exit_code == 0
    for f in out.iterdir():
        h = history_from_json(f.read_text())
        assert is_sequential(h) and linearisable_hw(h, stack_oracle(), (1, 2)) is not None


def test_simulate_is_reproducible(runner, tmp_path):
    args = ["simulate", "--program", "LS", "--schedule", "random", "--samples", "30", "--seed", "1",
            "--json", "--dump-trace"]
    a, b = runner.invoke(main, args), runner.invoke(main, args)
    assert a.exit_code == b.exit_code == 0 and a.stdout == b.stdout


def test_simulate_default_mode_depends_on_the_operation_count(runner):
    r = runner.invoke(main, ["simulate", "--program", "AS", "--procs", "3", "--samples", "5", "--json"])
    assert json.loads(r.stdout)["config"]["schedule"] == "random"
    r = runner.invoke(main, ["simulate", "--program", "AS", "--procs", "1", "--json"])
    assert json.loads(r.stdout)["config"]["schedule"] == "exhaustive"


def test_simulate_cap(runner):
    r = runner.invoke(main, ["simulate", "--program", "TS", "--schedule", "exhaustive"],
                      env={"LINCHECK_CAP": "100"})
    assert r.exit_code == 3 and "100" in r.stderr


@pytest.mark.parametrize("args", [
    ["--program", "QS"],
    ["--program", "AS", "--procs", "0"],
    ["--program", "AS", "--values", "x"],
    ["--program", "AS", "--horizon", "1"],
])
def test_simulate_input_errors(runner, args):
    assert runner.invoke(main, ["simulate"] + args).exit_code == 2


# -- refine --------------------------------------------------------------------

def test_refine_linked_by_treiber(runner):
    r = runner.invoke(main, ["refine", "--abstract", "LS", "--concrete", "TS", "--procs", "1"])
    assert r.exit_code == 0 and r.stdout.startswith("holds-on-all")


def test_refine_data(runner):
    r = runner.invoke(main, ["refine", "--abstract", "HAS", "--concrete", "HLS", "--kind", "data",
                             "--sim", "simts", "--procs", "1", "--json"])
    assert r.exit_code == 0
    parts = json.loads(r.stdout)["verdict"]["parts"]
    assert set(parts) == {"refinit", "ref1:split", "ref1:not-split", "ref2"}


def test_refine_against_unsatisfiable_enforcement(runner):
    r = runner.invoke(main, ["refine", "--abstract", "enf-false:LS", "--concrete", "LS", "--procs", "1",
                             "--json"])
    assert r.exit_code == 1
    verdict = json.loads(r.stdout)["verdict"]
    assert verdict["outcome"] == "counterexample" and verdict["witness_trace"]


def test_refine_data_needs_a_simulation(runner):
    r = runner.invoke(main, ["refine", "--abstract", "HAS", "--concrete", "HLS", "--kind", "data"])
    assert r.exit_code == 2


def test_timing_goes_to_stderr(runner):
    r = runner.invoke(main, ["refine", "--abstract", "AS", "--concrete", "AS", "--procs", "1", "--json"])
    json.loads(r.stdout)
    assert r.stderr.strip().startswith("[") and r.stderr.strip().endswith("s]")
