"""Command-line interface: exit codes, stable output, negative controls."""

import json

import pytest

from nestedwalk import __version__
from nestedwalk.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_generated_instance(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "--n", "12", "--seed", "0")
    assert code == 0
    data = json.loads(out)
    assert data["found"] is True
    values = data["config"]["instance"]["values"]
    t = data["triple"]
    assert len(t) == 3
    assert values[t[0] - 1] == values[t[1] - 1] == values[t[2] - 1]
    assert data["config"]["version"] == __version__
    assert "counters" in data["ledger"]


def test_solve_output_byte_stable(capsys):
    _, out1, _ = run(capsys, "solve", "--n", "12", "--seed", "5")
    _, out2, _ = run(capsys, "solve", "--n", "12", "--seed", "5")
    assert out1 == out2


def test_solve_instance_file_and_out(capsys, tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"values": [4, 9, 4, 1, 4]}))
    target = tmp_path / "result.json"
    code, out, _ = run(capsys, "solve", "--instance", str(inst),
                       "--out", str(target))
    assert code == 0
    assert out == ""
    data = json.loads(target.read_text())
    assert data["triple"] == [1, 3, 5]


def test_solve_no_triple_exit_1(capsys, tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"values": [1, 2, 3, 4, 5, 6]}))
    code, out, _ = run(capsys, "solve", "--instance", str(inst))
    assert code == 1
    assert json.loads(out)["found"] is False


def test_solve_corrupt_json_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "solve", "--instance", str(bad))
    assert code == 2
    assert "error:" in err


def test_solve_schema_violations_exit_2(capsys, tmp_path):
    for payload in ('{"nope": 1}', '{"values": "abc"}', '{"values": [1, "x"]}'):
        bad = tmp_path / "bad.json"
        bad.write_text(payload)
        code, _, err = run(capsys, "solve", "--instance", str(bad))
        assert code == 2


def test_solve_missing_input_exit_2(capsys):
    code, _, err = run(capsys, "solve")
    assert code == 2
    assert "error:" in err


def test_solve_explicit_params(capsys):
    code, out, _ = run(capsys, "solve", "--n", "12", "--seed", "2",
                       "--s1", "4", "--s2", "1", "--m", "1")
    assert code in (0, 1)
    data = json.loads(out)
    assert data["params"]["s1"] == 4


def test_verify_battery_passes(capsys):
    code, out, _ = run(capsys, "verify", "--seed", "0")
    assert code == 0
    report = json.loads(out)
    assert report["passed"] is True
    names = {c["name"] for c in report["checks"]}
    assert {"setup-uniformity", "garbage-symmetry", "garbage-normalization",
            "diffusion-with-garbage", "marked-count-oracle",
            "unique-encoding", "pairwise-hash-uniformity"} <= names
    assert all(c["passed"] for c in report["checks"])


def test_verify_negative_control(capsys):
    code, out, _ = run(capsys, "verify", "--seed", "0", "--perturb-garbage")
    assert code == 1
    report = json.loads(out)
    assert report["passed"] is False
    failing = [c["name"] for c in report["checks"] if not c["passed"]]
    assert "garbage-symmetry" in failing


def test_verify_byte_stable(capsys):
    _, out1, _ = run(capsys, "verify", "--seed", "3")
    _, out2, _ = run(capsys, "verify", "--seed", "3")
    assert out1 == out2


def test_cost_single_n(capsys):
    code, out, _ = run(capsys, "cost", "--n", "4096")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0].startswith("n,s1,s2,cost")
    assert len(lines) == 2
    assert lines[1].split(",")[0] == "4096"


def test_cost_grid_with_slopes(capsys):
    code, out, _ = run(capsys, "cost")
    assert code == 0
    assert out.strip().split("\n")[-1].startswith("# slopes,s1=")
    slope = float(out.strip().split("s1=")[1].split(",")[0])
    assert abs(slope - 5 / 7) <= 0.02


def test_unknown_command_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["frobnicate"])
