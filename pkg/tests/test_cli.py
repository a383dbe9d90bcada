import pytest

from gpmrpp.cli import main, parse_robot_rule
from gpmrpp.workspace import load_problem, problems_from

TINY = ["--population", "40", "--generations", "5", "--runs", "1"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_robot_rule_parsing():
    assert parse_robot_rule("leaves-minus-one") == {"robot_count_rule": "leaves-minus-one"}
    assert parse_robot_rule("explicit:3")["explicit_count"] == 3
    assert parse_robot_rule("leaf-multiplier:0.25")["leaf_multiplier"] == 0.25


def test_gen_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["--seed", "7", "gen", "--count", "3", "--seed-depth", "4", "--branching", "4", "--robots", "leaves-minus-one"]
    code, out, _ = run(capsys, *argv, "--out", str(a))
    assert code == 0 and len(out.splitlines()) == 3
    assert run(capsys, *argv, "--out", str(b))[0] == 0
    files = sorted(p.name for p in a.iterdir())
    assert len(files) == 3
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert len(problems_from([a])) == 3


@pytest.mark.parametrize("rule", ["explicit:0", "explicit:x", "leaf-multiplier:-1", "most"])
def test_gen_bad_robot_rule(tmp_path, capsys, rule):
    code, _, err = run(capsys, "--seed", "1", "gen", "--robots", rule, "--out", str(tmp_path))
    assert code == 2 and "error" in err


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GPMRPP_SEED", "7")
    run(capsys, "gen", "--out", str(tmp_path / "env"))
    run(capsys, "--seed", "7", "gen", "--out", str(tmp_path / "flag"))
    assert (tmp_path / "env" / "problem-0.txt").read_text() == (tmp_path / "flag" / "problem-0.txt").read_text()


def test_missing_seed_is_printed(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("GPMRPP_SEED", raising=False)
    code, out, _ = run(capsys, "gen", "--out", str(tmp_path))
    assert code == 0 and out.startswith("seed=")
    code, out, _ = run(capsys, "scenarios", "--out", str(tmp_path))
    assert code == 0 and "seed=" not in out


def test_scenarios(tmp_path, capsys):
    code, out, _ = run(capsys, "--seed", "0", "scenarios", "--out", str(tmp_path))
    assert code == 0
    assert sorted(p.stem for p in tmp_path.iterdir()) == sorted(out.split())


def test_train_then_run(tmp_path, capsys):
    run(capsys, "--seed", "0", "scenarios", "--out", str(tmp_path))
    prog = tmp_path / "prog.txt"
    hist = tmp_path / "hist.csv"
    code, out, _ = run(
        capsys, "--seed", "3", "train", str(tmp_path / "swap-1-head-on.txt"),
        "--out", str(prog), "--history", str(hist), "--population", "300", "--generations", "30", "--runs", "1",
    )
    assert code == 0, out
    assert len(hist.read_text().splitlines()) == 1 + 30
    code, out, _ = run(capsys, "run", str(prog), str(tmp_path / "swap-1-head-on.txt"))
    assert code == 0 and out.strip().startswith("solved=true steps=")


def test_train_rejects_bad_rates(tmp_path, capsys):
    run(capsys, "--seed", "0", "scenarios", "--out", str(tmp_path))
    code, _, err = run(capsys, "--seed", "0", "train", str(tmp_path), "--pa", "0.5", "--pc", "0.5", "--pm", "0.5")
    assert code == 2 and ("sum" in err or "equal" in err)


def test_train_unreadable_input(tmp_path, capsys):
    code, _, err = run(capsys, "--seed", "0", "train", str(tmp_path / "nope.txt"), *TINY)
    assert code == 1 and "error" in err


def test_run_straight_line(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("nodes 5\nedge 0 1\nedge 1 2\nedge 2 3\nedge 3 4\nrobot 0 0 4\n")
    (tmp_path / "g.txt").write_text("(if-robot-at-destination (stay) (move-toward-objective))\n")
    code, out, _ = run(capsys, "run", str(tmp_path / "g.txt"), str(tmp_path / "p.txt"), "--trace")
    lines = out.splitlines()
    assert code == 0 and lines[-1] == "solved=true steps=4"
    assert lines[0] == "t=0 robot 0 0" and len(lines) == 6


def test_run_cap_zero(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("nodes 3\nedge 0 1\nedge 1 2\nrobot 0 0 2\n")
    (tmp_path / "g.txt").write_text("(if-robot-at-destination (stay) (move-toward-objective))\n")
    code, out, _ = run(capsys, "run", str(tmp_path / "g.txt"), str(tmp_path / "p.txt"), "--cap", "0")
    assert out.strip() == "solved=false steps=0"


def test_run_malformed_program(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("nodes 3\nedge 0 1\nedge 1 2\nrobot 0 0 2\n")
    (tmp_path / "g.txt").write_text("(if-robot-at-destination (stay) (teleport))\n")
    code, _, err = run(capsys, "run", str(tmp_path / "g.txt"), str(tmp_path / "p.txt"))
    assert code != 0 and "teleport" in err


def test_experiment_stress_grouping_and_determinism(tmp_path, capsys):
    argv = ["--seed", "42", "experiment", "--mode", "stress", "--multipliers", "0.25,1.5", "--trials", "2",
            "--seed-depths", "3,4", *TINY]
    assert run(capsys, *argv, "--out", str(tmp_path / "a"))[0] == 0
    assert run(capsys, *argv, "--out", str(tmp_path / "b"))[0] == 0
    for name in ("records.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = (tmp_path / "a" / "summary.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in summary[1:]] == ["0.25", "1.5"]


def test_experiment_unknown_mode(capsys):
    code, _, err = run(capsys, "experiment", "--mode", "sideways")
    assert code == 2


def test_usage_error_exit_code(capsys):
    assert run(capsys)[0] == 2


def test_generated_files_reparse(tmp_path, capsys):
    run(capsys, "--seed", "9", "gen", "--count", "2", "--robots", "explicit:1", "--out", str(tmp_path))
    for f in tmp_path.iterdir():
        assert load_problem(f).robot_count == 1
