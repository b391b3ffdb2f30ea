import json
import subprocess
import sys

import pytest

from advplan.cli import main
from advplan.domains import AIR_CARGO_DOMAIN, AIR_CARGO_PROBLEM


@pytest.fixture
def files(tmp_path):
    (tmp_path / "domain.pddl").write_text(AIR_CARGO_DOMAIN)
    (tmp_path / "problem.pddl").write_text(AIR_CARGO_PROBLEM)
    (tmp_path / "maze.txt").write_text("S..\n##.\nG..\n")
    (tmp_path / "graph.txt").write_text("3 0 1\n0 1 1\n0 2 1\n2 1 1\n")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def task_args(d):
    return ["--domain", d / "domain.pddl", "--problem", d / "problem.pddl"]


def test_plan_strips(files, capsys):
    code, out, _ = run(capsys, "plan", *task_args(files), "--search", "bfs")
    assert code == 0
    assert len([ln for ln in out.splitlines() if ln.startswith("(")]) == 6
    assert out.strip().endswith("; cost 6")


def test_plan_and_validate_round_trip(files, capsys):
    plan = files / "plan.txt"
    assert run(capsys, "plan", *task_args(files), "--out", plan)[0] == 0
    code, out, _ = run(capsys, "validate", *task_args(files), "--plan", plan)
    assert code == 0 and json.loads(out) == {"valid": True, "cost": 6, "steps": 6}


def test_validate_invalid_plan(files, capsys):
    plan = files / "bad.txt"
    plan.write_text("(FLY p1 SFO SFO)\n(UNLOAD c1 p1 SFO)\n")
    code, out, err = run(capsys, "validate", *task_args(files), "--plan", plan)
    assert code != 0
    assert json.loads(out)["step"] == 2
    assert json.loads(err)["error"] == "invalid-plan"


def test_plan_maze(files, capsys):
    code, out, _ = run(capsys, "plan", "--maze", files / "maze.txt")
    assert code == 0 and out.strip().endswith("; cost 6")


def test_error_categories(files, capsys):
    code, _, err = run(capsys, "plan", "--domain", files / "missing.pddl", "--problem", files / "problem.pddl")
    assert code != 0 and json.loads(err)["error"] == "io"
    (files / "broken.pddl").write_text("(define (problem x)")
    code, _, err = run(capsys, "plan", "--domain", files / "domain.pddl", "--problem", files / "broken.pddl")
    assert code != 0 and json.loads(err)["error"] == "parse"
    (files / "walled.txt").write_text("S#G\n")
    code, _, err = run(capsys, "plan", "--maze", files / "walled.txt")
    assert code != 0 and json.loads(err)["error"] == "unsolvable"
    code, _, err = run(capsys, "attack", "--maze", files / "maze.txt")
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_gen_mazes(files, capsys):
    out = files / "mazes"
    assert run(capsys, "gen-mazes", "--count", 3, "--seed", 4, "--out", out)[0] == 0
    assert sorted(p.name for p in out.iterdir()) == ["maze-00004.txt", "maze-00005.txt", "maze-00006.txt"]


def test_gen_table_and_online_attack(files, capsys):
    table = files / "grid.table"
    assert run(capsys, "gen-table", "--instances", 30, "--out", table)[0] == 0
    (files / "mazes").mkdir()
    run(capsys, "gen-mazes", "--count", 1, "--seed", 2, "--out", files / "mazes")
    maze = files / "mazes" / "maze-00002.txt"
    code, out, _ = run(capsys, "attack", "--maze", maze, "--threat", "online-black_box",
                       "--table", table, "-k", 2, "--transcript", files / "t.jsonl")
    assert code == 0
    rec = json.loads(out)
    assert rec["threat"] == "online-black_box" and len(rec["removed"]) <= 2
    events = [json.loads(ln) for ln in (files / "t.jsonl").read_text().splitlines()]
    assert events[-1]["action"] in ("goal", "stuck")


def test_gen_table_strips_and_offline_attack(files, capsys):
    table = files / "strips.table"
    assert run(capsys, "gen-table", "--flavor", "strips", "--instances", 15, "--out", table)[0] == 0
    code, out, _ = run(capsys, "attack", *task_args(files), "--threat", "offline-black_box",
                       "--table", table, "-k", 1)
    assert code == 0 and json.loads(out)["baseline_cost"] == 6


def test_oracle_attack(files, capsys):
    code, out, _ = run(capsys, "attack", "--maze", files / "maze.txt", "--oracle")
    rec = json.loads(out)
    assert code == 0 and rec["attacked_cost"] == "inf" and rec["removed"] == ["0,1"]


def test_reduce_mvap(files, capsys):
    code, out, _ = run(capsys, "reduce-mvap", files / "graph.txt", "-k", 1, "--h", 2,
                       "--out-domain", files / "d.pddl", "--out-problem", files / "p.pddl")
    rec = json.loads(out)
    assert code == 0 and rec["d_mvap"] is True and rec["d_advcp"] is True and rec["shortest_path"] == 1
    code, out, _ = run(capsys, "plan", "--domain", files / "d.pddl", "--problem", files / "p.pddl")
    assert code == 0 and out.strip().endswith("; cost 1")


def test_bench_config_and_overrides(files, capsys):
    code, out, _ = run(capsys, "bench", "--preset", "air-cargo", "--set", "corpus_count=4", "--dump-config")
    assert code == 0 and "corpus_count = 4" in out
    cfg = files / "exp.ini"
    cfg.write_text(out)
    code, out, _ = run(capsys, "bench", "--config", cfg, "--set", "budgets=1", "--set", "table_instances=10",
                       "--set", "threats=offline-black_box", "--out", files / "res")
    assert code == 0 and "offline-black_box" in out
    assert (files / "res" / "air-cargo.csv").exists()
    code, _, err = run(capsys, "bench", "--set", "nonsense=1")
    assert code != 0 and json.loads(err)["error"] == "config"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "advplan.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "reduce-mvap" in proc.stdout
