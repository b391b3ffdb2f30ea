import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from advplan import attacks
from advplan.attacks import (
    THREAT_MODELS,
    BaselineUnsolvableError,
    CombinatorialBoundError,
    NoSuccessorError,
    ThreatModel,
    brute_force_attack,
    offline_attack,
    online_attack,
    predict_next_state,
    replay_walk,
    threat_model,
)
from advplan.domains import AIR_CARGO_DOMAIN, random_air_cargo
from advplan.grid import INF, Grid, generate_maze, shortest_distance
from advplan.planner import GREEDY, OPTIMAL, solve
from advplan.strips import ground_task, parse_task, trajectory
from advplan.windows import (
    WindowTable,
    build_table,
    extract_strips_window,
    normalize_window,
)

ONE_CARGO = """(define (problem one) (:domain air-cargo)
  (:objects p1 - plane c1 - cargo SFO JFK - airport)
  (:init (At c1 SFO) (At p1 SFO)) (:goal (At c1 JFK)))"""


@pytest.fixture(scope="module")
def one_cargo():
    return ground_task(parse_task(AIR_CARGO_DOMAIN, ONE_CARGO))


@pytest.fixture(scope="module")
def grid_table():
    mazes = [generate_maze(15, 15, 0.25, 1000 + s, placement="random") for s in range(80)]
    return build_table(mazes, "grid", threshold=0)


@pytest.fixture(scope="module")
def strips_table():
    return build_table([random_air_cargo(2, 2, 3, 500 + s) for s in range(40)], "strips", threshold=0)


def test_threat_models():
    assert len(THREAT_MODELS) == 5
    for name in THREAT_MODELS:
        assert threat_model(name).name == name
    with pytest.raises(ValueError):
        ThreatModel("offline", "informed")
    with pytest.raises(ValueError):
        threat_model("online-informed", k=11)
    assert threat_model("online-informed", 3).with_budget(1).k == 1


def test_grid_brute_force_disconnects():
    grid = Grid.from_ascii("S..\n##.\nG..\n")
    report = brute_force_attack(grid, k=1)
    assert report.baseline_cost == 6
    assert report.attacked_cost == INF and report.removed == [(0, 1)]
    assert shortest_distance(grid.with_wall((0, 1))) == INF
    online = brute_force_attack(grid, k=1, online=True)
    assert online.attacked_cost == INF and online.removed == [(0, 1)]


def test_grid_brute_force_matches_exhaustive_placement():
    # every free cell other than start and goal, not only path cells
    for seed in range(20):
        grid = generate_maze(5, 5, 0.2, seed, placement="random")
        best = max(shortest_distance(grid.with_wall(c)) for c in grid.cells()
                   if grid.free(c) and c not in (grid.start, grid.goal))
        best = max(best, shortest_distance(grid))
        assert brute_force_attack(grid, k=1).attacked_cost == best


def test_unload_removal_unsolvable(one_cargo):
    unload = one_cargo.operator("UNLOAD", "c1", "p1", "JFK")
    assert solve(one_cargo.without([unload])).cost == INF
    report = brute_force_attack(one_cargo, OPTIMAL, k=1)
    assert report.baseline_cost == 3 and report.unsolvable and report.success


def test_k_zero_is_noop(one_cargo, cargo, strips_table, grid_table):
    r = brute_force_attack(one_cargo, OPTIMAL, k=0)
    assert r.removed == [] and r.attacked_cost == r.baseline_cost
    r = offline_attack(cargo, strips_table, threat_model("offline-black_box", 0))
    assert r.removed == [] and r.attacked_cost == r.baseline_cost == 6
    grid = generate_maze(15, 15, 0.25, 5, placement="random")
    r, _ = online_attack(grid, grid_table, threat_model("online-informed", 0))
    assert r.removed == [] and r.attacked_cost == r.baseline_cost


def test_brute_force_errors(one_cargo):
    blocked = one_cargo.without([one_cargo.operator("LOAD", "c1", "p1", "SFO")])
    with pytest.raises(BaselineUnsolvableError):
        brute_force_attack(blocked, OPTIMAL, 1)
    with pytest.raises(BaselineUnsolvableError):
        brute_force_attack(Grid.from_ascii("S#G\n"), k=1)
    with pytest.raises(CombinatorialBoundError):
        brute_force_attack(random_air_cargo(2, 2, 3, 1), OPTIMAL, k=4, max_evaluations=10)


def test_predict_next_state_examples():
    grid = Grid(3, 3, frozenset(), (2, 2), (0, 0))
    assert predict_next_state((2, 2), (0, 0), "euclidean", grid) == (1, 2)
    assert predict_next_state((1, 0), (0, 0), "manhattan", grid) == (0, 0)
    corridor = Grid.from_ascii("S#\n.#\nG.\n")
    assert predict_next_state((0, 0), (2, 0), "euclidean", corridor) == (1, 0)
    boxed = Grid.from_ascii("S#.\n#..\n..G\n")
    with pytest.raises(NoSuccessorError):
        predict_next_state((0, 0), (2, 2), "euclidean", boxed)


def test_predict_next_state_strips(cargo):
    nxt = predict_next_state(cargo.init, cargo.goal, "additive", cargo)
    succ = {(cargo.init - o.del_effects) | o.add_effects for o in cargo.operators if o.applicable(cargo.init)}
    assert nxt in succ


def test_offline_attack_with_unload_window(one_cargo):
    plan = solve(one_cargo).plan
    traj = trajectory(one_cargo, plan)
    w = normalize_window(extract_strips_window(traj, 3, 4))
    assert w.change.name == "UNLOAD"
    table = WindowTable("strips", metadata={"window_size": 4})
    table.add(w)
    report = offline_attack(one_cargo, table, threat_model("offline-black_box", 1))
    assert [str(a) for a in report.removed] == ["(UNLOAD c1 p1 JFK)"]
    assert report.unsolvable
    assert brute_force_attack(one_cargo, OPTIMAL, 1).attacked_cost == report.attacked_cost


def test_two_cargo_example_dominated_by_oracle(cargo, strips_table):
    oracle = brute_force_attack(cargo, OPTIMAL, 1)
    for name in ("offline-black_box", "offline-agent_heuristic"):
        report = offline_attack(cargo, strips_table, threat_model(name, 1))
        assert report.attacked_cost <= oracle.attacked_cost
        assert len(report.removed) <= 1


def test_empty_table_noop(cargo):
    report = offline_attack(cargo, WindowTable("strips"), threat_model("offline-black_box", 2))
    assert report.removed == [] and report.attacked_cost == 6
    grid = Grid(5, 5, frozenset(), (0, 0), (4, 4))
    report, transcript = online_attack(grid, WindowTable("grid"), threat_model("online-informed", 1))
    assert report.attacked_cost == 8 and report.removed == []
    assert sum(e.action == "move" for e in transcript) == 8


def test_wrong_mode_or_flavor(cargo, grid_table, strips_table):
    with pytest.raises(ValueError):
        offline_attack(cargo, strips_table, threat_model("online-informed", 1))
    with pytest.raises(ValueError):
        offline_attack(cargo, grid_table, threat_model("offline-black_box", 1))
    with pytest.raises(ValueError):
        online_attack(Grid(3, 3, frozenset(), (0, 0), (2, 2)), strips_table, threat_model("online-informed", 1))


@pytest.mark.parametrize("name", ["online-informed", "online-agent_heuristic", "online-black_box"])
def test_online_soundness_and_budget(grid_table, name):
    for seed in range(25):
        grid = generate_maze(15, 15, 0.25, seed, placement="random")
        for k in (1, 2, 3):
            report, transcript = online_attack(grid, grid_table, threat_model(name, k))
            assert len(report.removed) <= k
            assert replay_walk(grid, transcript)
            assert report.attacked_cost >= report.baseline_cost
            moves = sum(e.action == "move" for e in transcript)
            if report.attacked_cost < INF:
                assert moves == report.attacked_cost


def test_replay_rejects_bad_transcripts(grid_table):
    grid = generate_maze(15, 15, 0.25, 2, placement="random")
    _, transcript = online_attack(grid, grid_table, threat_model("online-informed", 1))
    assert not replay_walk(grid, transcript[:-1])
    bad = list(transcript)
    bad[0] = attacks.TranscriptEvent(0, "agent", "move", "7,7", 1)
    if (7, 7) != grid.start:
        assert not replay_walk(grid, bad)


def test_uninformed_adversaries_never_see_next_move(monkeypatch, grid_table):
    seen = []
    original = attacks._Simulation.observe

    def spy(self, informed):
        obs = original(self, informed)
        seen.append(obs.next_move)
        return obs

    monkeypatch.setattr(attacks._Simulation, "observe", spy)
    grid = generate_maze(15, 15, 0.25, 9, placement="random")
    for name in ("online-agent_heuristic", "online-black_box"):
        online_attack(grid, grid_table, threat_model(name, 2))
    assert seen and all(x is None for x in seen)
    seen.clear()
    online_attack(grid, grid_table, threat_model("online-informed", 2))
    assert any(x is not None for x in seen)


def test_sensing_radius(grid_table):
    for seed in range(10):
        grid = generate_maze(15, 15, 0.25, seed, placement="random")
        report, transcript = online_attack(grid, grid_table, threat_model("online-informed", 2), sense="1")
        assert replay_walk(grid, transcript)
    with pytest.raises(ValueError):
        online_attack(grid, grid_table, threat_model("online-informed", 1), sense="2")


def test_reports_are_deterministic(cargo, strips_table, grid_table):
    a = offline_attack(cargo, strips_table, threat_model("offline-black_box", 2))
    b = offline_attack(cargo, strips_table, threat_model("offline-black_box", 2))
    strip = lambda r: json.dumps({k: v for k, v in r.to_record().items() if k != "timings"})  # noqa: E731
    assert strip(a) == strip(b)
    grid = generate_maze(15, 15, 0.25, 4, placement="random")
    ra, ta = online_attack(grid, grid_table, threat_model("online-black_box", 2))
    rb, tb = online_attack(grid, grid_table, threat_model("online-black_box", 2))
    assert strip(ra) == strip(rb) and ta == tb


def test_record_is_json(cargo):
    rec = brute_force_attack(cargo, OPTIMAL, 1).to_record()
    assert json.loads(json.dumps(rec))["kind"] == "strips"


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 3))
def test_optimal_agent_never_decreases(seed, k):
    task = random_air_cargo(2, 2, 3, seed)
    if not solve(task).solved:
        return
    table = build_table([random_air_cargo(2, 2, 3, seed + i + 1) for i in range(4)], "strips")
    report = offline_attack(task, table, threat_model("offline-black_box", k), agent=OPTIMAL)
    assert report.attacked_cost >= report.baseline_cost
    assert len(report.removed) <= k
    assert all(a in task.operators for a in report.removed)


def test_restart_flag_runs(cargo, strips_table):
    report = offline_attack(cargo, strips_table, threat_model("offline-black_box", 2), restart=True)
    assert len(report.removed) <= 2


def test_greedy_agent_report(cargo, strips_table):
    report = offline_attack(cargo, strips_table, threat_model("offline-agent_heuristic", 1), agent=GREEDY)
    assert report.stats["adversary"] == GREEDY.describe()
