import heapq
import math

import pytest
from hypothesis import given, settings, strategies as st

from advplan.domains import air_cargo_example, random_air_cargo
from advplan.planner import (
    BREADTH_FIRST,
    GREEDY,
    OPTIMAL,
    Algorithm,
    Heuristic,
    Outcome,
    SearchConfig,
    h_additive,
    h_goal_count,
    solve,
)
from advplan.strips import INFINITE, validate_plan

from conftest import small_tasks


def ucs_oracle(task):
    """Plain uniform-cost search, written independently of the planner."""
    dist = {task.init: 0}
    heap = [(0, sorted(task.init), task.init)]
    while heap:
        d, _, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        if task.goal <= s:
            return d
        for op in task.operators:
            if op.preconditions <= s:
                n = (s - op.del_effects) | op.add_effects
                if d + op.cost < dist.get(n, math.inf):
                    dist[n] = d + op.cost
                    heapq.heappush(heap, (d + op.cost, sorted(n), n))
    return math.inf


def shortest_length_oracle(task, max_len):
    """Enumerate reachable states layer by layer; returns the first goal layer."""
    layer = {task.init}
    seen = set(layer)
    for depth in range(max_len + 1):
        if any(task.goal <= s for s in layer):
            return depth
        nxt = set()
        for s in layer:
            for op in task.operators:
                if op.preconditions <= s:
                    n = (s - op.del_effects) | op.add_effects
                    if n not in seen:
                        seen.add(n)
                        nxt.add(n)
        layer = nxt
    return None


def hadd_fixpoint(state, task):
    """Bellman-style fixpoint for the additive heuristic."""
    cost = {a: 0 for a in state}
    changed = True
    while changed:
        changed = False
        for op in task.operators:
            if all(p in cost for p in op.preconditions):
                c = op.cost + sum(cost[p] for p in op.preconditions)
                for a in op.add_effects:
                    if c < cost.get(a, math.inf):
                        cost[a] = c
                        changed = True
    if any(g not in cost for g in task.goal):
        return math.inf
    return sum(cost[g] for g in task.goal)


def test_bfs_finds_six_action_plan(cargo):
    result = solve(cargo, BREADTH_FIRST)
    assert result.outcome is Outcome.PLAN
    assert len(result.plan) == 6 and result.cost == 6
    assert validate_plan(cargo, result.plan).valid
    assert shortest_length_oracle(cargo, 6) == 6


@pytest.mark.parametrize("config", [OPTIMAL, SearchConfig("astar", "additive"), GREEDY, SearchConfig("gbfs", "goal_count")])
def test_all_configs_solve_example(cargo, config):
    result = solve(cargo, config)
    assert result.solved and validate_plan(cargo, result.plan).valid
    if config is OPTIMAL:
        assert result.cost == 6


def test_removing_both_unloads_at_jfk_is_unsolvable(cargo):
    task = cargo.without([cargo.operator("UNLOAD", "c1", "p1", "JFK"), cargo.operator("UNLOAD", "c1", "p2", "JFK")])
    assert solve(task, OPTIMAL).outcome is Outcome.UNSOLVABLE
    assert solve(task, BREADTH_FIRST).outcome is Outcome.UNSOLVABLE
    assert ucs_oracle(task) == math.inf


def test_goal_count_example(cargo):
    assert h_goal_count(cargo.init, cargo.goal) == 2


def test_additive_example(cargo):
    assert h_additive(cargo.init, cargo) == 6
    assert hadd_fixpoint(cargo.init, cargo) == 6


def test_additive_infinite_without_flights(cargo):
    task = cargo.without([op for op in cargo.operators if op.name == "FLY"])
    assert h_additive(task.init, task) == INFINITE


def test_additive_zero_at_goal(cargo):
    goal_state = cargo.init | cargo.goal
    assert h_additive(goal_state, cargo) == 0


def test_budget_exhaustion_is_not_unsolvable(cargo):
    tight = SearchConfig("astar", "zero", node_budget=3)
    assert solve(cargo, tight).outcome is Outcome.BUDGET_EXHAUSTED
    assert solve(cargo, SearchConfig("bfs", node_budget=3)).outcome is Outcome.BUDGET_EXHAUSTED


def test_invalid_config():
    with pytest.raises(ValueError):
        SearchConfig("dfs")
    with pytest.raises(ValueError):
        SearchConfig(node_budget=0)


def test_determinism(cargo):
    for config in (OPTIMAL, GREEDY, BREADTH_FIRST, SearchConfig("astar", "zero", tie_break=7)):
        a, b = solve(cargo, config), solve(cargo, config)
        assert a.plan == b.plan


def test_optimal_matches_ucs_oracle():
    for task in small_tasks(12, seed=40):
        assert solve(task, OPTIMAL).cost == ucs_oracle(task)


def test_additive_matches_fixpoint_on_random_states():
    for task in small_tasks(8, seed=70):
        state = task.init
        for op in task.operators[:40]:
            assert h_additive(state, task) == hadd_fixpoint(state, task)
            if op.applicable(state):
                state = (state - op.del_effects) | op.add_effects


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sets(st.integers(0, 200), max_size=4))
def test_removal_never_decreases_optimal_cost(seed, picks):
    task = random_air_cargo(1 + seed % 2, 1 + seed % 2, 2 + seed % 2, seed)
    base = solve(task, OPTIMAL).cost
    removed = [task.operators[i % len(task.operators)] for i in picks]
    after = solve(task.without(removed), OPTIMAL).cost
    assert after >= base


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_returned_plans_validate(seed):
    task = random_air_cargo(2, 2, 3, seed)
    for config in (OPTIMAL, GREEDY, BREADTH_FIRST):
        result = solve(task, config)
        if result.solved:
            v = validate_plan(task, result.plan)
            assert v.valid and v.cost == result.cost
