"""Forward state-space search over grounded STRIPS tasks."""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .strips import INFINITE, GroundedAction, Plan, Task

DEFAULT_NODE_BUDGET = 1_000_000


class Algorithm(str, Enum):
    BFS = "bfs"
    ASTAR = "astar"
    GBFS = "gbfs"


class Heuristic(str, Enum):
    ZERO = "zero"
    ADDITIVE = "additive"
    GOAL_COUNT = "goal_count"


class Outcome(str, Enum):
    PLAN = "plan"
    UNSOLVABLE = "unsolvable"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class SearchConfig:
    """How to search. ``tie_break`` is ``"canonical"`` or an integer seed."""

    algorithm: Algorithm = Algorithm.ASTAR
    heuristic: Heuristic = Heuristic.ZERO
    node_budget: int = DEFAULT_NODE_BUDGET
    tie_break: str | int = "canonical"

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "heuristic", Heuristic(self.heuristic))
        if self.node_budget <= 0:
            raise ValueError("node_budget must be positive")

    @property
    def optimal(self) -> bool:
        """Minimum-cost guarantee for arbitrary costs (BFS only minimises length)."""
        return self.algorithm is Algorithm.ASTAR and self.heuristic is Heuristic.ZERO

    def describe(self) -> str:
        if self.algorithm is Algorithm.BFS:
            return "bfs"
        return f"{self.algorithm.value}+{self.heuristic.value}"


OPTIMAL = SearchConfig(Algorithm.ASTAR, Heuristic.ZERO)
BREADTH_FIRST = SearchConfig(Algorithm.BFS)
GREEDY = SearchConfig(Algorithm.GBFS, Heuristic.ADDITIVE)


@dataclass
class SearchResult:
    outcome: Outcome
    plan: Plan | None = None
    expanded: int = 0
    generated: int = 0

    @property
    def cost(self) -> float:
        return self.plan.cost if self.outcome is Outcome.PLAN else INFINITE

    @property
    def solved(self) -> bool:
        return self.outcome is Outcome.PLAN


def h_goal_count(state: frozenset, goal: frozenset) -> int:
    return len(goal) - len(goal & state)


class AdditiveHeuristic:
    """Additive-cost heuristic with operator data indexed once per operator set.

    Atom costs are settled in increasing order with a priority queue; an
    operator fires once all of its preconditions are settled.
    """

    def __init__(self, operators, goal: frozenset):
        self.goal = goal
        self.ops = list(operators)
        self.by_pre: dict = {}
        self.no_pre = []
        for i, op in enumerate(self.ops):
            if not op.preconditions:
                self.no_pre.append(i)
            for atom in op.preconditions:
                self.by_pre.setdefault(atom, []).append(i)

    def __call__(self, state: frozenset) -> float:
        goal = self.goal
        if goal <= state:
            return 0
        cost = {a: 0 for a in state}
        waiting = [len(op.preconditions) for op in self.ops]
        pre_sum = [0.0] * len(self.ops)
        heap = [(0, a) for a in state]
        heapq.heapify(heap)
        settled = set()
        remaining = len(goal - state)

        def fire(i):
            op = self.ops[i]
            c = op.cost + pre_sum[i]
            for atom in op.add_effects:
                if c < cost.get(atom, INFINITE):
                    cost[atom] = c
                    heapq.heappush(heap, (c, atom))

        for i in self.no_pre:
            fire(i)
        while heap:
            c, atom = heapq.heappop(heap)
            if atom in settled or c > cost[atom]:
                continue
            settled.add(atom)
            if atom in goal and atom not in state:
                remaining -= 1
                if remaining == 0:
                    break
            for i in self.by_pre.get(atom, ()):
                pre_sum[i] += c
                waiting[i] -= 1
                if waiting[i] == 0:
                    fire(i)
        total = 0
        for g in goal:
            if g not in cost:
                return INFINITE
            total += cost[g]
        return total


def h_additive(state: frozenset, task: Task) -> float:
    return AdditiveHeuristic(task.operators, task.goal)(state)


def make_heuristic(kind: Heuristic | str, task: Task) -> Callable[[frozenset], float]:
    kind = Heuristic(kind)
    if kind is Heuristic.ZERO:
        return lambda s: 0
    if kind is Heuristic.GOAL_COUNT:
        goal = task.goal
        return lambda s: h_goal_count(s, goal)
    return AdditiveHeuristic(task.operators, task.goal)


def state_key(state: frozenset) -> tuple:
    """Canonical serialisation used as the deterministic tie-break."""
    return tuple(sorted(state))


def _extract(parents: dict, state) -> Plan:
    actions = []
    while True:
        prev, op = parents[state]
        if op is None:
            break
        actions.append(op)
        state = prev
    return Plan(tuple(reversed(actions)))


def _bfs(task: Task, config: SearchConfig) -> SearchResult:
    init = task.init
    parents = {init: (None, None)}
    if task.goal <= init:
        return SearchResult(Outcome.PLAN, Plan(), 0, 1)
    ops = task.operators
    frontier = deque([init])
    expanded, generated = 0, 1
    while frontier:
        if expanded >= config.node_budget:
            return SearchResult(Outcome.BUDGET_EXHAUSTED, None, expanded, generated)
        state = frontier.popleft()
        expanded += 1
        for op in ops:
            if op.preconditions <= state:
                nxt = (state - op.del_effects) | op.add_effects
                if nxt in parents:
                    continue
                parents[nxt] = (state, op)
                generated += 1
                if task.goal <= nxt:
                    return SearchResult(Outcome.PLAN, _extract(parents, nxt), expanded, generated)
                frontier.append(nxt)
    return SearchResult(Outcome.UNSOLVABLE, None, expanded, generated)


def _best_first(task: Task, config: SearchConfig, heuristic=None) -> SearchResult:
    h = heuristic or make_heuristic(config.heuristic, task)
    greedy = config.algorithm is Algorithm.GBFS
    if config.tie_break == "canonical":
        tie = state_key
    else:
        rng = random.Random(config.tie_break)
        tie = lambda s: rng.random()  # noqa: E731
    init = task.init
    h0 = h(init)
    if h0 == INFINITE:
        return SearchResult(Outcome.UNSOLVABLE, None, 0, 1)
    best_g = {init: 0}
    parents = {init: (None, None)}
    closed = set()
    heap = [((h0,) if greedy else (h0, h0), tie(init), 0, init)]
    ops = task.operators
    expanded, generated = 0, 1
    while heap:
        _, _, g, state = heapq.heappop(heap)
        if g > best_g[state] or (greedy and state in closed):
            continue
        if task.goal <= state:
            return SearchResult(Outcome.PLAN, _extract(parents, state), expanded, generated)
        if expanded >= config.node_budget:
            return SearchResult(Outcome.BUDGET_EXHAUSTED, None, expanded, generated)
        expanded += 1
        closed.add(state)
        for op in ops:
            if not op.preconditions <= state:
                continue
            nxt = (state - op.del_effects) | op.add_effects
            ng = g + op.cost
            if greedy:
                if nxt in best_g:
                    continue
            elif ng >= best_g.get(nxt, INFINITE):
                continue
            hn = h(nxt)
            if hn == INFINITE:
                continue
            best_g[nxt] = ng
            parents[nxt] = (state, op)
            generated += 1
            prio = (hn,) if greedy else (ng + hn, hn)
            heapq.heappush(heap, (prio, tie(nxt), ng, nxt))
    return SearchResult(Outcome.UNSOLVABLE, None, expanded, generated)


def solve(task: Task, config: SearchConfig = OPTIMAL) -> SearchResult:
    """Search from task.init for a state satisfying task.goal using task.operators."""
    if config.algorithm is Algorithm.BFS:
        return _bfs(task, config)
    return _best_first(task, config)


def plan_cost(task: Task, config: SearchConfig = OPTIMAL) -> float:
    return solve(task, config).cost


def reachable_states(task: Task, limit: int | None = None) -> int:
    """Size of the reachable state space (stops counting at ``limit``)."""
    seen = {task.init}
    frontier = [task.init]
    while frontier:
        state = frontier.pop()
        for op in task.operators:
            if op.preconditions <= state:
                nxt = (state - op.del_effects) | op.add_effects
                if nxt not in seen:
                    seen.add(nxt)
                    if limit is not None and len(seen) >= limit:
                        return len(seen)
                    frontier.append(nxt)
    return len(seen)
