"""The adversary: exhaustive oracle, offline and online window heuristics."""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from enum import Enum

from .grid import (
    INF,
    Cell,
    DStarLite,
    Grid,
    GridHeuristic,
    IllegalWallError,
    astar,
    grid_heuristic,
    shortest_distance,
)
from .planner import (
    OPTIMAL,
    Algorithm,
    Heuristic,
    Outcome,
    SearchConfig,
    make_heuristic,
    solve,
    state_key,
)
from .strips import GroundedAction, Task
from .windows import (
    WindowTable,
    extract_grid_window,
    extract_strips_window,
    normalize_window,
)

MAX_BUDGET = 10


class Mode(str, Enum):
    ONLINE = "online"
    OFFLINE = "offline"


class Knowledge(str, Enum):
    INFORMED = "informed"  # agent's heuristic and informed of its next move
    AGENT_HEURISTIC = "agent_heuristic"
    BLACK_BOX = "black_box"


class AttackError(RuntimeError):
    pass


class CombinatorialBoundError(AttackError):
    pass


class BaselineUnsolvableError(AttackError):
    pass


class NoSuccessorError(AttackError):
    pass


@dataclass(frozen=True)
class ThreatModel:
    mode: Mode
    knowledge: Knowledge
    k: int = 1
    adversary_heuristic: str | None = None
    max_budget: int = MAX_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "knowledge", Knowledge(self.knowledge))
        if self.knowledge is Knowledge.INFORMED and self.mode is not Mode.ONLINE:
            raise ValueError("an informed adversary only exists online")
        if not 0 <= self.k <= self.max_budget:
            raise ValueError(f"budget k must be within [0, {self.max_budget}]")

    @property
    def name(self) -> str:
        return f"{self.mode.value}-{self.knowledge.value}"

    def with_budget(self, k: int) -> "ThreatModel":
        return ThreatModel(self.mode, self.knowledge, k, self.adversary_heuristic, self.max_budget)


def threat_model(name: str, k: int = 1, adversary_heuristic: str | None = None) -> ThreatModel:
    """Build one of the five threat models from ``<mode>-<knowledge>``, e.g. ``online-black_box``."""
    mode, _, knowledge = name.partition("-")
    return ThreatModel(Mode(mode), Knowledge(knowledge.replace("-", "_")), k, adversary_heuristic)


THREAT_MODELS = (
    "online-informed",
    "online-agent_heuristic",
    "online-black_box",
    "offline-agent_heuristic",
    "offline-black_box",
)


@dataclass(frozen=True)
class TranscriptEvent:
    tick: int
    actor: str  # "agent" | "adversary"
    action: str  # "move" | "wall" | "skip-illegal" | "stuck" | "goal"
    target: str
    cost_to_date: int

    def to_record(self) -> dict:
        return {"tick": self.tick, "actor": self.actor, "action": self.action,
                "target": self.target, "cost_to_date": self.cost_to_date}


@dataclass
class AttackReport:
    kind: str  # "grid" | "strips"
    threat: str
    k: int
    baseline_cost: float
    attacked_cost: float
    removed: list = field(default_factory=list)
    illegal_skipped: int = 0
    stats: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.attacked_cost > self.baseline_cost

    @property
    def decreased(self) -> bool:
        return self.attacked_cost < self.baseline_cost

    @property
    def unsolvable(self) -> bool:
        return self.attacked_cost == INF

    @property
    def increase(self) -> float:
        return self.attacked_cost - self.baseline_cost

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "threat": self.threat,
            "k": self.k,
            "baseline_cost": _num(self.baseline_cost),
            "attacked_cost": _num(self.attacked_cost),
            "success": self.success,
            "removed": [change_text(c) for c in self.removed],
            "illegal_skipped": self.illegal_skipped,
            "stats": dict(sorted(self.stats.items())),
            "timings": {k: round(v, 6) for k, v in sorted(self.timings.items())},
        }


def _num(x):
    if x == INF:
        return "inf"
    return int(x) if float(x).is_integer() else x


def change_text(c) -> str:
    if isinstance(c, GroundedAction):
        return str(c)
    return f"{c[0]},{c[1]}"


# ---------------------------------------------------------------------------
# next-state prediction


def predict_next_state(current, goal, heuristic, world):
    """Successor of ``current`` with the lowest heuristic value.

    ``world`` is a Grid (successors are free 4-neighbours, ``heuristic`` a
    GridHeuristic or callable on cells) or a grounded Task (successors via
    its operators, ``heuristic`` a planner Heuristic or callable on
    states). Ties go to the canonically smallest successor.
    """
    if isinstance(world, Grid):
        succ = list(world.neighbors(current))
        if callable(heuristic) and not isinstance(heuristic, (str, Enum)):
            h = heuristic
        else:
            kind = GridHeuristic(heuristic)
            h = lambda c: grid_heuristic(kind, c, goal)  # noqa: E731
        key = lambda c: (h(c), c)  # noqa: E731
    else:
        succ = list({(current - op.del_effects) | op.add_effects
                     for op in world.operators if op.preconditions <= current})
        if callable(heuristic) and not isinstance(heuristic, (str, Enum)):
            h = heuristic
        else:
            h = make_heuristic(heuristic, world)
        key = lambda s: (h(s), state_key(s))  # noqa: E731
    if not succ:
        raise NoSuccessorError(f"{current} has no successor")
    return min(succ, key=key)


# ---------------------------------------------------------------------------
# brute force


def _solve_checked(task: Task, agent: SearchConfig):
    res = solve(task, agent)
    if res.outcome is Outcome.BUDGET_EXHAUSTED:
        raise AttackError("agent planner exhausted its node budget")
    return res


def _brute_force_strips(task: Task, agent: SearchConfig, k: int, max_evaluations: int):
    cache: dict[frozenset, object] = {}

    def result(removed: frozenset):
        if removed not in cache:
            cache[removed] = _solve_checked(task.without(removed), agent)
        return cache[removed]

    base = result(frozenset())
    if not base.solved:
        raise BaselineUnsolvableError("baseline task is unsolvable")
    p = len(set(base.plan.actions))
    if p ** k > max_evaluations:
        raise CombinatorialBoundError(f"{p}^{k} re-plans exceed the bound of {max_evaluations}")

    def rec(removed: tuple, budget: int):
        res = result(frozenset(removed))
        best = (res.cost, removed)
        if budget == 0 or not res.solved:
            return best
        for a in dict.fromkeys(res.plan.actions):
            cand = rec(removed + (a,), budget - 1)
            if cand[0] > best[0]:
                best = cand
                if best[0] == INF:
                    break
        return best

    cost, removed = rec((), k)
    return base.cost, cost, list(removed), {"plans_computed": len(cache)}


def _brute_force_grid_offline(grid: Grid, k: int, max_evaluations: int):
    base = shortest_distance(grid)
    if base == INF:
        raise BaselineUnsolvableError("maze is unsolvable")
    if max(base - 1, 1) ** k > max_evaluations:
        raise CombinatorialBoundError(f"{int(base) - 1}^{k} re-plans exceed the bound of {max_evaluations}")
    cache: dict[frozenset, tuple] = {}

    def evaluate(walls: frozenset):
        if walls not in cache:
            cache[walls] = astar(grid.with_walls(walls))
        return cache[walls]

    def rec(walls: tuple, budget: int):
        path = evaluate(frozenset(walls))
        cost = INF if path is None else len(path) - 1
        best = (cost, walls)
        if budget == 0 or path is None:
            return best
        for cell in path[1:-1]:
            cand = rec(walls + (cell,), budget - 1)
            if cand[0] > best[0]:
                best = cand
                if best[0] == INF:
                    break
        return best

    cost, walls = rec((), k)
    return base, cost, list(walls), {"plans_computed": len(cache)}


def _legal_targets(agent: DStarLite, world: Grid) -> list[Cell]:
    pos = agent.position
    return [c for c in world.neighbors(pos) if c not in (world.goal, world.start)]


def _brute_force_grid_online(grid: Grid, k: int, agent_heuristic, max_evaluations: int):
    """Exhaust every placement policy that walls a neighbour of the agent at some tick."""
    root = DStarLite(grid, agent_heuristic)
    base = root.cost_to_goal()
    if base == INF:
        raise BaselineUnsolvableError("maze is unsolvable")
    if (4 * base) ** k > max_evaluations:
        raise CombinatorialBoundError(f"(4*{base})^{k} simulations exceed the bound of {max_evaluations}")
    limit = grid.width * grid.height * 4
    counter = {"simulations": 0}

    def step(agent: DStarLite) -> bool:
        agent.compute_shortest_path()
        nxt = agent.next_cell()
        if nxt is None:
            return False
        agent.move_to(nxt)
        return True

    def explore(agent: DStarLite, budget: int, walls: tuple):
        counter["simulations"] += 1
        best = (-1, ())
        while True:
            if agent.position == grid.goal:
                cand = (agent.state.steps_taken, walls)
                return cand if cand[0] > best[0] else best
            if agent.state.steps_taken > limit:
                raise AttackError("simulation exceeded its step limit")
            if budget:
                for cell in _legal_targets(agent, agent.grid):
                    branch = agent.copy()
                    branch.add_wall(cell)
                    placed = walls + (cell,)
                    if not step(branch):
                        return (INF, placed)
                    cand = explore(branch, budget - 1, placed)
                    if cand[0] > best[0]:
                        best = cand
                        if best[0] == INF:
                            return best
            if not step(agent):
                return (INF, walls)

    cost, walls = explore(root.copy(), k, ())
    return base, cost, list(walls), counter


def brute_force_attack(instance, agent=None, k: int = 1, max_evaluations: int = 200_000,
                       online: bool = False) -> AttackReport:
    """Best removal set of size at most ``k``, found exhaustively.

    STRIPS tasks: every action of the current plan is tried, re-planning
    after each removal. With an optimal agent this is exact: a removal set
    that misses the current plan cannot raise its cost.

    Grids: ``online=False`` walls cells of the current shortest path
    before the walk; ``online=True`` walls any neighbour of the walking
    agent at any tick, matching the online window heuristic's choices.
    """
    t0 = time.perf_counter()
    if isinstance(instance, Task):
        agent = agent or OPTIMAL
        base, cost, removed, stats = _brute_force_strips(instance, agent, k, max_evaluations)
        kind, threat = "strips", "offline-oracle"
    elif isinstance(instance, Grid):
        if online:
            heuristic = GridHeuristic(agent or GridHeuristic.EUCLIDEAN)
            base, cost, removed, stats = _brute_force_grid_online(instance, k, heuristic, max_evaluations)
            threat = "online-oracle"
        else:
            base, cost, removed, stats = _brute_force_grid_offline(instance, k, max_evaluations)
            threat = "offline-oracle"
        kind = "grid"
    else:
        raise TypeError(f"cannot attack {type(instance).__name__}")
    return AttackReport(kind, threat, k, base, cost, removed, stats=stats,
                        timings={"attack": time.perf_counter() - t0})


# ---------------------------------------------------------------------------
# offline window heuristic


def _adversary_config(threat: ThreatModel, agent: SearchConfig, adversary: SearchConfig | None) -> SearchConfig:
    if adversary is not None:
        return adversary
    if threat.knowledge is Knowledge.AGENT_HEURISTIC:
        return agent
    h = Heuristic(threat.adversary_heuristic or Heuristic.ADDITIVE)
    return SearchConfig(Algorithm.ASTAR, h)


def window_search(task: Task, table: WindowTable, k: int, config: SearchConfig,
                  n: int | None = None, restart: bool = False) -> tuple[list[GroundedAction], dict]:
    """Run the adversary's own search and remove actions at windows found in the table.

    Each popped node is the adversary's predicted next state; the window
    ending there is normalised and looked up. On a match the action that
    led into the node is removed and the node dropped, so the next pop is
    the replacement prediction.
    """
    n = n or int(table.metadata.get("window_size", 4))
    removed: list[GroundedAction] = []
    gone: set[GroundedAction] = set()
    stats = {"expanded": 0, "lookups": 0, "matches": 0, "budget_exhausted": False, "restarts": 0}
    if k <= 0 or not len(table):
        return removed, stats
    greedy = config.algorithm is Algorithm.GBFS
    use_h = config.algorithm is not Algorithm.BFS
    expanded = 0

    while True:
        ops = [o for o in task.operators if o not in gone]
        h = make_heuristic(config.heuristic, task.without(gone)) if use_h else (lambda s: 0)
        init = task.init
        best_g = {init: 0}
        parents = {init: (None, None)}
        closed = set()
        heap = [((h(init),) if greedy else (h(init), h(init)), state_key(init), 0, init)]
        restart_now = False
        while heap and len(removed) < k:
            _, _, g, state = heapq.heappop(heap)
            if state in closed or g > best_g.get(state, INF):
                continue
            # rebuild the path; drop nodes reached through a removed action
            states, actions = [state], []
            cur = state
            while parents[cur][1] is not None:
                prev, op = parents[cur]
                actions.append(op)
                states.append(prev)
                cur = prev
            if any(a in gone for a in actions):
                best_g.pop(state, None)
                continue
            states.reverse()
            actions.reverse()
            if actions:
                traj = list(zip(states, actions)) + [(states[-1], None)]
                w = normalize_window(extract_strips_window(traj, len(states) - 1, n, truncate=True))
                stats["lookups"] += 1
                if table.lookup(w) is not None:
                    stats["matches"] += 1
                    change = actions[-1]
                    removed.append(change)
                    gone.add(change)
                    best_g.pop(state, None)
                    if restart:
                        restart_now = True
                        break
                    continue
            if task.goal <= state:
                break
            if expanded >= config.node_budget:
                stats["budget_exhausted"] = True
                break
            expanded += 1
            closed.add(state)
            for op in ops:
                if op in gone or not op.preconditions <= state:
                    continue
                nxt = (state - op.del_effects) | op.add_effects
                if nxt in closed:
                    continue
                ng = g + op.cost
                if ng >= best_g.get(nxt, INF) and not (greedy and nxt not in best_g):
                    continue
                hn = h(nxt)
                if hn == INF:
                    continue
                best_g[nxt] = ng
                parents[nxt] = (state, op)
                prio = (hn,) if greedy else (ng + hn, hn) if use_h else (ng, 0)
                heapq.heappush(heap, (prio, state_key(nxt), ng, nxt))
        if not (restart_now and len(removed) < k):
            break
        stats["restarts"] += 1
    stats["expanded"] = expanded
    return removed, stats


def offline_attack(task: Task, table: WindowTable, threat: ThreatModel, adversary: SearchConfig | None = None,
                   agent: SearchConfig = OPTIMAL, restart: bool = False) -> AttackReport:
    """Pick up to k actions with the window heuristic, then re-plan as the agent."""
    if threat.mode is not Mode.OFFLINE:
        raise ValueError("offline_attack needs an offline threat model")
    if len(table) and table.flavor != "strips":
        raise ValueError("offline attacks use a strips window table")
    timings = {}
    t0 = time.perf_counter()
    base = solve(task, agent)
    timings["baseline"] = time.perf_counter() - t0
    if not base.solved:
        raise BaselineUnsolvableError(f"agent cannot solve the task: {base.outcome.value}")
    config = _adversary_config(threat, agent, adversary)
    t0 = time.perf_counter()
    removed, stats = window_search(task, table, threat.k, config, restart=restart)
    timings["attack"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    attacked = solve(task.without(removed), agent) if removed else base
    timings["replan"] = time.perf_counter() - t0
    stats["adversary"] = config.describe()
    stats["agent"] = agent.describe()
    if attacked.outcome is Outcome.BUDGET_EXHAUSTED:
        stats["agent_budget_exhausted"] = True
    return AttackReport("strips", threat.name, threat.k, base.cost, attacked.cost, removed,
                        stats=stats, timings=timings)


# ---------------------------------------------------------------------------
# online window heuristic


@dataclass(frozen=True)
class Observation:
    """What the adversary sees each tick. ``next_move`` is only set for informed adversaries."""

    current: Cell
    goal: Cell
    world: Grid
    next_move: Cell | None = None


class _Simulation:
    """Agent side of the loop. The adversary only ever receives Observations."""

    def __init__(self, grid: Grid, heuristic: GridHeuristic, sense: str):
        self.world = grid
        self.agent = DStarLite(grid, heuristic)
        self.sense = sense

    def observe(self, informed: bool) -> Observation:
        nxt = None
        if informed:
            self.agent.compute_shortest_path()
            nxt = self.agent.next_cell()
        return Observation(self.agent.position, self.world.goal, self.world, nxt)

    def place_wall(self, cell: Cell):
        if cell in (self.agent.position, self.world.goal, self.world.start):
            raise IllegalWallError(f"illegal wall at {cell}")
        if not self.world.free(cell):
            raise IllegalWallError(f"{cell} is not a free cell")
        self.world = self.world.with_wall(cell)
        if self.sense == "full":
            self.agent.add_wall(cell)

    def _sense(self):
        r, c = self.agent.position
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                cell = (r + dr, c + dc)
                if cell in self.world.walls and cell not in self.agent.grid.walls:
                    self.agent.add_wall(cell)

    def step(self) -> Cell | None:
        if self.sense != "full":
            self._sense()
        self.agent.compute_shortest_path()
        nxt = self.agent.next_cell()
        if nxt is None:
            return None
        if not self.world.free(nxt):
            raise AttackError("agent tried to move into a wall")
        self.agent.move_to(nxt)
        return nxt


def online_attack(grid: Grid, table: WindowTable, threat: ThreatModel,
                  agent_heuristic: GridHeuristic | str = GridHeuristic.EUCLIDEAN,
                  sense: str = "full", n: int | None = None) -> tuple[AttackReport, list[TranscriptEvent]]:
    """Simulate the walk while the adversary walls predicted next cells that match the table.

    ``sense`` is ``"full"`` (new walls known at once) or ``"1"`` (walls
    noticed once within one cell of the agent).
    """
    if threat.mode is not Mode.ONLINE:
        raise ValueError("online_attack needs an online threat model")
    if len(table) and table.flavor != "grid":
        raise ValueError("online attacks use a grid window table")
    if sense not in ("full", "1"):
        raise ValueError("sense must be 'full' or '1'")
    agent_heuristic = GridHeuristic(agent_heuristic)
    if threat.knowledge is Knowledge.BLACK_BOX:
        adv_h = GridHeuristic(threat.adversary_heuristic or GridHeuristic.MANHATTAN)
    else:
        adv_h = agent_heuristic
    n = n or int(table.metadata.get("window_size", 3))
    t0 = time.perf_counter()
    sim = _Simulation(grid, agent_heuristic, sense)
    baseline = sim.agent.cost_to_goal()
    if baseline == INF:
        raise BaselineUnsolvableError("maze is unsolvable")
    timings = {"baseline": time.perf_counter() - t0, "attack": 0.0, "replan": 0.0}
    transcript: list[TranscriptEvent] = []
    removed: list[Cell] = []
    illegal = 0
    tick = 0
    steps = 0
    limit = grid.width * grid.height * 4
    informed = threat.knowledge is Knowledge.INFORMED
    attacked = None
    while sim.agent.position != grid.goal:
        if len(removed) < threat.k and len(table):
            t0 = time.perf_counter()
            obs = sim.observe(informed)
            target = obs.next_move if informed else _predict(obs, adv_h)
            if target is not None:
                window = extract_grid_window(obs.world, target, n)
                if table.lookup(window) is not None:
                    try:
                        sim.place_wall(target)
                    except IllegalWallError:
                        illegal += 1
                        transcript.append(TranscriptEvent(tick, "adversary", "skip-illegal", _cell(target), steps))
                    else:
                        removed.append(target)
                        transcript.append(TranscriptEvent(tick, "adversary", "wall", _cell(target), steps))
            timings["attack"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        moved = sim.step()
        timings["replan"] += time.perf_counter() - t0
        if moved is None:
            transcript.append(TranscriptEvent(tick, "agent", "stuck", _cell(sim.agent.position), steps))
            attacked = INF
            break
        steps += 1
        transcript.append(TranscriptEvent(tick, "agent", "move", _cell(moved), steps))
        tick += 1
        if steps > limit:
            raise AttackError("walk exceeded its step limit")
    if attacked is None:
        attacked = steps
        transcript.append(TranscriptEvent(tick, "agent", "goal", _cell(sim.agent.position), steps))
    stats = {"ticks": tick, "expansions": sim.agent.state.expansions, "adversary_heuristic": adv_h.value,
             "agent_heuristic": agent_heuristic.value}
    report = AttackReport("grid", threat.name, threat.k, baseline, attacked, removed, illegal, stats, timings)
    return report, transcript


def _predict(obs: Observation, heuristic: GridHeuristic) -> Cell | None:
    try:
        return predict_next_state(obs.current, obs.goal, heuristic, obs.world)
    except NoSuccessorError:
        return None


def _cell(c: Cell) -> str:
    return f"{c[0]},{c[1]}"


def replay_walk(grid: Grid, transcript: list[TranscriptEvent]) -> bool:
    """Check a transcript: legal walls and a walk of adjacent free cells."""
    world = grid
    pos = grid.start
    for ev in transcript:
        cell = tuple(int(x) for x in ev.target.split(","))
        if ev.action == "wall":
            if cell in (pos, grid.goal, grid.start) or not world.free(cell):
                return False
            world = world.with_wall(cell)
        elif ev.action == "move":
            if abs(cell[0] - pos[0]) + abs(cell[1] - pos[1]) != 1 or not world.free(cell):
                return False
            pos = cell
        elif ev.action == "goal":
            return pos == grid.goal
        elif ev.action == "stuck":
            return shortest_distance(world, pos, grid.goal) == INF
    return False

