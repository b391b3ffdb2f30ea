"""4-connected grid mazes, grid heuristics, A* and an incremental D* Lite agent.

Cells are ``(row, col)`` tuples; row-major tuple order is the canonical
tie-break everywhere.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

INF = math.inf
Cell = tuple[int, int]

MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))  # N E S W


class GridHeuristic(str, Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"


class IllegalWallError(ValueError):
    pass


class MazeGenerationError(RuntimeError):
    def __init__(self, attempts: int):
        super().__init__(f"no solvable maze after {attempts} attempts")
        self.attempts = attempts


@dataclass(frozen=True)
class Grid:
    width: int
    height: int
    walls: frozenset = frozenset()
    start: Cell = (0, 0)
    goal: Cell = (0, 0)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        for name, c in (("start", self.start), ("goal", self.goal)):
            if not self.in_bounds(c):
                raise ValueError(f"{name} {c} out of bounds")
            if c in self.walls:
                raise ValueError(f"{name} {c} is a wall")

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def neighbors(self, cell: Cell) -> Iterator[Cell]:
        """Free 4-neighbours in row-major order."""
        r, c = cell
        for nb in sorted((r + dr, c + dc) for dr, dc in MOVES):
            if self.free(nb):
                yield nb

    def with_wall(self, cell: Cell) -> "Grid":
        return Grid(self.width, self.height, self.walls | {cell}, self.start, self.goal)

    def with_walls(self, cells) -> "Grid":
        return Grid(self.width, self.height, self.walls | frozenset(cells), self.start, self.goal)

    def cells(self) -> Iterator[Cell]:
        for r in range(self.height):
            for c in range(self.width):
                yield (r, c)

    def to_ascii(self) -> str:
        rows = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                cell = (r, c)
                row.append("S" if cell == self.start else "G" if cell == self.goal
                           else "#" if cell in self.walls else ".")
            rows.append("".join(row))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_ascii(cls, text: str) -> "Grid":
        rows = [line.rstrip("\r") for line in text.strip("\n").splitlines()]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("maze rows must be non-empty and of equal length")
        walls, start, goal = set(), None, None
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                if ch == "#":
                    walls.add((r, c))
                elif ch == "S":
                    if start is not None:
                        raise ValueError("more than one start")
                    start = (r, c)
                elif ch == "G":
                    if goal is not None:
                        raise ValueError("more than one goal")
                    goal = (r, c)
                elif ch != ".":
                    raise ValueError(f"unexpected character {ch!r} at row {r}, column {c}")
        if start is None or goal is None:
            raise ValueError("maze needs exactly one S and one G")
        return cls(len(rows[0]), len(rows), frozenset(walls), start, goal)


def grid_heuristic(kind: GridHeuristic | str, cell: Cell, goal: Cell) -> float:
    dr, dc = cell[0] - goal[0], cell[1] - goal[1]
    if GridHeuristic(kind) is GridHeuristic.EUCLIDEAN:
        return math.sqrt(dr * dr + dc * dc)
    return abs(dr) + abs(dc)


def shortest_distance(grid: Grid, source: Cell | None = None, target: Cell | None = None) -> float:
    """Breadth-first path length; INF when disconnected."""
    source = grid.start if source is None else source
    target = grid.goal if target is None else target
    if not grid.free(source):
        return INF
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        if cell == target:
            return dist[cell]
        for nb in grid.neighbors(cell):
            if nb not in dist:
                dist[nb] = dist[cell] + 1
                queue.append(nb)
    return INF


def astar(grid: Grid, source: Cell | None = None, target: Cell | None = None,
          heuristic: GridHeuristic | str = GridHeuristic.MANHATTAN) -> list[Cell] | None:
    """A shortest path (list of cells, both ends included) or None."""
    source = grid.start if source is None else source
    target = grid.goal if target is None else target
    if not grid.free(source) or not grid.free(target):
        return None
    g = {source: 0}
    parent = {source: None}
    heap = [(grid_heuristic(heuristic, source, target), 0, source)]
    while heap:
        _, gc, cell = heapq.heappop(heap)
        if gc > g[cell]:
            continue
        if cell == target:
            path = []
            while cell is not None:
                path.append(cell)
                cell = parent[cell]
            return path[::-1]
        for nb in grid.neighbors(cell):
            ng = gc + 1
            if ng < g.get(nb, INF):
                g[nb] = ng
                parent[nb] = cell
                heapq.heappush(heap, (ng + grid_heuristic(heuristic, nb, target), ng, nb))
    return None


def astar_cost(grid: Grid, source: Cell | None = None, target: Cell | None = None) -> float:
    path = astar(grid, source, target)
    return INF if path is None else len(path) - 1


def generate_maze(width: int, height: int, wall_frequency: float, seed: int,
                  max_attempts: int = 100, placement: str = "corners") -> Grid:
    """Bernoulli walls on every cell except the start and goal.

    ``placement="corners"`` puts the start top-left and the goal
    bottom-right; ``"random"`` draws two distinct cells per attempt.
    """
    if not 0 <= wall_frequency < 1:
        raise ValueError("wall_frequency must be in [0, 1)")
    if placement not in ("corners", "random"):
        raise ValueError("placement must be 'corners' or 'random'")
    if width * height < 2:
        raise ValueError("maze needs at least two cells")
    rng = random.Random(seed)
    cells = [(r, c) for r in range(height) for c in range(width)]
    for _ in range(max_attempts):
        if placement == "random":
            start, goal = rng.sample(cells, 2)
        else:
            start, goal = cells[0], cells[-1]
        walls = frozenset(
            cell for cell in cells
            if cell not in (start, goal) and rng.random() < wall_frequency
        )
        grid = Grid(width, height, walls, start, goal)
        if shortest_distance(grid) < INF:
            return grid
    raise MazeGenerationError(max_attempts)


# ---------------------------------------------------------------------------
# D* Lite


class _Queue:
    """Binary heap with lazy deletion keyed by cell."""

    def __init__(self):
        self.heap = []
        self.keys = {}

    def push(self, cell, key):
        self.keys[cell] = key
        heapq.heappush(self.heap, (key, cell))

    def remove(self, cell):
        self.keys.pop(cell, None)

    def _clean(self):
        heap, keys = self.heap, self.keys
        while heap and keys.get(heap[0][1]) != heap[0][0]:
            heapq.heappop(heap)

    def top_key(self):
        self._clean()
        return self.heap[0][0] if self.heap else (INF, INF)

    def pop(self):
        self._clean()
        key, cell = heapq.heappop(self.heap)
        del self.keys[cell]
        return key, cell

    def __contains__(self, cell):
        return cell in self.keys


@dataclass
class DStarLiteState:
    """Search state of one D* Lite agent. ``grid`` is the agent's map."""

    grid: Grid
    position: Cell
    heuristic: GridHeuristic = GridHeuristic.EUCLIDEAN
    g: dict = field(default_factory=dict)
    rhs: dict = field(default_factory=dict)
    queue: _Queue = field(default_factory=_Queue)
    k_m: float = 0.0
    last: Cell | None = None
    steps_taken: int = 0
    expansions: int = 0

    def copy(self) -> "DStarLiteState":
        q = _Queue()
        q.heap = list(self.queue.heap)
        q.keys = dict(self.queue.keys)
        return DStarLiteState(self.grid, self.position, self.heuristic, dict(self.g), dict(self.rhs),
                              q, self.k_m, self.last, self.steps_taken, self.expansions)


class DStarLite:
    """Optimised D* Lite on a 4-connected unit-cost grid.

    The search runs backwards from the goal; ``g`` holds cost-to-goal
    estimates. Walls make every edge touching them infinitely expensive.
    """

    def __init__(self, grid: Grid, heuristic: GridHeuristic | str = GridHeuristic.EUCLIDEAN,
                 position: Cell | None = None):
        self.state = DStarLiteState(grid, grid.start if position is None else position,
                                    GridHeuristic(heuristic))
        s = self.state
        s.last = s.position
        s.rhs[grid.goal] = 0
        s.queue.push(grid.goal, self._key(grid.goal))
        self.compute_shortest_path()

    @classmethod
    def from_state(cls, state: DStarLiteState) -> "DStarLite":
        obj = cls.__new__(cls)
        obj.state = state
        return obj

    def copy(self) -> "DStarLite":
        return DStarLite.from_state(self.state.copy())

    @property
    def grid(self) -> Grid:
        return self.state.grid

    @property
    def position(self) -> Cell:
        return self.state.position

    def _h(self, a: Cell, b: Cell) -> float:
        return grid_heuristic(self.state.heuristic, a, b)

    def _g(self, cell):
        return self.state.g.get(cell, INF)

    def _rhs(self, cell):
        return self.state.rhs.get(cell, INF)

    def _key(self, cell):
        m = min(self._g(cell), self._rhs(cell))
        return (m + self._h(self.state.position, cell) + self.state.k_m, m)

    def _cost(self, a: Cell, b: Cell) -> float:
        walls = self.state.grid.walls
        return INF if a in walls or b in walls else 1

    def _adjacent(self, cell: Cell) -> Iterator[Cell]:
        grid = self.state.grid
        r, c = cell
        for dr, dc in MOVES:
            nb = (r + dr, c + dc)
            if grid.in_bounds(nb):
                yield nb

    def _update_vertex(self, u: Cell):
        s = self.state
        if u != s.grid.goal:
            best = INF
            for nb in self._adjacent(u):
                v = self._cost(u, nb) + self._g(nb)
                if v < best:
                    best = v
            s.rhs[u] = best
        s.queue.remove(u)
        if self._g(u) != self._rhs(u):
            s.queue.push(u, self._key(u))

    def compute_shortest_path(self):
        s = self.state
        start = s.position
        while True:
            top = s.queue.top_key()
            if not (top < self._key(start) or self._rhs(start) != self._g(start)):
                break
            if top == (INF, INF):
                break
            k_old, u = s.queue.pop()
            s.expansions += 1
            k_new = self._key(u)
            if k_old < k_new:
                s.queue.push(u, k_new)
            elif self._g(u) > self._rhs(u):
                s.g[u] = self._rhs(u)
                for p in self._adjacent(u):
                    self._update_vertex(p)
            else:
                s.g[u] = INF
                self._update_vertex(u)
                for p in self._adjacent(u):
                    self._update_vertex(p)

    def cost_to_goal(self) -> float:
        return self._g(self.state.position)

    def next_cell(self) -> Cell | None:
        """Next move on a current shortest path, or None when the goal is unreachable.

        Equal-cost moves are ordered by the agent's heuristic, then row-major.
        """
        s = self.state
        pos, goal = s.position, s.grid.goal
        if pos == goal:
            return None
        best, best_key = None, None
        for nb in self._adjacent(pos):
            v = self._cost(pos, nb) + self._g(nb)
            if v == INF:
                continue
            key = (v, self._h(nb, goal), nb)
            if best_key is None or key < best_key:
                best, best_key = nb, key
        return best

    def path(self) -> list[Cell] | None:
        """Greedy read-out of the current shortest path to the goal."""
        if self.cost_to_goal() == INF:
            return None
        probe = self.copy()
        cells = [probe.position]
        while probe.position != probe.grid.goal:
            nxt = probe.next_cell()
            if nxt is None:
                return None
            probe.state.position = nxt
            cells.append(nxt)
        return cells

    def move_to(self, cell: Cell):
        if abs(cell[0] - self.position[0]) + abs(cell[1] - self.position[1]) != 1:
            raise ValueError(f"{cell} is not adjacent to {self.position}")
        if not self.grid.free(cell):
            raise ValueError(f"cannot move into wall {cell}")
        self.state.position = cell
        self.state.steps_taken += 1

    def add_wall(self, cell: Cell):
        """Register a new wall and repair the search incrementally."""
        s = self.state
        if cell == s.position:
            raise IllegalWallError(f"wall on the agent's cell {cell}")
        if cell == s.grid.goal:
            raise IllegalWallError(f"wall on the goal {cell}")
        if cell == s.grid.start:
            raise IllegalWallError(f"wall on the start cell {cell}")
        if cell in s.grid.walls:
            raise IllegalWallError(f"{cell} is already a wall")
        if not s.grid.in_bounds(cell):
            raise IllegalWallError(f"{cell} is out of bounds")
        s.k_m += self._h(s.last, s.position)
        s.last = s.position
        s.grid = s.grid.with_wall(cell)
        self._update_vertex(cell)
        for nb in self._adjacent(cell):
            self._update_vertex(nb)
        self.compute_shortest_path()


def dstar_lite_plan(grid: Grid, state: DStarLiteState) -> Cell | None:
    """Next cell from ``state.position`` toward the goal, or None if unreachable."""
    agent = DStarLite.from_state(state)
    if state.grid != grid:
        for cell in sorted(grid.walls - state.grid.walls):
            agent.add_wall(cell)
    agent.compute_shortest_path()
    return agent.next_cell()


def add_wall(grid: Grid, state: DStarLiteState, cell: Cell) -> DStarLiteState:
    if state.grid.walls != grid.walls:
        raise ValueError("state was built for a different grid")
    DStarLite.from_state(state).add_wall(cell)
    return state


def walk(agent: DStarLite, max_steps: int | None = None) -> list[Cell] | None:
    """Move the agent to the goal; returns visited cells or None when cut off."""
    cells = [agent.position]
    limit = max_steps if max_steps is not None else agent.grid.width * agent.grid.height * 4
    while agent.position != agent.grid.goal:
        if len(cells) > limit:
            raise RuntimeError("walk exceeded step limit")
        agent.compute_shortest_path()
        nxt = agent.next_cell()
        if nxt is None:
            return None
        agent.move_to(nxt)
        cells.append(nxt)
    return cells
