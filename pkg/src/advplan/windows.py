"""Adversarial windows: extraction, normalisation, equivalence and tables.

A grid window is the n x n wall mask around a cell whose blocking was
adversarial. A STRIPS window is a chain of n states and n-1 grounded
actions whose last action is the one to remove.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .grid import INF, Cell, Grid, GridHeuristic, DStarLite, shortest_distance
from .planner import OPTIMAL, SearchConfig, solve
from .strips import GroundedAction, Task, format_atom, trajectory

TABLE_FORMAT_VERSION = 1
DIRECTIONS = ("N", "E", "S", "W")  # clockwise
_STEP_TO_DIR = {(-1, 0): "N", (0, 1): "E", (1, 0): "S", (0, -1): "W"}


class WindowError(ValueError):
    pass


class TrajectoryTooShortError(WindowError):
    pass


class FlavorMismatchError(WindowError):
    pass


# ---------------------------------------------------------------------------
# grid windows


@dataclass(frozen=True)
class GridWindow:
    """``mask[r][c]`` is True for walls (out-of-bounds cells count as walls).

    ``approach`` is the side of the window the agent entered the centre
    from, or None when unknown.
    """

    mask: tuple[tuple[bool, ...], ...]
    approach: str | None = None

    def __post_init__(self):
        n = len(self.mask)
        if n % 2 == 0 or any(len(row) != n for row in self.mask):
            raise WindowError("grid window must be an odd-sized square")
        if self.mask[n // 2][n // 2]:
            raise WindowError("window centre must be free")

    @property
    def n(self) -> int:
        return len(self.mask)

    def rotate(self, quarter_turns: int = 1) -> "GridWindow":
        """Rotate clockwise by ``quarter_turns`` x 90 degrees."""
        mask, approach = self.mask, self.approach
        for _ in range(quarter_turns % 4):
            mask = tuple(zip(*mask[::-1]))
            if approach is not None:
                approach = DIRECTIONS[(DIRECTIONS.index(approach) + 1) % 4]
        return GridWindow(tuple(tuple(r) for r in mask), approach)

    def reflect(self) -> "GridWindow":
        mirror = {"E": "W", "W": "E"}
        return GridWindow(tuple(tuple(r[::-1]) for r in self.mask),
                          mirror.get(self.approach, self.approach))

    def variants(self, reflections: bool = False):
        """(witness, window) pairs for every symmetry considered."""
        out = [((r, False), self.rotate(r)) for r in range(4)]
        if reflections:
            flipped = self.reflect()
            out += [((r, True), flipped.rotate(r)) for r in range(4)]
        return out

    def canonical(self, reflections: bool = False) -> "GridWindow":
        return min((w for _, w in self.variants(reflections)), key=lambda w: w.mask)

    def key(self, reflections: bool = False) -> tuple:
        return ("grid", self.canonical(reflections).mask)

    def to_text(self) -> str:
        return "\n".join("".join("#" if x else "." for x in row) for row in self.mask)


def extract_grid_window(grid: Grid, center: Cell, n: int = 3, approach: str | None = None) -> GridWindow:
    if n % 2 == 0 or n < 1:
        raise WindowError("window size must be odd")
    half = n // 2
    r0, c0 = center
    mask = tuple(
        tuple(not grid.free((r0 + dr, c0 + dc)) for dc in range(-half, half + 1))
        for dr in range(-half, half + 1)
    )
    if mask[half][half]:
        raise WindowError(f"window centre {center} is a wall")
    return GridWindow(mask, approach)


def approach_direction(prev: Cell | None, center: Cell) -> str | None:
    """Side of ``center`` the agent comes from when stepping in from ``prev``."""
    if prev is None:
        return None
    return _STEP_TO_DIR.get((prev[0] - center[0], prev[1] - center[1]))


# ---------------------------------------------------------------------------
# STRIPS windows


@dataclass(frozen=True)
class StripsWindow:
    states: tuple[frozenset, ...]
    actions: tuple[GroundedAction, ...]

    def __post_init__(self):
        if len(self.states) < 2:
            raise WindowError("a STRIPS window needs at least two states")
        if len(self.actions) != len(self.states) - 1:
            raise WindowError("a window of n states needs n-1 actions")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def change(self) -> GroundedAction:
        return self.actions[-1]

    def objects(self) -> set[str]:
        objs = {o for a in self.actions for o in a.args}
        objs.update(o for s in self.states for atom in s for o in atom[1:])
        return objs

    def object_types(self) -> dict[str, str]:
        types = {}
        for a in self.actions:
            types.update(zip(a.args, a.arg_types))
        return types

    def rename(self, mapping: dict[str, str]) -> "StripsWindow":
        def atom(a):
            return (a[0], *(mapping.get(x, x) for x in a[1:]))

        def aset(s):
            return frozenset(atom(a) for a in s)

        actions = tuple(
            replace(
                a,
                args=tuple(mapping.get(x, x) for x in a.args),
                preconditions=aset(a.preconditions),
                add_effects=aset(a.add_effects),
                del_effects=aset(a.del_effects),
            )
            for a in self.actions
        )
        return StripsWindow(tuple(aset(s) for s in self.states), actions)

    def _labelling(self) -> dict[str, str]:
        order: list[str] = []
        for a in self.actions:
            for o in a.args:
                if o not in order:
                    order.append(o)
        mapping = {o: f"v{i + 1}" for i, o in enumerate(order)}
        leftover = sorted(self.objects() - set(order))
        if not leftover:
            return mapping
        # objects untouched by the actions: smallest serialisation over their labellings
        labels = [f"v{len(order) + i + 1}" for i in range(len(leftover))]
        best, best_map = None, None
        perms = itertools.permutations(labels) if len(leftover) <= 6 else [labels]
        for perm in perms:
            trial = dict(mapping, **dict(zip(leftover, perm)))
            ser = _serialise(self.rename(trial))
            if best is None or ser < best:
                best, best_map = ser, trial
        return best_map

    def canonical(self) -> "StripsWindow":
        return self.rename(self._labelling())

    def key(self) -> tuple:
        return ("strips", _serialise(self.canonical()))

    def to_text(self) -> str:
        lines = [f"action {a}" for a in self.actions]
        lines += ["state " + " ".join(format_atom(x) for x in sorted(s)) for s in self.states]
        return "\n".join(lines)


def _serialise(w: StripsWindow) -> tuple:
    return (tuple(a.key for a in w.actions), tuple(tuple(sorted(s)) for s in w.states))


def extract_strips_window(traj: Sequence[tuple[frozenset, GroundedAction | None]], end_index: int,
                          n: int = 4, truncate: bool = False) -> StripsWindow:
    """Window of ``n`` states ending at ``traj[end_index]``.

    ``traj`` pairs each state with the action applied from it. With
    ``truncate`` a window that would reach past the first state is cut
    short instead of rejected.
    """
    if n < 2:
        raise WindowError("window size must be at least 2")
    if not 0 < end_index < len(traj):
        raise TrajectoryTooShortError(f"end index {end_index} outside trajectory of {len(traj)} states")
    first = end_index - n + 1
    if first < 0:
        if not truncate:
            raise TrajectoryTooShortError(f"need {n} states before index {end_index}")
        first = 0
    states = tuple(traj[i][0] for i in range(first, end_index + 1))
    actions = tuple(traj[i][1] for i in range(first, end_index))
    return StripsWindow(states, actions)


def normalize_window(w: StripsWindow) -> StripsWindow:
    common = frozenset.intersection(*w.states)
    return StripsWindow(tuple(s - common for s in w.states), w.actions)


def find_bijection(a: StripsWindow, b: StripsWindow) -> dict[str, str] | None:
    """Backtracking search for a type-consistent renaming f with f(b) == a."""
    if a.n != b.n or [x.name for x in a.actions] != [x.name for x in b.actions]:
        return None
    if [len(s) for s in a.states] != [len(s) for s in b.states]:
        return None
    ta, tb = a.object_types(), b.object_types()
    objs_b = sorted(b.objects())
    objs_a = sorted(a.objects())
    if len(objs_a) != len(objs_b):
        return None

    def consistent(f: dict) -> bool:
        for xa, xb in zip(a.actions, b.actions):
            for oa, ob in zip(xa.args, xb.args):
                if ob in f and f[ob] != oa:
                    return False
        return True

    def full_check(f: dict) -> bool:
        return b.rename(f).states == a.states and all(
            x.key == y.key for x, y in zip(b.rename(f).actions, a.actions)
        )

    def search(i: int, f: dict, used: set) -> dict | None:
        if i == len(objs_b):
            return dict(f) if full_check(f) else None
        ob = objs_b[i]
        for oa in objs_a:
            if oa in used or ta.get(oa) != tb.get(ob):
                continue
            f[ob] = oa
            used.add(oa)
            if consistent(f):
                found = search(i + 1, f, used)
                if found is not None:
                    return found
            del f[ob]
            used.discard(oa)
        return None

    return search(0, {}, set())


def windows_equivalent(a, b, reflections: bool = False):
    """Return ``(equivalent, witness)``.

    Grid witness: ``(quarter_turns, reflected)`` taking ``b`` onto ``a``.
    STRIPS witness: dict renaming ``b``'s objects into ``a``'s.
    """
    if isinstance(a, GridWindow) and isinstance(b, GridWindow):
        if a.n != b.n:
            return False, None
        for witness, w in b.variants(reflections):
            if w.mask == a.mask:
                return True, witness
        return False, None
    if isinstance(a, StripsWindow) and isinstance(b, StripsWindow):
        if a.n != b.n:
            return False, None
        la, lb = a._labelling(), b._labelling()
        if _serialise(a.rename(la)) != _serialise(b.rename(lb)):
            return False, None
        inverse = {v: k for k, v in la.items()}
        return True, {ob: inverse[label] for ob, label in lb.items()}
    raise FlavorMismatchError(f"cannot compare {type(a).__name__} with {type(b).__name__}")


# ---------------------------------------------------------------------------
# tables


@dataclass
class TableEntry:
    window: GridWindow | StripsWindow  # canonical form
    count: int


@dataclass
class WindowTable:
    flavor: str  # "grid" | "strips"
    entries: list[TableEntry] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    reflections: bool = False

    def __post_init__(self):
        if self.flavor not in ("grid", "strips"):
            raise WindowError(f"unknown table flavor {self.flavor!r}")
        self._index = {self._key(e.window): e for e in self.entries}

    def _key(self, w) -> tuple:
        if self.flavor == "grid":
            if not isinstance(w, GridWindow):
                raise FlavorMismatchError("grid table holds grid windows only")
            return w.key(self.reflections)
        if not isinstance(w, StripsWindow):
            raise FlavorMismatchError("strips table holds STRIPS windows only")
        return w.key()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def add(self, window, count: int = 1) -> TableEntry:
        key = self._key(window)
        entry = self._index.get(key)
        if entry is None:
            canon = window.canonical(self.reflections) if self.flavor == "grid" else window.canonical()
            entry = TableEntry(canon, 0)
            self.entries.append(entry)
            self._index[key] = entry
        entry.count += count
        return entry

    def lookup(self, window) -> TableEntry | None:
        return self._index.get(self._key(window))

    def total_count(self) -> int:
        return sum(e.count for e in self.entries)

    def sorted(self) -> "WindowTable":
        entries = sorted(self.entries, key=lambda e: (-e.count, self._key(e.window)))
        return WindowTable(self.flavor, entries, dict(self.metadata), self.reflections)


def threshold_table(table: WindowTable, threshold: int) -> WindowTable:
    """Keep entries seen at least ``threshold`` times, most frequent first."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    kept = [TableEntry(e.window, e.count) for e in table.entries if e.count >= threshold]
    meta = dict(table.metadata, threshold=threshold)
    return WindowTable(table.flavor, kept, meta, table.reflections).sorted()


# --- table generation --------------------------------------------------------


def best_wall(grid: Grid, path: Sequence[Cell]) -> tuple[float, int | None]:
    """Brute-force the single wall on ``path`` that most increases the path cost.

    Returns (best cost, index into path); unsolvable ranks above every
    finite cost and the earliest cell wins ties.
    """
    best_cost, best_i = len(path) - 1, None
    for i, cell in enumerate(path[1:-1], 1):
        cost = shortest_distance(grid.with_wall(cell))
        if cost > best_cost:
            best_cost, best_i = cost, i
            if cost == INF:
                break
    return best_cost, best_i


def grid_instance_window(grid: Grid, n: int = 3, heuristic: GridHeuristic | str = GridHeuristic.EUCLIDEAN):
    """Most adversarial window for one maze, or None when no wall raises the cost."""
    path = DStarLite(grid, heuristic).path()
    if path is None:
        raise WindowError("maze is unsolvable")
    _, i = best_wall(grid, path)
    if i is None:
        return None
    return extract_grid_window(grid, path[i], n, approach_direction(path[i - 1], path[i]))


def best_removal(task: Task, plan, adversary: SearchConfig) -> tuple[float, int | None]:
    """Brute-force the plan step whose action removal most increases cost."""
    base = plan.cost
    best_cost, best_i = base, None
    tried = set()
    for i, action in enumerate(plan.actions):
        if action in tried:
            continue
        tried.add(action)
        cost = solve(task.without([action]), adversary).cost
        if cost > best_cost:
            best_cost, best_i = cost, i
            if cost == INF:
                break
    return best_cost, best_i


def strips_instance_window(task: Task, n: int = 4, adversary: SearchConfig = OPTIMAL):
    result = solve(task, adversary)
    if not result.solved:
        raise WindowError(f"adversary cannot solve task: {result.outcome.value}")
    _, i = best_removal(task, result.plan, adversary)
    if i is None:
        return None
    traj = trajectory(task, result.plan)
    return normalize_window(extract_strips_window(traj, i + 1, n, truncate=True))


def build_table(instances: Iterable, flavor: str, n: int | None = None, threshold: int = 0,
                adversary: SearchConfig | GridHeuristic | str | None = None,
                reflections: bool = False, metadata: dict | None = None) -> WindowTable:
    """Fill a table from solvable small instances and threshold it.

    ``adversary`` is the adversary's grid heuristic (grid flavor) or its
    search configuration (strips flavor).
    """
    if flavor == "grid":
        n = 3 if n is None else n
        adversary = GridHeuristic(adversary or GridHeuristic.EUCLIDEAN)

        def window_of(x):
            return grid_instance_window(x, n, adversary)

        adv_desc = adversary.value
    elif flavor == "strips":
        n = 4 if n is None else n
        adversary = adversary or OPTIMAL

        def window_of(x):
            return strips_instance_window(x, n, adversary)

        adv_desc = adversary.describe()
    else:
        raise WindowError(f"unknown table flavor {flavor!r}")
    table = WindowTable(flavor, reflections=reflections)
    seen = skipped = adversarial = 0
    for inst in instances:
        seen += 1
        try:
            w = window_of(inst)
        except WindowError:
            skipped += 1
            continue
        if w is None:
            continue
        adversarial += 1
        table.add(w)
    table.metadata = dict(metadata or {}, instances=seen, skipped=skipped, adversarial=adversarial,
                          window_size=n, adversary=adv_desc, distinct=len(table))
    return threshold_table(table, threshold)


# --- persistence -------------------------------------------------------------


def _fmt_meta_value(v) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return str(v).replace("\n", " ")


def dump_table(table: WindowTable) -> str:
    lines = [f"window-table {TABLE_FORMAT_VERSION}", f"flavor {table.flavor}",
             f"reflections {int(table.reflections)}"]
    for k in sorted(table.metadata):
        lines.append(f"meta {k} {_fmt_meta_value(table.metadata[k])}")
    lines.append(f"entries {len(table.entries)}")
    for e in table.entries:
        w = e.window
        if table.flavor == "grid":
            lines.append(f"entry {e.count} n={w.n} approach={w.approach or '-'}")
            lines.extend(w.to_text().splitlines())
        else:
            lines.append(f"entry {e.count} n={w.n}")
            for a in w.actions:
                typed = " ".join(f"{o}:{t}" for o, t in zip(a.args, a.arg_types)) if a.arg_types else " ".join(a.args)
                lines.append(f"action {a.name} {typed}".rstrip())
            for s in w.states:
                lines.append("state " + " ".join(format_atom(x) for x in sorted(s)))
        lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_meta(v: str):
    if v == "inf":
        return INF
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def _parse_atoms(text: str) -> frozenset:
    atoms = []
    for chunk in text.split(")"):
        chunk = chunk.strip().lstrip("(").strip()
        if chunk:
            atoms.append(tuple(chunk.split()))
    return frozenset(atoms)


def load_table(text: str) -> WindowTable:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("window-table "):
        raise WindowError("not a window table")
    version = int(lines[0].split()[1])
    if version != TABLE_FORMAT_VERSION:
        raise WindowError(f"unsupported table format version {version}")
    flavor = lines[1].split()[1]
    reflections = bool(int(lines[2].split()[1]))
    meta, entries = {}, []
    i = 3
    while lines[i].startswith("meta "):
        _, k, v = lines[i].split(" ", 2)
        meta[k] = _parse_meta(v)
        i += 1
    expected = int(lines[i].split()[1])
    i += 1
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if head[0] != "entry":
            raise WindowError(f"line {i + 1}: expected 'entry'")
        count = int(head[1])
        fields = dict(x.split("=", 1) for x in head[2:])
        n = int(fields["n"])
        i += 1
        if flavor == "grid":
            rows = lines[i:i + n]
            mask = tuple(tuple(ch == "#" for ch in row) for row in rows)
            approach = fields.get("approach", "-")
            window = GridWindow(mask, None if approach == "-" else approach)
            i += n
        else:
            actions, states = [], []
            while lines[i] != "end":
                kind, _, rest = lines[i].partition(" ")
                if kind == "action":
                    parts = rest.split()
                    args = [p.split(":", 1) for p in parts[1:]]
                    actions.append(GroundedAction(parts[0], tuple(a[0] for a in args),
                                                  arg_types=tuple(a[1] for a in args if len(a) == 2)))
                elif kind == "state":
                    states.append(_parse_atoms(rest))
                else:
                    raise WindowError(f"line {i + 1}: unexpected {kind!r}")
                i += 1
            window = StripsWindow(tuple(states), tuple(actions))
        if lines[i] != "end":
            raise WindowError(f"line {i + 1}: expected 'end'")
        i += 1
        entries.append(TableEntry(window, count))
    if len(entries) != expected:
        raise WindowError(f"table declares {expected} entries but holds {len(entries)}")
    return WindowTable(flavor, entries, meta, reflections)


def assert_canonical(table: WindowTable) -> None:
    """Raise if two stored entries are equivalent (pairwise oracle check)."""
    for a, b in itertools.combinations(table.entries, 2):
        if table.flavor == "grid":
            same, _ = windows_equivalent(a.window, b.window, table.reflections)
        else:
            same = find_bijection(a.window, b.window) is not None
        if same:
            raise WindowError("table holds two equivalent windows")

