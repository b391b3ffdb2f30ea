"""Most-vital-arcs instances as STRIPS tasks, plus exhaustive oracles on both sides.

A graph with source s and sink t becomes a task whose only fluent is the
current node: ``(Node n<i>)``. Every arc i -> j becomes one grounded action
``(O n<i> n<j>)`` with the arc's cost, so plans are s-t paths and removing
actions is removing arcs.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field

from .attacks import BaselineUnsolvableError, brute_force_attack
from .planner import OPTIMAL, SearchConfig
from .strips import ActionSchema, GroundedAction, Task

INF = math.inf


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class ArcGraph:
    n: int
    arcs: dict = field(default_factory=dict)  # (u, v) -> cost
    s: int = 0
    t: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ReductionError("graph needs at least two nodes")
        if self.s == self.t:
            raise ReductionError("source and sink must differ")
        for node in (self.s, self.t):
            if not 0 <= node < self.n:
                raise ReductionError(f"node {node} outside 0..{self.n - 1}")
        for (u, v), c in self.arcs.items():
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ReductionError(f"arc {u}->{v} has an unknown endpoint")
            if u == v:
                raise ReductionError(f"self-loop at {u}")
            if c < 0:
                raise ReductionError(f"arc {u}->{v} has negative cost")

    @classmethod
    def undirected(cls, n: int, edges: dict, s: int, t: int) -> "ArcGraph":
        """Expand each edge {u, v} into the arcs u->v and v->u."""
        arcs = {}
        for (u, v), c in edges.items():
            arcs[(u, v)] = c
            arcs[(v, u)] = c
        return cls(n, arcs, s, t)

    def without(self, removed) -> "ArcGraph":
        gone = set(removed)
        return ArcGraph(self.n, {a: c for a, c in self.arcs.items() if a not in gone}, self.s, self.t)

    def to_text(self) -> str:
        lines = [f"{self.n} {self.s} {self.t}"]
        lines += [f"{u} {v} {_fmt_cost(c)}" for (u, v), c in sorted(self.arcs.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ArcGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 3:
            raise ReductionError("header must be 'n s t'")
        try:
            n, s, t = (int(x) for x in rows[0])
            arcs = {}
            for i, row in enumerate(rows[1:], 2):
                if len(row) != 3:
                    raise ReductionError(f"arc line {i} must be 'u v cost'")
                u, v, c = int(row[0]), int(row[1]), float(row[2])
                if (u, v) in arcs:
                    raise ReductionError(f"duplicate arc {u}->{v}")
                arcs[(u, v)] = int(c) if c.is_integer() else c
        except ValueError as e:
            raise ReductionError(f"bad number: {e}") from None
        return cls(n, arcs, s, t)


def _fmt_cost(c) -> str:
    return str(int(c)) if float(c).is_integer() else repr(float(c))


def node_name(i: int) -> str:
    return f"n{i}"


ARC_SCHEMA = ActionSchema(
    "O",
    (("?i", "node"), ("?j", "node")),
    (("Node", "?i"),),
    (("Node", "?j"),),
    (("Node", "?i"),),
)


def arc_action(u: int, v: int, cost) -> GroundedAction:
    i, j = node_name(u), node_name(v)
    return GroundedAction("O", (i, j), frozenset({("Node", i)}), frozenset({("Node", j)}),
                          frozenset({("Node", i)}), cost, ("node", "node"))


def mvap_to_strips(g: ArcGraph) -> Task:
    """One grounded action per arc; init {(Node s)}, goal {(Node t)}."""
    operators = tuple(arc_action(u, v, c) for (u, v), c in sorted(g.arcs.items()))
    return Task(
        domain_name="most-vital-arcs",
        problem_name=f"graph-{g.n}",
        types={"node": "object"},
        objects={node_name(i): "node" for i in range(g.n)},
        predicates={"Node": 1},
        schemas=(ARC_SCHEMA,),
        init=frozenset({("Node", node_name(g.s))}),
        goal=frozenset({("Node", node_name(g.t))}),
        operators=operators,
        requirements=(":strips", ":typing", ":action-costs"),
    )


def arcs_of(actions) -> list[tuple[int, int]]:
    return [(int(a.args[0][1:]), int(a.args[1][1:])) for a in actions]


def dijkstra(g: ArcGraph, source: int | None = None, target: int | None = None) -> float:
    source = g.s if source is None else source
    target = g.t if target is None else target
    out: dict[int, list] = {}
    for (u, v), c in g.arcs.items():
        out.setdefault(u, []).append((v, c))
    dist = {source: 0}
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == target:
            return d
        if d > dist[u]:
            continue
        for v, c in out.get(u, ()):
            nd = d + c
            if nd < dist.get(v, INF):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return INF


def solve_dmvap_exhaustive(g: ArcGraph, k: int, h: float, bound: int = 1_000_000):
    """Is there a set of at most k arcs whose removal makes the s-t distance >= h?

    Returns ``(answer, witness)``; the witness is the first qualifying arc
    set in (size, sorted order), or None.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    arcs = sorted(g.arcs)
    total = sum(math.comb(len(arcs), r) for r in range(min(k, len(arcs)) + 1))
    if total > bound:
        raise ReductionError(f"{total} subsets exceed the bound of {bound}")
    for r in range(min(k, len(arcs)) + 1):
        for subset in itertools.combinations(arcs, r):
            if dijkstra(g.without(subset)) >= h:
                return True, list(subset)
    return False, None


def max_interdiction(g: ArcGraph, k: int, bound: int = 1_000_000):
    """Largest s-t distance reachable by removing at most k arcs, with a witness."""
    arcs = sorted(g.arcs)
    total = sum(math.comb(len(arcs), r) for r in range(min(k, len(arcs)) + 1))
    if total > bound:
        raise ReductionError(f"{total} subsets exceed the bound of {bound}")
    best = (dijkstra(g), [])
    for r in range(1, min(k, len(arcs)) + 1):
        for subset in itertools.combinations(arcs, r):
            d = dijkstra(g.without(subset))
            if d > best[0]:
                best = (d, list(subset))
    return best


def solve_dadvcp(task: Task, k: int, h: float, agent: SearchConfig = OPTIMAL):
    """Decision form on the planning side, answered by the brute-force adversary."""
    try:
        report = brute_force_attack(task, agent, k)
    except BaselineUnsolvableError:
        return True, []
    return report.attacked_cost >= h, list(report.removed)


def random_graph(n: int, density: float, seed: int, max_cost: int = 9) -> ArcGraph:
    """Random digraph on n nodes; each ordered pair is an arc with probability ``density``."""
    rng = random.Random(seed)
    arcs = {}
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < density:
                arcs[(u, v)] = rng.randint(0, max_cost)
    s, t = rng.sample(range(n), 2)
    return ArcGraph(n, arcs, s, t)


def mvap_to_pddl(g: ArcGraph) -> tuple[str, str]:
    """PDDL text for the reduced task; each arc is a parameterless action ``O-n<i>-n<j>``.

    Arc costs differ per grounded action, so the arcs are written out
    individually rather than as one schema.
    """
    nodes = " ".join(node_name(i) for i in range(g.n))
    lines = [
        "(define (domain most-vital-arcs)",
        "  (:requirements :strips :typing :action-costs)",
        "  (:types node)",
        f"  (:constants {nodes} - node)",
        "  (:predicates (Node ?x - node))",
    ]
    for (u, v), c in sorted(g.arcs.items()):
        i, j = node_name(u), node_name(v)
        lines.append(f"  (:action O-{i}-{j}")
        lines.append("    :parameters ()")
        lines.append(f"    :precondition (Node {i})")
        lines.append(f"    :effect (and (Node {j}) (not (Node {i})) (increase (total-cost) {_fmt_cost(c)})))")
    lines[-1] += ")"
    domain = "\n".join(lines) + "\n"
    problem = (
        f"(define (problem graph-{g.n}-{g.s}-{g.t})\n"
        "  (:domain most-vital-arcs)\n"
        f"  (:init (Node {node_name(g.s)}))\n"
        f"  (:goal (Node {node_name(g.t)})))\n"
    )
    return domain, problem
