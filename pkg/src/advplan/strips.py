"""STRIPS subset of PDDL: parsing, grounding, transitions and plan validation.

Atoms are plain tuples ``(predicate, arg1, arg2, ...)`` and states are
frozensets of atoms, so both hash and order cheaply.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

Atom = tuple
State = frozenset

INFINITE = math.inf

SUPPORTED_REQUIREMENTS = {":strips", ":typing", ":action-costs"}
UNSUPPORTED_CONNECTIVES = {
    "not": ":negative-preconditions",
    "or": ":disjunctive-preconditions",
    "imply": ":disjunctive-preconditions",
    "exists": ":existential-preconditions",
    "forall": ":universal-preconditions",
    "when": ":conditional-effects",
    "=": ":equality",
}


class PDDLError(ValueError):
    """Base class for every parse-time failure."""


class PDDLSyntaxError(PDDLError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownSymbolError(PDDLError):
    pass


class ArityError(PDDLError):
    pass


class UnsupportedFeatureError(PDDLError):
    def __init__(self, feature: str, detail: str = ""):
        msg = f"unsupported PDDL feature {feature}"
        super().__init__(f"{msg}: {detail}" if detail else msg)
        self.feature = feature


class PreconditionError(ValueError):
    """Raised when an action is applied in a state lacking a precondition."""

    def __init__(self, action: "GroundedAction", missing: Atom):
        super().__init__(f"{action} not applicable: missing {format_atom(missing)}")
        self.action = action
        self.missing = missing


def format_atom(atom: Atom) -> str:
    return "(" + " ".join(atom) + ")"


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[tuple[str, str], ...]
    preconditions: tuple[Atom, ...]
    add_effects: tuple[Atom, ...]
    del_effects: tuple[Atom, ...]
    cost: float = 1

    def __post_init__(self):
        variables = {v for v, _ in self.parameters}
        for atom in self.preconditions + self.add_effects + self.del_effects:
            for arg in atom[1:]:
                if arg.startswith("?") and arg not in variables:
                    raise UnknownSymbolError(f"variable {arg} not declared in action {self.name}")
        both = set(self.add_effects) & set(self.del_effects)
        if both:
            raise PDDLError(f"action {self.name} adds and deletes {format_atom(sorted(both)[0])}")
        if self.cost < 0:
            raise PDDLError(f"action {self.name} has negative cost")

    def ground(self, args: Sequence[str]) -> "GroundedAction":
        binding = {v: a for (v, _), a in zip(self.parameters, args)}

        def sub(atoms):
            return frozenset((a[0], *(binding.get(x, x) for x in a[1:])) for a in atoms)

        return GroundedAction(
            name=self.name,
            args=tuple(args),
            preconditions=sub(self.preconditions),
            add_effects=sub(self.add_effects),
            del_effects=sub(self.del_effects),
            cost=self.cost,
            arg_types=tuple(t for _, t in self.parameters),
        )


@dataclass(frozen=True, eq=False)
class GroundedAction:
    """A fully bound operator. Identity is (schema name, arguments)."""

    name: str
    args: tuple[str, ...]
    preconditions: frozenset = frozenset()
    add_effects: frozenset = frozenset()
    del_effects: frozenset = frozenset()
    cost: float = 1
    arg_types: tuple[str, ...] = ()

    @property
    def key(self) -> tuple:
        return (self.name, self.args)

    def __eq__(self, other):
        if not isinstance(other, GroundedAction):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __lt__(self, other: "GroundedAction"):
        return self.key < other.key

    def __str__(self):
        return "(" + " ".join((self.name, *self.args)) + ")"

    __repr__ = __str__

    def applicable(self, state: frozenset) -> bool:
        return self.preconditions <= state

    def binding(self, schema: ActionSchema) -> dict[str, str]:
        return {v: a for (v, _), a in zip(schema.parameters, self.args)}


@dataclass(frozen=True)
class Task:
    domain_name: str
    problem_name: str
    types: dict  # type -> parent type
    objects: dict  # object -> type
    predicates: dict  # predicate -> arity
    schemas: tuple[ActionSchema, ...]
    init: frozenset
    goal: frozenset
    operators: tuple[GroundedAction, ...] = ()
    requirements: tuple[str, ...] = (":strips", ":typing")
    constants: frozenset = frozenset()

    def __hash__(self):
        return hash((self.domain_name, self.problem_name, self.init, self.goal, self.operators))

    def without(self, removed: Iterable[GroundedAction]) -> "Task":
        """The same task with the given grounded actions taken out of O."""
        gone = set(removed)
        return replace(self, operators=tuple(o for o in self.operators if o not in gone))

    def operator(self, name: str, *args: str) -> GroundedAction:
        for op in self.operators:
            if op.name == name and op.args == args:
                return op
        raise KeyError(f"no grounded action ({name} {' '.join(args)})")

    def is_goal(self, state: frozenset) -> bool:
        return self.goal <= state


@dataclass(frozen=True)
class Plan:
    actions: tuple[GroundedAction, ...] = ()

    @property
    def cost(self) -> float:
        return sum(a.cost for a in self.actions)

    def __len__(self):
        return len(self.actions)

    def __iter__(self) -> Iterator[GroundedAction]:
        return iter(self.actions)

    def to_text(self) -> str:
        return "".join(f"{a}\n" for a in self.actions)


# ---------------------------------------------------------------------------
# s-expression reader


@dataclass
class _Tok:
    text: str
    line: int
    col: int


class _Node(list):
    """A parenthesised list that remembers where it started."""

    line = 0
    col = 0


_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s()]+")


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        s = m.group()
        col = m.start() - line_start + 1
        if not s.isspace() and not s.startswith(";"):
            toks.append(_Tok(s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = m.start() + s.rindex("\n") + 1
    return toks


def _read(text: str) -> _Node:
    toks = _tokenize(text)
    if not toks:
        raise PDDLSyntaxError("empty input", 1, 1)
    stack: list[_Node] = []
    root = None
    for tok in toks:
        if tok.text == "(":
            node = _Node()
            node.line, node.col = tok.line, tok.col
            if stack:
                stack[-1].append(node)
            elif root is not None:
                raise PDDLSyntaxError("unexpected content after top-level form", tok.line, tok.col)
            else:
                root = node
            stack.append(node)
        elif tok.text == ")":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", tok.line, tok.col)
            stack.pop()
        else:
            if not stack:
                raise PDDLSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)
            stack[-1].append(tok)
    if stack:
        raise PDDLSyntaxError("missing ')'", stack[-1].line, stack[-1].col)
    return root


def _sym(x, what="symbol") -> str:
    if isinstance(x, _Tok):
        return x.text
    raise PDDLSyntaxError(f"expected {what}, found a list", x.line, x.col)


def _where(x) -> tuple[int, int]:
    return (x.line, x.col)


def _typed_list(items: list, default: str = "object") -> list[tuple[str, str]]:
    """Parse ``a b - t c - u d`` into [(a, t), (b, t), (c, u), (d, object)]."""
    out, pending = [], []
    i = 0
    while i < len(items):
        s = _sym(items[i])
        if s == "-":
            if i + 1 >= len(items):
                raise PDDLSyntaxError("type expected after '-'", *_where(items[i]))
            t = items[i + 1]
            if isinstance(t, _Node):
                if t and isinstance(t[0], _Tok) and t[0].text == "either":
                    raise UnsupportedFeatureError(":typing (either)", "either-types are not supported")
                raise PDDLSyntaxError("type name expected", *_where(t))
            out.extend((p, t.text) for p in pending)
            pending = []
            i += 2
        else:
            pending.append(s)
            i += 1
    out.extend((p, default) for p in pending)
    return out


def _check_define(root: _Node, kind: str) -> tuple[str, list]:
    if not root or _sym(root[0]).lower() != "define":
        raise PDDLSyntaxError("expected (define ...)", root.line, root.col)
    if len(root) < 2 or not isinstance(root[1], _Node) or len(root[1]) != 2:
        raise PDDLSyntaxError(f"expected ({kind} NAME)", root.line, root.col)
    head = root[1]
    if _sym(head[0]).lower() != kind:
        raise PDDLSyntaxError(f"expected ({kind} NAME)", head.line, head.col)
    return _sym(head[1]), root[2:]


def _conjunction(node, what: str) -> list[_Node]:
    """Flatten ``(and a b ...)`` or a single atom into a list of atom nodes."""
    if isinstance(node, _Tok):
        raise PDDLSyntaxError(f"{what}: expected a formula", node.line, node.col)
    if not node:
        return []
    head = node[0]
    if isinstance(head, _Tok):
        h = head.text.lower()
        if h == "and":
            out = []
            for sub in node[1:]:
                out.extend(_conjunction(sub, what))
            return out
        if h in UNSUPPORTED_CONNECTIVES:
            raise UnsupportedFeatureError(UNSUPPORTED_CONNECTIVES[h], f"'{head.text}' in {what}")
    return [node]


def _atom(node: _Node, predicates: dict | None, what: str) -> Atom:
    parts = [_sym(x) for x in node]
    if not parts:
        raise PDDLSyntaxError(f"empty atom in {what}", node.line, node.col)
    name = parts[0]
    if predicates is not None:
        if name not in predicates:
            raise UnknownSymbolError(f"unknown predicate {name} in {what} (line {node.line})")
        if predicates[name] != len(parts) - 1:
            raise ArityError(
                f"predicate {name} expects {predicates[name]} arguments, got {len(parts) - 1} "
                f"in {what} (line {node.line})"
            )
    return tuple(parts)


def _parse_action(items: list, predicates: dict, types: dict) -> ActionSchema:
    name = _sym(items[0], "action name")
    fields: dict[str, object] = {}
    i = 1
    while i < len(items):
        key = _sym(items[i]).lower()
        if i + 1 >= len(items):
            raise PDDLSyntaxError(f"missing value for {key}", *_where(items[i]))
        fields[key] = items[i + 1]
        i += 2
    params = _typed_list(list(fields.get(":parameters", [])))
    for v, t in params:
        if not v.startswith("?"):
            raise PDDLSyntaxError(f"parameter {v} must start with '?'", *_where(items[0]))
        if t not in types:
            raise UnknownSymbolError(f"unknown type {t} in action {name}")
    pre = [_atom(a, predicates, f"precondition of {name}") for a in _conjunction(fields.get(":precondition", _Node()), name)]
    add, dele, cost = [], [], 1
    eff = fields.get(":effect", _Node())
    for node in _effect_parts(eff, name):
        head = node[0].text.lower() if isinstance(node[0], _Tok) else ""
        if head == "not-effect":
            dele.append(_atom(node[1], predicates, f"effect of {name}"))
        elif head == "increase":
            cost = _cost_value(node, name)
        else:
            add.append(_atom(node, predicates, f"effect of {name}"))
    if ":cost" in fields:
        cost = _number(fields[":cost"], name)
    return ActionSchema(name, tuple(params), tuple(pre), tuple(add), tuple(dele), cost)


def _effect_parts(node, name: str) -> list:
    if isinstance(node, _Tok):
        raise PDDLSyntaxError(f"effect of {name}: expected a formula", node.line, node.col)
    if not node:
        return []
    head = node[0].text.lower() if isinstance(node[0], _Tok) else ""
    if head == "and":
        out = []
        for sub in node[1:]:
            out.extend(_effect_parts(sub, name))
        return out
    if head == "not":
        if len(node) != 2 or not isinstance(node[1], _Node):
            raise PDDLSyntaxError("malformed (not ...) effect", node.line, node.col)
        marked = _Node([_Tok("not-effect", node.line, node.col), node[1]])
        marked.line, marked.col = node.line, node.col
        return [marked]
    if head in ("forall", "when"):
        raise UnsupportedFeatureError(UNSUPPORTED_CONNECTIVES[head], f"'{head}' in effect of {name}")
    if head in ("decrease", "assign", "scale-up", "scale-down"):
        raise UnsupportedFeatureError(":numeric-fluents", f"'{head}' in effect of {name}")
    return [node]


def _number(tok, name: str) -> float:
    text = _sym(tok, "number")
    try:
        value = float(text)
    except ValueError:
        raise PDDLSyntaxError(f"cost of {name} must be a number", tok.line, tok.col) from None
    return int(value) if value.is_integer() else value


def _cost_value(node: _Node, name: str) -> float:
    # only (increase (total-cost) N) with a constant N
    if len(node) != 3 or not isinstance(node[1], _Node) or [_sym(x) for x in node[1]] != ["total-cost"]:
        raise UnsupportedFeatureError(":numeric-fluents", f"only (increase (total-cost) N) is accepted in {name}")
    if isinstance(node[2], _Node):
        raise UnsupportedFeatureError(":numeric-fluents", f"non-constant action cost in {name}")
    return _number(node[2], name)


def _subtypes(types: dict, t: str) -> set[str]:
    out = {t}
    changed = True
    while changed:
        changed = False
        for child, parent in types.items():
            if parent in out and child not in out:
                out.add(child)
                changed = True
    return out


def parse_task(domain_text: str, problem_text: str) -> Task:
    """Parse a domain/problem pair. The returned task has no grounded operators."""
    dom = _read(domain_text)
    domain_name, sections = _check_define(dom, "domain")
    requirements = [":strips"]
    types: dict[str, str] = {"object": "object"}
    constants: dict[str, str] = {}
    predicates: dict[str, int] = {}
    action_nodes = []
    for sec in sections:
        if not isinstance(sec, _Node) or not sec:
            raise PDDLSyntaxError("expected a domain section", *_where(sec))
        key = _sym(sec[0]).lower()
        if key == ":requirements":
            requirements = [_sym(r).lower() for r in sec[1:]]
            for r in requirements:
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeatureError(r)
        elif key == ":types":
            for t, parent in _typed_list(list(sec[1:])):
                types[t] = parent
                types.setdefault(parent, "object")
        elif key == ":constants":
            constants.update(dict(_typed_list(list(sec[1:]))))
        elif key == ":predicates":
            for p in sec[1:]:
                if not isinstance(p, _Node) or not p:
                    raise PDDLSyntaxError("malformed predicate declaration", *_where(p))
                predicates[_sym(p[0])] = len(_typed_list(list(p[1:])))
        elif key == ":functions":
            names = [_sym(f[0]) for f in sec[1:] if isinstance(f, _Node) and f]
            if names != ["total-cost"]:
                raise UnsupportedFeatureError(":numeric-fluents", "only (total-cost) may be declared")
        elif key == ":action":
            action_nodes.append(sec)
        elif key in (":derived", ":axiom"):
            raise UnsupportedFeatureError(":derived-predicates")
        elif key == ":durative-action":
            raise UnsupportedFeatureError(":durative-actions")
        else:
            raise PDDLSyntaxError(f"unknown domain section {key}", sec.line, sec.col)
    for t, parent in types.items():
        if parent not in types:
            raise UnknownSymbolError(f"unknown parent type {parent} of {t}")
    schemas = tuple(_parse_action(list(a[1:]), predicates, types) for a in action_nodes)
    for s in schemas:
        for atom in s.preconditions + s.add_effects + s.del_effects:
            for arg in atom[1:]:
                if not arg.startswith("?") and arg not in constants:
                    raise UnknownSymbolError(f"unknown constant {arg} in action {s.name}")

    prob = _read(problem_text)
    problem_name, psections = _check_define(prob, "problem")
    objects = dict(constants)
    init, goal = [], None
    for sec in psections:
        if not isinstance(sec, _Node) or not sec:
            raise PDDLSyntaxError("expected a problem section", *_where(sec))
        key = _sym(sec[0]).lower()
        if key == ":domain":
            if len(sec) != 2 or _sym(sec[1]) != domain_name:
                raise UnknownSymbolError(f"problem refers to a different domain than {domain_name}")
        elif key == ":requirements":
            for r in sec[1:]:
                if _sym(r).lower() not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeatureError(_sym(r).lower())
        elif key == ":objects":
            for o, t in _typed_list(list(sec[1:])):
                if t not in types:
                    raise UnknownSymbolError(f"unknown type {t} for object {o}")
                objects[o] = t
        elif key == ":init":
            for a in sec[1:]:
                if not isinstance(a, _Node):
                    raise PDDLSyntaxError("expected an atom in :init", *_where(a))
                if a and isinstance(a[0], _Tok) and a[0].text == "=":
                    continue  # (= (total-cost) 0)
                init.append(a)
        elif key == ":goal":
            if len(sec) != 2:
                raise PDDLSyntaxError("expected exactly one goal formula", sec.line, sec.col)
            goal = _conjunction(sec[1], "goal")
        elif key == ":metric":
            continue
        else:
            raise PDDLSyntaxError(f"unknown problem section {key}", sec.line, sec.col)
    if not goal:
        raise PDDLError("empty goal")

    def ground_atom(node, what):
        atom = _atom(node, predicates, what)
        for arg in atom[1:]:
            if arg not in objects:
                raise UnknownSymbolError(f"unknown object {arg} in {what} (line {node.line})")
        return atom

    return Task(
        domain_name=domain_name,
        problem_name=problem_name,
        types=types,
        objects=objects,
        predicates=predicates,
        schemas=schemas,
        init=frozenset(ground_atom(a, ":init") for a in init),
        goal=frozenset(ground_atom(a, ":goal") for a in goal),
        requirements=tuple(requirements),
        constants=frozenset(constants),
    )


def ground_task(task: Task) -> Task:
    """Populate O with one grounded action per schema and type-consistent binding."""
    by_type = {
        t: sorted(o for o, ot in task.objects.items() if ot in _subtypes(task.types, t))
        for t in task.types
    }
    ops = []
    for schema in sorted(task.schemas, key=lambda s: s.name):
        domains = [by_type[t] for _, t in schema.parameters]
        for args in itertools.product(*domains):
            ops.append(schema.ground(args))
    return replace(task, operators=tuple(ops))


def apply_action(state: frozenset, action: GroundedAction) -> frozenset:
    if not action.preconditions <= state:
        missing = min(action.preconditions - state)
        raise PreconditionError(action, missing)
    return (state - action.del_effects) | action.add_effects


def successors(state: frozenset, operators: Iterable[GroundedAction]) -> Iterator[tuple[GroundedAction, frozenset]]:
    for op in operators:
        if op.preconditions <= state:
            yield op, (state - op.del_effects) | op.add_effects


@dataclass(frozen=True)
class PlanValidation:
    valid: bool
    cost: float
    step: int | None = None  # 1-based index of the failing step
    missing: Atom | None = None
    message: str = ""

    def __bool__(self):
        return self.valid


def validate_plan(task: Task, plan: Plan | Sequence[GroundedAction]) -> PlanValidation:
    actions = plan.actions if isinstance(plan, Plan) else tuple(plan)
    known = set(task.operators)
    state = task.init
    cost = 0
    for i, a in enumerate(actions, 1):
        if known and a not in known:
            return PlanValidation(False, cost, i, None, f"step {i}: {a} is not in O")
        if not a.preconditions <= state:
            missing = min(a.preconditions - state)
            return PlanValidation(False, cost, i, missing, f"step {i}: {a} requires {format_atom(missing)}")
        state = (state - a.del_effects) | a.add_effects
        cost += a.cost
    if not task.goal <= state:
        missing = min(task.goal - state)
        return PlanValidation(False, cost, None, missing, f"goal not reached: {format_atom(missing)} missing")
    return PlanValidation(True, cost)


def trajectory(task: Task, plan: Plan | Sequence[GroundedAction]) -> list[tuple[frozenset, GroundedAction | None]]:
    """States visited by a plan paired with the action applied from each (None at the end)."""
    out = []
    state = task.init
    for a in plan:
        out.append((state, a))
        state = apply_action(state, a)
    out.append((state, None))
    return out


# ---------------------------------------------------------------------------
# text serialisation


def _fmt_typed(pairs: Iterable[tuple[str, str]]) -> str:
    groups: list[tuple[str, list[str]]] = []
    for name, t in pairs:
        if groups and groups[-1][0] == t:
            groups[-1][1].append(name)
        else:
            groups.append((t, [name]))
    return " ".join(f"{' '.join(names)} - {t}" for t, names in groups)


def _fmt_conj(atoms: Iterable[Atom], negated: Iterable[Atom] = ()) -> str:
    parts = [format_atom(a) for a in atoms] + [f"(not {format_atom(a)})" for a in negated]
    return "(and " + " ".join(parts) + ")"


def format_domain(task: Task) -> str:
    lines = [f"(define (domain {task.domain_name})", f"  (:requirements {' '.join(task.requirements)})"]
    sub = [(t, p) for t, p in task.types.items() if t != "object"]
    if sub:
        lines.append(f"  (:types {_fmt_typed(sub)})")
    if task.constants:
        consts = sorted((o, task.objects[o]) for o in task.constants)
        lines.append(f"  (:constants {_fmt_typed(consts)})")
    preds = " ".join(
        "(" + " ".join([p] + [f"?a{i}" for i in range(n)]) + ")" for p, n in task.predicates.items()
    )
    lines.append(f"  (:predicates {preds})")
    for s in task.schemas:
        lines.append(f"  (:action {s.name}")
        lines.append(f"    :parameters ({_fmt_typed(s.parameters)})")
        lines.append(f"    :precondition {_fmt_conj(s.preconditions)}")
        lines.append(f"    :effect {_fmt_conj(s.add_effects, s.del_effects)}")
        if s.cost != 1:
            lines.append(f"    :cost {s.cost}")
        lines[-1] += ")"
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def format_problem(task: Task) -> str:
    objs = sorted((o, t) for o, t in task.objects.items() if o not in task.constants)
    lines = [
        f"(define (problem {task.problem_name})",
        f"  (:domain {task.domain_name})",
        f"  (:objects {_fmt_typed(objs)})",
        "  (:init " + " ".join(format_atom(a) for a in sorted(task.init)) + ")",
        f"  (:goal {_fmt_conj(sorted(task.goal))}))",
    ]
    return "\n".join(lines) + "\n"


def parse_plan(text: str, task: Task) -> Plan:
    """Read one ``(NAME obj ...)`` per line and resolve against task.O."""
    index = {op.key: op for op in task.operators}
    actions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise PDDLSyntaxError("expected (NAME args...)", lineno, 1)
        parts = line[1:-1].split()
        key = (parts[0], tuple(parts[1:]))
        if key not in index:
            raise UnknownSymbolError(f"line {lineno}: {line} is not a grounded action of the task")
        actions.append(index[key])
    return Plan(tuple(actions))
