"""Bundled STRIPS domains and seeded random problem generators."""

from __future__ import annotations

import random
from importlib import resources

from .strips import Task, ground_task, parse_task


def read_data(name: str) -> str:
    return resources.files("advplan.data").joinpath(name).read_text()


AIR_CARGO_DOMAIN = read_data("air_cargo_domain.pddl")
AIR_CARGO_PROBLEM = read_data("air_cargo_problem.pddl")
BLOCKS_DOMAIN = read_data("blocks_domain.pddl")


def air_cargo_example() -> Task:
    """The two-plane, two-cargo swap problem, grounded."""
    return ground_task(parse_task(AIR_CARGO_DOMAIN, AIR_CARGO_PROBLEM))


def air_cargo_problem_text(planes: int, cargos: int, airports: int, seed: int) -> str:
    rng = random.Random(seed)
    ps = [f"p{i + 1}" for i in range(planes)]
    cs = [f"c{i + 1}" for i in range(cargos)]
    ap = [f"a{i + 1}" for i in range(airports)]
    init = [f"(At {p} {rng.choice(ap)})" for p in ps]
    goal = []
    for c in cs:
        start = rng.choice(ap)
        init.append(f"(At {c} {start})")
        goal.append(f"(At {c} {rng.choice([a for a in ap if a != start] or ap)})")
    objects = []
    if ps:
        objects.append(" ".join(ps) + " - plane")
    if cs:
        objects.append(" ".join(cs) + " - cargo")
    objects.append(" ".join(ap) + " - airport")
    return (
        f"(define (problem air-cargo-{planes}-{cargos}-{airports}-s{seed})\n"
        "  (:domain air-cargo)\n"
        f"  (:objects {' '.join(objects)})\n"
        f"  (:init {' '.join(init)})\n"
        f"  (:goal (and {' '.join(goal)})))\n"
    )


def random_air_cargo(planes: int, cargos: int, airports: int, seed: int) -> Task:
    return ground_task(parse_task(AIR_CARGO_DOMAIN, air_cargo_problem_text(planes, cargos, airports, seed)))


def _random_towers(blocks: list[str], rng: random.Random) -> list[list[str]]:
    order = blocks[:]
    rng.shuffle(order)
    towers: list[list[str]] = []
    for b in order:
        if towers and rng.random() < 0.5:
            rng.choice(towers).append(b)
        else:
            towers.append([b])
    return towers


def _tower_atoms(towers: list[list[str]]) -> list[str]:
    atoms = []
    for t in towers:
        atoms.append(f"(ontable {t[0]})")
        atoms.extend(f"(on {upper} {lower})" for lower, upper in zip(t, t[1:]))
        atoms.append(f"(clear {t[-1]})")
    return atoms


def blocks_problem_text(blocks: int, seed: int) -> str:
    rng = random.Random(seed)
    bs = [f"b{i + 1}" for i in range(blocks)]
    init = _tower_atoms(_random_towers(bs, rng)) + ["(handempty)"]
    goal = [a for a in _tower_atoms(_random_towers(bs, rng)) if a.startswith("(on ")]
    if not goal:
        goal = [f"(ontable {b})" for b in bs]
    return (
        f"(define (problem blocks-{blocks}-s{seed})\n"
        "  (:domain blocks)\n"
        f"  (:objects {' '.join(bs)} - block)\n"
        f"  (:init {' '.join(init)})\n"
        f"  (:goal (and {' '.join(goal)})))\n"
    )


def random_blocks(blocks: int, seed: int) -> Task:
    return ground_task(parse_task(BLOCKS_DOMAIN, blocks_problem_text(blocks, seed)))


DOMAINS = {
    "air-cargo": AIR_CARGO_DOMAIN,
    "blocks": BLOCKS_DOMAIN,
}


def random_task(domain: str, size: dict, seed: int) -> Task:
    """Generate one task; ``size`` holds generator keyword arguments."""
    if domain == "air-cargo":
        return random_air_cargo(size.get("planes", 2), size.get("cargos", 2), size.get("airports", 3), seed)
    if domain == "blocks":
        return random_blocks(size.get("blocks", 4), seed)
    raise ValueError(f"unknown domain {domain!r} (known: {', '.join(DOMAINS)})")
