"""Command-line entry point: ``advplan <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .domains import DOMAINS, random_task
from .attacks import (
    THREAT_MODELS,
    AttackError,
    Mode,
    brute_force_attack,
    offline_attack,
    online_attack,
    threat_model,
)
from .grid import DStarLite, Grid, GridHeuristic, MazeGenerationError, generate_maze, walk
from .harness import (
    ExperimentConfig,
    emit_report,
    maze_defaults,
    parse_search_config,
    run_experiment,
    strips_defaults,
    summarize,
)
from .planner import OPTIMAL, Outcome, solve
from .reduction import (
    ArcGraph,
    ReductionError,
    dijkstra,
    mvap_to_pddl,
    mvap_to_strips,
    solve_dadvcp,
    solve_dmvap_exhaustive,
)
from .strips import PDDLError, ground_task, parse_plan, parse_task, validate_plan
from .windows import WindowError, build_table, dump_table, load_table

log = logging.getLogger("advplan")


class CLIError(Exception):
    def __init__(self, category: str, message: str, code: int = 1):
        super().__init__(message)
        self.category = category
        self.code = code


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise CLIError("io", f"cannot read {path}: {e.strerror}") from None


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as e:
        raise CLIError("io", f"cannot write {path}: {e.strerror}") from None


def _load_task(args):
    if not args.domain or not args.problem:
        raise CLIError("usage", "need --domain and --problem (or --maze)", 2)
    return ground_task(parse_task(_read(args.domain), _read(args.problem)))


def _load_maze(path: str) -> Grid:
    try:
        return Grid.from_ascii(_read(path))
    except ValueError as e:
        raise CLIError("parse", f"{path}: {e}") from None


def _dump(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


# ---------------------------------------------------------------------------
# subcommands


def cmd_plan(args):
    if args.maze:
        grid = _load_maze(args.maze)
        cells = walk(DStarLite(grid, args.heuristic))
        if cells is None:
            raise CLIError("unsolvable", "goal is unreachable")
        for r, c in cells:
            print(f"{r},{c}")
        print(f"; cost {len(cells) - 1}")
        return
    task = _load_task(args)
    result = solve(task, parse_search_config(args.search))
    if result.outcome is Outcome.BUDGET_EXHAUSTED:
        raise CLIError("budget", f"node budget exhausted after {result.expanded} expansions")
    if not result.solved:
        raise CLIError("unsolvable", f"no plan (expanded {result.expanded} states)")
    text = result.plan.to_text() + f"; cost {result.cost}\n"
    _write(args.out, text)


def cmd_gen_mazes(args):
    for i in range(args.count):
        grid = generate_maze(args.width, args.height, args.wall_frequency, args.seed + i,
                             placement=args.placement)
        _write(os.path.join(args.out, f"maze-{args.seed + i:05d}.txt"), grid.to_ascii())
    print(f"wrote {args.count} mazes to {args.out}")


def cmd_gen_table(args):
    if args.flavor == "grid":
        instances = (generate_maze(args.width, args.height, args.wall_frequency, args.seed + i,
                                   placement=args.placement) for i in range(args.instances))
        adversary = GridHeuristic(args.adversary or "euclidean")
    else:
        size = dict(kv.split("=", 1) for kv in args.size)
        size = {k: int(v) for k, v in size.items()}
        instances = (random_task(args.domain, size, args.seed + i) for i in range(args.instances))
        adversary = parse_search_config(args.adversary or "astar+additive")
    table = build_table(instances, args.flavor, n=args.window_size, threshold=args.threshold,
                        adversary=adversary, reflections=args.reflections)
    _write(args.out, dump_table(table))
    if args.out:
        print(f"{len(table)} windows ({table.metadata['adversarial']} adversarial of "
              f"{table.metadata['instances']} instances) -> {args.out}")


def cmd_attack(args):
    k = args.k
    if args.oracle:
        instance = _load_maze(args.maze) if args.maze else _load_task(args)
        agent = args.agent
        if not args.maze:
            agent = parse_search_config(agent or "astar+zero")
        report = brute_force_attack(instance, agent, k, online=args.online_oracle)
        _dump(report.to_record())
        return
    if not args.threat or not args.table:
        raise CLIError("usage", "need --threat and --table (or --oracle)", 2)
    table = load_table(_read(args.table))
    threat = threat_model(args.threat, k, args.adversary_heuristic)
    if threat.mode is Mode.ONLINE:
        if not args.maze:
            raise CLIError("usage", "online threats attack a --maze", 2)
        report, transcript = online_attack(_load_maze(args.maze), table, threat, args.agent or "euclidean",
                                           args.sense)
        if args.transcript:
            _write(args.transcript, "".join(json.dumps(e.to_record()) + "\n" for e in transcript))
    else:
        task = _load_task(args)
        agent = parse_search_config(args.agent or "astar+zero")
        adversary = parse_search_config(args.adversary) if args.adversary else None
        report = offline_attack(task, table, threat, adversary, agent, restart=args.restart)
    _dump(report.to_record())


def _overrides(pairs) -> dict:
    out = {}
    for kv in pairs or ():
        if "=" not in kv:
            raise CLIError("usage", f"--set expects key=value, got {kv!r}", 2)
        k, v = kv.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_bench(args):
    overrides = _overrides(args.set)
    try:
        if args.config:
            config = ExperimentConfig.from_file(args.config, overrides)
        else:
            base = maze_defaults() if args.preset == "mazes" else strips_defaults()
            values = {k: v for k, v in vars(base).items()}
            values.update(overrides)
            config = ExperimentConfig.from_mapping(values)
    except FileNotFoundError as e:
        raise CLIError("io", f"cannot read config {e}") from None
    except (ValueError, TypeError) as e:
        raise CLIError("config", str(e)) from None
    if args.dump_config:
        sys.stdout.write(config.to_ini())
        return
    report, records = run_experiment(config)
    print(summarize(report))
    out = args.out or config.output_dir
    if out:
        for path in emit_report(report, records, out):
            print(f"wrote {path}")


def cmd_reduce_mvap(args):
    try:
        g = ArcGraph.from_text(_read(args.graph))
    except ReductionError as e:
        raise CLIError("parse", f"{args.graph}: {e}") from None
    domain, problem = mvap_to_pddl(g)
    if args.out_domain or args.out_problem:
        _write(args.out_domain, domain)
        _write(args.out_problem, problem)
    result = {"nodes": g.n, "arcs": len(g.arcs), "shortest_path": _jnum(dijkstra(g))}
    if args.k is not None and args.h is not None:
        mvap, witness = solve_dmvap_exhaustive(g, args.k, args.h)
        advcp, removed = solve_dadvcp(mvap_to_strips(g), args.k, args.h, OPTIMAL)
        result.update({
            "k": args.k, "h": args.h, "d_mvap": mvap, "d_advcp": advcp,
            "mvap_witness": [f"{u}->{v}" for u, v in witness or []],
            "advcp_witness": [str(a) for a in removed],
        })
    _dump(result)


def _jnum(x):
    return "inf" if x == float("inf") else x


def cmd_validate(args):
    task = _load_task(args)
    plan = parse_plan(_read(args.plan), task)
    v = validate_plan(task, plan)
    record = {"valid": v.valid, "cost": v.cost, "steps": len(plan)}
    if not v.valid:
        record.update({"step": v.step, "message": v.message})
    _dump(record)
    if not v.valid:
        raise CLIError("invalid-plan", v.message)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advplan", description="Plan, and attack planners by removing actions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def task_args(sp):
        sp.add_argument("--domain", help="PDDL domain file")
        sp.add_argument("--problem", help="PDDL problem file")

    sp = sub.add_parser("plan", help="solve a STRIPS task or a maze")
    task_args(sp)
    sp.add_argument("--maze", help="ASCII maze file (# wall, . free, S start, G goal)")
    sp.add_argument("--search", default="astar+zero", help="bfs | astar+H | gbfs+H, H in zero/additive/goal_count")
    sp.add_argument("--heuristic", default="euclidean", choices=[h.value for h in GridHeuristic])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("gen-mazes", help="write seeded random mazes")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--width", type=int, default=15)
    sp.add_argument("--height", type=int, default=15)
    sp.add_argument("--wall-frequency", type=float, default=0.25)
    sp.add_argument("--placement", choices=["corners", "random"], default="random")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_gen_mazes)

    sp = sub.add_parser("gen-table", help="build a window table from random instances")
    sp.add_argument("--flavor", choices=["grid", "strips"], default="grid")
    sp.add_argument("--instances", type=int, default=500)
    sp.add_argument("--seed", type=int, default=100_000)
    sp.add_argument("--threshold", type=int, default=0)
    sp.add_argument("--window-size", type=int)
    sp.add_argument("--adversary", help="grid heuristic, or STRIPS search config")
    sp.add_argument("--reflections", action="store_true", help="also merge mirror images (grid)")
    sp.add_argument("--width", type=int, default=15)
    sp.add_argument("--height", type=int, default=15)
    sp.add_argument("--wall-frequency", type=float, default=0.25)
    sp.add_argument("--placement", choices=["corners", "random"], default="random")
    sp.add_argument("--domain", choices=sorted(DOMAINS), default="air-cargo")
    sp.add_argument("--size", nargs="*", default=["planes=2", "cargos=2", "airports=3"],
                    help="generator sizes as key=value")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_table)

    sp = sub.add_parser("attack", help="attack one instance")
    task_args(sp)
    sp.add_argument("--maze")
    sp.add_argument("--threat", choices=THREAT_MODELS)
    sp.add_argument("-k", type=int, default=1)
    sp.add_argument("--table")
    sp.add_argument("--agent", help="grid heuristic, or STRIPS search config")
    sp.add_argument("--adversary", help="offline adversary search config")
    sp.add_argument("--adversary-heuristic", help="black-box H_adv")
    sp.add_argument("--sense", choices=["full", "1"], default="full")
    sp.add_argument("--restart", action="store_true", help="restart the adversary search after each removal")
    sp.add_argument("--transcript", help="write the online transcript as JSON lines")
    sp.add_argument("--oracle", action="store_true", help="exhaustive brute-force attack instead")
    sp.add_argument("--online-oracle", action="store_true", help="with --oracle on a maze: walls during the walk")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("bench", help="run a full experiment")
    sp.add_argument("--config", help="INI file with an [experiment] section")
    sp.add_argument("--preset", choices=["mazes", "air-cargo"], default="mazes")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    sp.add_argument("--out", help="output directory for CSV, records and plot data")
    sp.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("reduce-mvap", help="reduce a most-vital-arcs instance to STRIPS")
    sp.add_argument("graph", help="arc list: header 'n s t' then 'u v cost' lines")
    sp.add_argument("--out-domain")
    sp.add_argument("--out-problem")
    sp.add_argument("-k", type=int)
    sp.add_argument("--h", type=float)
    sp.set_defaults(func=cmd_reduce_mvap)

    sp = sub.add_parser("validate", help="check a plan against a task")
    task_args(sp)
    sp.add_argument("--plan", required=True)
    sp.set_defaults(func=cmd_validate)
    return p


def _category(e: Exception) -> str:
    if isinstance(e, PDDLError):
        return "parse"
    if isinstance(e, (WindowError, ReductionError)):
        return "input"
    if isinstance(e, MazeGenerationError):
        return "generation"
    if isinstance(e, AttackError):
        return "attack"
    if isinstance(e, OSError):
        return "io"
    return "invalid-argument"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CLIError as e:
        print(json.dumps({"error": e.category, "message": str(e)}), file=sys.stderr)
        return e.code
    except (PDDLError, WindowError, ReductionError, MazeGenerationError, AttackError, OSError, ValueError) as e:
        print(json.dumps({"error": _category(e), "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
