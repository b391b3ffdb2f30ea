"""Batch experiments: corpus generation, table building, attacks and aggregation."""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

from .attacks import (
    THREAT_MODELS,
    AttackError,
    Knowledge,
    Mode,
    ThreatModel,
    change_text,
    offline_attack,
    online_attack,
    threat_model,
)
from .domains import DOMAINS, random_task
from .grid import GridHeuristic, generate_maze
from .planner import Algorithm, Heuristic, SearchConfig
from .strips import PDDLError
from .windows import WindowError, WindowTable, build_table, dump_table, load_table, threshold_table

log = logging.getLogger(__name__)

# table-generation defaults per flavor and threat knowledge
GRID_TABLE_DEFAULTS = {
    Knowledge.INFORMED: ("euclidean", 0),
    Knowledge.AGENT_HEURISTIC: ("euclidean", 0),
    Knowledge.BLACK_BOX: ("manhattan", 10),
}
STRIPS_TABLE_THRESHOLD = 1


def parse_search_config(text: str) -> SearchConfig:
    """``bfs``, ``astar+zero``, ``gbfs+additive`` ... with an optional ``@budget``."""
    text = text.strip().lower()
    budget = None
    if "@" in text:
        text, b = text.split("@", 1)
        budget = int(b)
    if text == "bfs":
        cfg = SearchConfig(Algorithm.BFS)
    else:
        alg, _, h = text.partition("+")
        cfg = SearchConfig(Algorithm(alg), Heuristic(h or "zero"))
    if budget is not None:
        cfg = SearchConfig(cfg.algorithm, cfg.heuristic, budget, cfg.tie_break)
    return cfg


def _parse_ints(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    out = []
    for part in str(text).replace(",", " ").split():
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _parse_names(text) -> tuple[str, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(x for x in str(text).replace(",", " ").split() if x)


@dataclass
class ExperimentConfig:
    """One experiment. Grid corpora use width/height/wall_frequency; STRIPS
    corpora cycle through every combination of ``sizes``."""

    name: str = "experiment"
    flavor: str = "grid"  # grid | strips
    domain: str = "maze"  # maze | air-cargo | blocks
    corpus_count: int = 200
    corpus_seed: int = 0
    width: int = 15
    height: int = 15
    wall_frequency: float = 0.25
    placement: str = "random"
    sizes: str = "planes=2,3 cargos=2,3 airports=2,3"
    table_instances: int = 500
    table_seed: int = 100_000
    window_size: int | None = None
    table_threshold: int | None = None  # None: per-threat defaults
    table_adversary: str | None = None  # strips search config used to brute-force tables
    table_dir: str | None = None  # cache of built tables
    agent: str | None = None  # grid heuristic or strips search config
    adversary: str | None = None  # offline black-box search config
    blackbox_heuristic: str | None = None  # online black-box H_adv
    threats: tuple = ("online-informed",)
    budgets: tuple = (1, 2)
    sense: str = "full"
    workers: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        self.threats = _parse_names(self.threats)
        self.budgets = _parse_ints(self.budgets)
        for t in self.threats:
            if t not in THREAT_MODELS:
                raise ValueError(f"unknown threat model {t!r} (known: {', '.join(THREAT_MODELS)})")
        if self.flavor not in ("grid", "strips"):
            raise ValueError("flavor must be 'grid' or 'strips'")
        if self.flavor == "grid" and self.domain != "maze":
            raise ValueError("grid corpora use the 'maze' domain")
        if self.flavor == "strips" and self.domain not in DOMAINS:
            raise ValueError(f"unknown STRIPS domain {self.domain!r} (known: {', '.join(DOMAINS)})")
        for t in self.threats:
            mode = Mode(t.split("-")[0])
            if (mode is Mode.ONLINE) != (self.flavor == "grid"):
                raise ValueError(f"threat {t} does not apply to {self.flavor} corpora")
        if self.corpus_count < 0 or self.table_instances < 0:
            raise ValueError("counts must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.agent is None:
            self.agent = "euclidean" if self.flavor == "grid" else "astar+zero"
        if self.flavor == "grid":
            GridHeuristic(self.agent)
        else:
            parse_search_config(self.agent)

    # -- size grid for STRIPS corpora
    def size_combinations(self) -> list[dict]:
        axes = []
        for part in self.sizes.split():
            key, _, vals = part.partition("=")
            axes.append((key, _parse_ints(vals)))
        combos = [{}]
        for key, vals in axes:
            combos = [dict(c, **{key: v}) for c in combos for v in vals]
        return combos

    @classmethod
    def from_file(cls, path: str, overrides: dict | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise FileNotFoundError(path)
        if "experiment" not in parser:
            raise ValueError(f"{path}: missing [experiment] section")
        values = dict(parser["experiment"])
        values.update(overrides or {})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw)
        return cls(**kwargs)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser["experiment"] = {k: _ini_value(v) for k, v in asdict(self).items() if v is not None}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


_INT_KEYS = {"corpus_count", "corpus_seed", "width", "height", "table_instances", "table_seed",
             "window_size", "table_threshold", "workers"}


def _coerce(key: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if raw in ("", "none", "None"):
        return None
    if key in _INT_KEYS:
        return int(raw)
    if key == "wall_frequency":
        return float(raw)
    return raw


def _ini_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# corpora and tables


def grid_corpus(config: ExperimentConfig, count: int, seed: int) -> list:
    return [generate_maze(config.width, config.height, config.wall_frequency, seed + i,
                          placement=config.placement) for i in range(count)]


def strips_corpus(config: ExperimentConfig, count: int, seed: int) -> list:
    combos = config.size_combinations()
    return [random_task(config.domain, combos[i % len(combos)], seed + i) for i in range(count)]


def make_corpus(config: ExperimentConfig, count: int | None = None, seed: int | None = None) -> list:
    count = config.corpus_count if count is None else count
    seed = config.corpus_seed if seed is None else seed
    if config.flavor == "grid":
        return grid_corpus(config, count, seed)
    return strips_corpus(config, count, seed)


def table_spec(config: ExperimentConfig, threat: ThreatModel) -> tuple[str, int]:
    """(adversary description, threshold) used to build the threat's table."""
    if config.flavor == "grid":
        heuristic, threshold = GRID_TABLE_DEFAULTS[threat.knowledge]
        if threat.knowledge is Knowledge.BLACK_BOX and config.blackbox_heuristic:
            heuristic = config.blackbox_heuristic
        elif threat.knowledge is not Knowledge.BLACK_BOX:
            heuristic = config.agent
    else:
        heuristic = config.table_adversary or "astar+additive"
        threshold = STRIPS_TABLE_THRESHOLD
    if config.table_threshold is not None:
        threshold = config.table_threshold
    return heuristic, threshold


class TableCache:
    """Raw tables are built once per adversary and thresholded per threat."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.raw: dict[str, WindowTable] = {}
        self.build_time = 0.0

    def _path(self, adversary: str) -> str | None:
        c = self.config
        if not c.table_dir:
            return None
        tag = c.domain if c.flavor == "strips" else f"{c.width}x{c.height}-{c.wall_frequency}-{c.placement}"
        name = f"{c.flavor}-{tag}-{adversary.replace('+', '_')}-N{c.table_instances}-s{c.table_seed}.table"
        return os.path.join(c.table_dir, name)

    def get(self, adversary: str, threshold: int) -> WindowTable:
        if adversary not in self.raw:
            path = self._path(adversary)
            if path and os.path.exists(path):
                with open(path) as fh:
                    self.raw[adversary] = load_table(fh.read())
            else:
                t0 = time.perf_counter()
                self.raw[adversary] = self._build(adversary)
                self.build_time += time.perf_counter() - t0
                if path:
                    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
                    with open(path, "w") as fh:
                        fh.write(dump_table(self.raw[adversary]))
        return threshold_table(self.raw[adversary], threshold)

    def _build(self, adversary: str) -> WindowTable:
        c = self.config
        instances = make_corpus(c, c.table_instances, c.table_seed)
        adv = GridHeuristic(adversary) if c.flavor == "grid" else parse_search_config(adversary)
        log.info("building %s table from %d instances (%s)", c.flavor, len(instances), adversary)
        return build_table(instances, c.flavor, n=c.window_size, adversary=adv)


# ---------------------------------------------------------------------------
# running


@dataclass
class InstanceRecord:
    threat: str
    k: int
    instance: int
    baseline_cost: float | None = None
    attacked_cost: float | None = None
    success: bool = False
    decreased: bool = False
    unsolvable: bool = False
    removed: list = field(default_factory=list)
    illegal_skipped: int = 0
    error: str | None = None
    timings: dict = field(default_factory=dict)

    @property
    def increase(self) -> float | None:
        if self.error or self.unsolvable:
            return None
        return self.attacked_cost - self.baseline_cost

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("baseline_cost", "attacked_cost"):
            if d[key] == math.inf:
                d[key] = "inf"
        return d


def _attack_one(args):
    config, threat, table, index, instance = args
    try:
        if threat.mode is Mode.ONLINE:
            report, _ = online_attack(instance, table, threat, config.agent, config.sense, config.window_size)
        else:
            agent = parse_search_config(config.agent)
            adversary = parse_search_config(config.adversary) if config.adversary else None
            report = offline_attack(instance, table, threat, adversary, agent)
    except (AttackError, WindowError, PDDLError, ValueError) as e:
        return InstanceRecord(threat.name, threat.k, index, error=f"{type(e).__name__}: {e}")
    return InstanceRecord(
        threat.name, threat.k, index, report.baseline_cost, report.attacked_cost,
        report.success, report.decreased, report.unsolvable,
        [change_text(c) for c in report.removed],
        report.illegal_skipped, None, dict(report.timings),
    )


@dataclass
class AggregateRow:
    threat: str
    k: int
    instances: int
    successes: int
    failures: int
    errors: int
    unsolvable: int
    decreased: int
    success_rate: float
    unsolvable_rate: float
    mean_increase: float | None
    attack_seconds: float
    replan_seconds: float

    @staticmethod
    def csv_columns() -> list[str]:
        return [f.name for f in fields(AggregateRow)]


@dataclass
class AggregateReport:
    name: str = "experiment"
    rows: list[AggregateRow] = field(default_factory=list)
    table_sizes: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def row(self, threat: str, k: int) -> AggregateRow:
        for r in self.rows:
            if r.threat == threat and r.k == k:
                return r
        raise KeyError((threat, k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(AggregateRow.csv_columns())
        for r in self.rows:
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                             for v in (getattr(r, c) for c in AggregateRow.csv_columns())])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, name: str = "experiment") -> "AggregateReport":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != AggregateRow.csv_columns():
            raise ValueError("unexpected CSV columns")
        rows = []
        for rec in reader:
            kwargs = {}
            for f in fields(AggregateRow):
                v = rec[f.name]
                if f.name == "threat":
                    kwargs[f.name] = v
                elif v == "":
                    kwargs[f.name] = None
                elif f.name in ("success_rate", "unsolvable_rate", "mean_increase",
                                "attack_seconds", "replan_seconds"):
                    kwargs[f.name] = float(v)
                else:
                    kwargs[f.name] = int(v)
            rows.append(AggregateRow(**kwargs))
        return cls(name, rows)

    def plot_series(self) -> list[dict]:
        """One row per (threat, k): the bar heights of success-rate and cost-increase plots."""
        return [{"threat": r.threat, "k": r.k, "success_rate": r.success_rate,
                 "mean_increase": r.mean_increase} for r in self.rows]


def aggregate(records: list[InstanceRecord], threat: str, k: int) -> AggregateRow:
    mine = [r for r in records if r.threat == threat and r.k == k]
    ok = [r for r in mine if r.error is None]
    succ = sum(r.success for r in ok)
    unsolv = sum(r.unsolvable for r in ok)
    finite = [r.increase for r in ok if not r.unsolvable]
    return AggregateRow(
        threat=threat,
        k=k,
        instances=len(mine),
        successes=succ,
        failures=len(ok) - succ,
        errors=len(mine) - len(ok),
        unsolvable=unsolv,
        decreased=sum(r.decreased for r in ok),
        success_rate=succ / len(ok) if ok else 0.0,
        unsolvable_rate=unsolv / len(ok) if ok else 0.0,
        mean_increase=statistics.fmean(finite) if finite else None,
        attack_seconds=sum(r.timings.get("attack", 0.0) for r in ok),
        replan_seconds=sum(r.timings.get("replan", 0.0) for r in ok),
    )


def run_experiment(config: ExperimentConfig, corpus: list | None = None,
                   tables: dict | None = None) -> tuple[AggregateReport, list[InstanceRecord]]:
    """Attack every instance under every configured threat and budget.

    ``tables`` maps threat names to prebuilt tables; missing ones are built
    (or loaded from ``table_dir``). Per-instance failures are recorded,
    never raised.
    """
    t_start = time.perf_counter()
    t0 = time.perf_counter()
    corpus = make_corpus(config) if corpus is None else corpus
    corpus_time = time.perf_counter() - t0
    cache = TableCache(config)
    tables = dict(tables or {})
    records: list[InstanceRecord] = []
    report = AggregateReport(config.name)
    for name in config.threats:
        base = threat_model(name, 0, _adversary_heuristic(config, name))
        if name not in tables:
            adversary, threshold = table_spec(config, base)
            tables[name] = cache.get(adversary, threshold)
        table = tables[name]
        report.table_sizes[name] = len(table)
        for k in config.budgets:
            threat = base.with_budget(k)
            jobs = [(config, threat, table, i, inst) for i, inst in enumerate(corpus)]
            if config.workers > 1:
                with ProcessPoolExecutor(config.workers) as pool:
                    batch = list(pool.map(_attack_one, jobs, chunksize=8))
            else:
                batch = [_attack_one(j) for j in jobs]
            records.extend(batch)
            report.rows.append(aggregate(batch, name, k))
            log.info("%s k=%d success %.3f", name, k, report.rows[-1].success_rate)
    report.timings = {"corpus": corpus_time, "tables": cache.build_time,
                      "total": time.perf_counter() - t_start}
    return report, records


def _adversary_heuristic(config: ExperimentConfig, name: str) -> str | None:
    if not name.endswith("black_box"):
        return None
    if config.flavor == "grid":
        return config.blackbox_heuristic or "manhattan"
    return None


# ---------------------------------------------------------------------------
# output


def emit_report(report: AggregateReport, records: list[InstanceRecord] | None, out_dir: str,
                formats=("csv", "records", "plot")) -> list[str]:
    """Write ``<name>.csv``, ``<name>.records.jsonl`` and ``<name>.plot.csv``; returns the paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out_dir}: {e.strerror}") from e
    written = []

    def write(path, text):
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as e:
            raise OSError(f"cannot write {path}: {e.strerror}") from e
        written.append(path)

    base = os.path.join(out_dir, report.name)
    if "csv" in formats:
        write(base + ".csv", report.to_csv())
    if "records" in formats:
        lines = [json.dumps(r.to_dict(), sort_keys=True) for r in records or []]
        write(base + ".records.jsonl", "".join(line + "\n" for line in lines))
    if "plot" in formats:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["threat", "k", "success_rate", "mean_increase"], lineterminator="\n")
        writer.writeheader()
        for row in report.plot_series():
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
        write(base + ".plot.csv", buf.getvalue())
    return written


def maze_defaults(**overrides) -> ExperimentConfig:
    """The 15x15 maze study with all three online threat models."""
    kw = dict(name="mazes", flavor="grid", domain="maze",
              threats=("online-informed", "online-agent_heuristic", "online-black_box"))
    kw.update(overrides)
    return ExperimentConfig(**kw)


def strips_defaults(**overrides) -> ExperimentConfig:
    kw = dict(name="air-cargo", flavor="strips", domain="air-cargo", corpus_count=200,
              table_instances=200, agent="gbfs+additive",
              threats=("offline-agent_heuristic", "offline-black_box"), budgets=(1, 2, 3, 4))
    kw.update(overrides)
    return ExperimentConfig(**kw)


def summarize(report: AggregateReport) -> str:
    lines = [f"{'threat':<24} {'k':>2} {'n':>5} {'success':>8} {'unsolv':>7} {'mean+':>7} {'err':>4}"]
    for r in report.rows:
        mean = "-" if r.mean_increase is None else f"{r.mean_increase:.2f}"
        lines.append(f"{r.threat:<24} {r.k:>2} {r.instances:>5} {r.success_rate:>8.3f} "
                     f"{r.unsolvable_rate:>7.3f} {mean:>7} {r.errors:>4}")
    return "\n".join(lines)

