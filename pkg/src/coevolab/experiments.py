"""Experiment campaigns: bias-grid sweeps, population-size sweeps, the month comparison.

Every trial is an independent task with its own seed, derived from the base
seed and the trial's key (domain, cell, technique, index). Tasks run inline or
in a process pool and are merged back in key order, so results never depend
on the degree of parallelism.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .domains.catalog import generate_synthetic_users, load_catalog, load_users
from .domains.greater_than import GreaterThanDomain, GtConfig
from .domains.wellbeing import (FITNESS_THRESHOLD, MONTH_DAYS, OperatorConfig, PlanBatch,
                                WellbeingDomain, diversity_error)
from .engine import EngineConfig, GenerationStats, run_trial
from .errors import ConfigError
from .mitigation import STRATEGY_NAMES, make_strategy

DOMAINS = ("greater_than", "wellbeing")
DOMAIN_CODES = {"greater_than": 0, "wellbeing": 1}
TECH_CODES = {"baseline": 0, "rv": 1, "ava": 2, "sf": 3, "single": 4}
# seed streams, so auxiliary runs never collide with the main trials
STREAM_TRIAL, STREAM_MONTH_DAY, STREAM_THRESHOLD = 0, 1, 2

COARSE_BETAS = (0.1, 0.3, 0.5, 0.7, 0.9)
FULL_BETAS = tuple(round(0.1 * i, 1) for i in range(1, 11))
POP_SIZES = (30, 60, 130, 260, 510)
MONTH_CONDITIONS = ("single", "baseline", "sf")


def bias_grid(betas):
    """All (beta_h, beta_p) pairs with beta_p >= beta_h."""
    betas = sorted(betas)
    return tuple((bh, bp) for bh in betas for bp in betas if bp >= bh)


def trial_seed(base_seed, domain, cell, technique, index, stream=STREAM_TRIAL) -> int:
    """Deterministic 64-bit seed for one trial; independent of every other key."""
    cell_ints = [int(round(c * 100)) if isinstance(c, float) else int(c) for c in cell]
    key = (DOMAIN_CODES[domain], stream, *cell_ints, TECH_CODES[technique], int(index))
    ss = np.random.SeedSequence(int(base_seed), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


# -- specs and records ----------------------------------------------------------

@dataclass(frozen=True)
class WellbeingSetup:
    """Where the catalog and user pool come from, plus operator settings."""
    catalog_path: str | None = None
    users_path: str | None = None
    n_users: int = 50
    users_seed: int = 0
    month_user: int = 0
    p_c: float = 0.8
    p_m: float = 0.1
    p_b: float = 0.9

    def ops(self):
        return OperatorConfig(p_c=self.p_c, p_m=self.p_m, p_b=self.p_b)


@dataclass(frozen=True)
class SweepSpec:
    domain: str
    techniques: tuple
    grid: tuple  # bias pairs (greater-than) or population sizes (well-being)
    trials: int
    base_seed: int = 0
    generations: int | None = None
    n: int | None = None  # greater-than population size
    S: int = 5
    l: int = 100
    m: float = 0.005
    rv_virulence: float = 0.75
    ava_alpha: float = 0.0125
    ava_mu: float = 0.3
    ava_tau: float = 0.56
    wellbeing: WellbeingSetup = field(default_factory=WellbeingSetup)
    month_days: int = MONTH_DAYS  # well-being: sub-trials forming each cell's month
    log_generations: bool = False

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ConfigError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if not self.grid:
            raise ConfigError("sweep grid is empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for t in self.techniques:
            if t not in STRATEGY_NAMES:
                raise ConfigError(f"unknown technique {t!r}; choose from {', '.join(STRATEGY_NAMES)}")
        if not self.techniques:
            raise ConfigError("no techniques selected")
        if self.domain == "greater_than":
            for cell in self.grid:
                if len(cell) != 2 or not all(0.0 <= b <= 1.0 for b in cell):
                    raise ConfigError(f"bias cell {cell!r} must be a (beta_h, beta_p) pair in [0, 1]")
        else:
            for n in self.grid:
                if int(n) < 2:
                    raise ConfigError(f"population size {n!r} must be >= 2")
        if self.month_days not in (0, MONTH_DAYS):
            raise ConfigError(f"month_days must be 0 (skip) or {MONTH_DAYS}")

    def strategy(self, technique):
        return make_strategy(technique, rv_virulence=self.rv_virulence, ava_alpha=self.ava_alpha,
                             ava_mu=self.ava_mu, ava_tau=self.ava_tau)


@dataclass(frozen=True)
class TrialTask:
    domain: str
    cell: tuple
    technique: str  # a mitigation name, or "single" for single-population evolution
    index: int
    seed: int
    n: int
    generations: int
    S: int
    strategy: object
    gt: GtConfig | None = None
    wellbeing: WellbeingSetup | None = None
    user_index: int = 0
    log_generations: bool = False

    @property
    def key(self):
        return (self.cell, TECH_CODES[self.technique], self.index)


@dataclass
class TrialRecord:
    cell: tuple
    technique: str
    trial: int
    seed: int
    user: str
    ever_disengaged: bool
    disengaged_generations: int
    reached_optimum: bool
    best_objective: float
    final_mean_host: float
    final_mean_parasite: float
    best_genome: object = None
    generations: list = None


@dataclass
class CellSummary:
    cell: tuple
    technique: str
    trials: int
    engaged_run_count: int
    reached_optimum_count: int
    mean_best_objective: float
    median_best_objective: float
    std_best_objective: float
    mean_disengaged_generations: float
    mean_diversity_error: float = math.nan
    diversity_threshold: float = math.nan
    fitness_threshold: float = math.nan

    @property
    def mean_best_ones(self):
        return self.mean_best_objective

    @property
    def mean_best_error(self):
        return self.mean_best_objective

    @property
    def thresholds_met(self) -> bool:
        return bool(self.mean_best_objective <= self.fitness_threshold
                    and self.mean_diversity_error <= self.diversity_threshold)


# -- execution --------------------------------------------------------------------

@lru_cache(maxsize=8)
def _catalog(path):
    return load_catalog(path)


@lru_cache(maxsize=8)
def _pool(setup: WellbeingSetup):
    """(catalog, users, catalog sha256, users sha256) for a well-being setup."""
    catalog = _catalog(setup.catalog_path)
    if setup.users_path is not None:
        users, digest = load_users(setup.users_path)
    else:
        users = generate_synthetic_users(setup.n_users, setup.users_seed, catalog)
        blob = json.dumps([u.to_dict() for u in users], sort_keys=True).encode()
        digest = hashlib.sha256(blob).hexdigest()
    if len(users) < 2:
        raise ConfigError("the user pool needs at least two users for nearest-neighbour mutation")
    return catalog, tuple(users), catalog.sha256, digest


def wellbeing_sources(setup: WellbeingSetup):
    _, users, cat_sha, users_sha = _pool(setup)
    return {"catalog_sha256": cat_sha, "users_sha256": users_sha, "n_users": len(users)}


def build_domain(task: TrialTask):
    if task.domain == "greater_than":
        return GreaterThanDomain(task.gt), "-"
    catalog, users, _, _ = _pool(task.wellbeing)
    user = users[task.user_index % len(users)]
    return WellbeingDomain(catalog, user, users, task.wellbeing.ops()), user.id


def run_task(task: TrialTask) -> TrialRecord:
    domain, user_id = build_domain(task)
    mode = "single_population" if task.technique == "single" else "coevolution"
    config = EngineConfig(n=task.n, S=task.S, generations=task.generations, mode=mode,
                          mitigation=task.strategy, seed=task.seed)
    result = run_trial(config, domain)
    final = result.final_population
    host_mean = float(np.mean(final["host"].objective))
    para = final.get("parasite")
    return TrialRecord(
        cell=task.cell, technique=task.technique, trial=task.index, seed=task.seed, user=user_id,
        ever_disengaged=result.summary.ever_disengaged,
        disengaged_generations=result.summary.disengaged_generation_count,
        reached_optimum=result.summary.reached_optimum,
        best_objective=float(result.summary.best_objective_overall),
        final_mean_host=host_mean,
        final_mean_parasite=float(np.mean(para.objective)) if para is not None else math.nan,
        best_genome=result.final_best_genome["host"],
        generations=result.per_generation if task.log_generations else None,
    )


def execute(tasks, jobs=1, progress=None):
    """Run tasks and return records sorted by task key."""
    tasks = list(tasks)
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if jobs == 1:
        records = []
        for i, task in enumerate(tasks):
            records.append(run_task(task))
            if progress is not None:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = []
            for i, rec in enumerate(pool.map(run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs)))):
                records.append(rec)
                if progress is not None:
                    progress(i + 1, len(tasks))
    order = sorted(range(len(tasks)), key=lambda i: tasks[i].key)
    return [records[i] for i in order]


def _sweep_tasks(spec: SweepSpec):
    tasks = []
    for cell in spec.grid:
        for tech in spec.techniques:
            strategy = spec.strategy(tech)
            for i in range(spec.trials):
                if spec.domain == "greater_than":
                    cell_key = (float(cell[0]), float(cell[1]))
                    gt = GtConfig(l=spec.l, m=spec.m, beta_host=cell_key[0], beta_parasite=cell_key[1])
                    tasks.append(TrialTask(spec.domain, cell_key, tech, i,
                                           trial_seed(spec.base_seed, spec.domain, cell_key, tech, i),
                                           spec.n or 25, spec.generations or 1000, spec.S, strategy,
                                           gt=gt, log_generations=spec.log_generations))
                else:
                    cell_key = (int(cell),)
                    tasks.append(TrialTask(spec.domain, cell_key, tech, i,
                                           trial_seed(spec.base_seed, spec.domain, cell_key, tech, i),
                                           int(cell), spec.generations or 500, spec.S, strategy,
                                           wellbeing=spec.wellbeing, user_index=i,
                                           log_generations=spec.log_generations))
    return tasks


def _month_tasks(spec: SweepSpec):
    """Sub-trials that make up each well-being cell's month, all for the month user."""
    tasks = []
    for cell in spec.grid:
        cell_key = (int(cell),)
        for tech in spec.techniques:
            strategy = spec.strategy(tech)
            for d in range(spec.month_days):
                tasks.append(TrialTask(spec.domain, cell_key, tech, d,
                                       trial_seed(spec.base_seed, spec.domain, cell_key, tech, d, STREAM_MONTH_DAY),
                                       int(cell), spec.generations or 500, spec.S, strategy,
                                       wellbeing=spec.wellbeing, user_index=spec.wellbeing.month_user))
    return tasks


def summarize(records, *, month_diversity=math.nan, diversity_threshold=math.nan,
              fitness_threshold=math.nan) -> CellSummary:
    """Aggregate the trials of one (cell, technique)."""
    records = list(records)
    if not records:
        raise ConfigError("cannot summarize an empty set of trials")
    best = np.array([r.best_objective for r in records])
    return CellSummary(
        cell=records[0].cell, technique=records[0].technique, trials=len(records),
        engaged_run_count=sum(not r.ever_disengaged for r in records),
        reached_optimum_count=sum(bool(r.reached_optimum) for r in records),
        mean_best_objective=float(np.mean(best)),
        median_best_objective=float(np.median(best)),
        std_best_objective=float(np.std(best)),
        mean_disengaged_generations=float(np.mean([r.disengaged_generations for r in records])),
        mean_diversity_error=float(month_diversity),
        diversity_threshold=float(diversity_threshold),
        fitness_threshold=float(fitness_threshold),
    )


def _group(records):
    groups = {}
    for r in records:
        groups.setdefault((r.cell, r.technique), []).append(r)
    return groups


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list
    summaries: list
    month_records: list = field(default_factory=list)
    diversity_threshold: float = math.nan


def run_bias_sweep(spec: SweepSpec, jobs=1, progress=None) -> SweepResult:
    if spec.domain != "greater_than":
        raise ConfigError("bias sweeps run on the greater-than domain")
    records = execute(_sweep_tasks(spec), jobs, progress)
    summaries = [summarize(rs) for rs in _group(records).values()]
    return SweepResult(spec, records, summaries)


def month_of(records, catalog):
    """Diversity error of the month formed by the best host plan of each of 28 runs."""
    return diversity_error(PlanBatch.concat([r.best_genome for r in records]), catalog)


def run_popsize_sweep(spec: SweepSpec, diversity_threshold=math.nan, jobs=1, progress=None) -> SweepResult:
    """Population-size sweep on the well-being domain.

    Each (n, technique) cell also runs ``spec.month_days`` sub-trials for the
    month user; the diversity of their best plans is the cell's diversity error.
    """
    if spec.domain != "wellbeing":
        raise ConfigError("population-size sweeps run on the well-being domain")
    catalog = _pool(spec.wellbeing)[0]
    records = execute(_sweep_tasks(spec), jobs, progress)
    month_records = execute(_month_tasks(spec), jobs, progress) if spec.month_days else []
    months = _group(month_records)
    summaries = []
    for key, rs in _group(records).items():
        div = month_of(months[key], catalog) if key in months else math.nan
        summaries.append(summarize(rs, month_diversity=div, diversity_threshold=diversity_threshold,
                                   fitness_threshold=FITNESS_THRESHOLD))
    return SweepResult(spec, records, summaries, month_records, diversity_threshold)


@dataclass(frozen=True)
class MonthSpec:
    trials: int = MONTH_DAYS
    n: int = 250
    generations: int = 150
    S: int = 5
    base_seed: int = 0
    conditions: tuple = MONTH_CONDITIONS
    wellbeing: WellbeingSetup = field(default_factory=lambda: WellbeingSetup(p_c=0.6, p_m=0.1))

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for c in self.conditions:
            if c not in MONTH_CONDITIONS:
                raise ConfigError(f"unknown month condition {c!r}; choose from {MONTH_CONDITIONS}")


@dataclass
class MonthResult:
    spec: MonthSpec
    records: list
    table: dict  # condition -> per-condition statistics


def _month_condition_tasks(spec: MonthSpec):
    tasks = []
    for cond in spec.conditions:
        strategy = make_strategy("baseline" if cond == "single" else cond)
        for i in range(spec.trials):
            tasks.append(TrialTask("wellbeing", (spec.n,), cond, i,
                                   trial_seed(spec.base_seed, "wellbeing", (spec.n,), cond, i),
                                   spec.n, spec.generations, spec.S, strategy,
                                   wellbeing=spec.wellbeing, user_index=spec.wellbeing.month_user))
    return tasks


def run_month_comparison(spec: MonthSpec, jobs=1, progress=None) -> MonthResult:
    """Single-population evolution against coevolution with and without SF, one month each.

    Every condition runs ``spec.trials`` independent trials for the same user;
    the best host plan of each trial is one day of that condition's month.
    """
    catalog = _pool(spec.wellbeing)[0]
    records = execute(_month_condition_tasks(spec), jobs, progress)
    table = {}
    by_cond = {}
    for r in records:
        by_cond.setdefault(r.technique, []).append(r)
    for cond in spec.conditions:
        rs = by_cond[cond]
        best = np.array([r.best_objective for r in rs])
        div = month_of(rs, catalog) if len(rs) == MONTH_DAYS else math.nan
        table[cond] = {"median_best_error": float(np.median(best)), "mean_best_error": float(np.mean(best)),
                       "std_best_error": float(np.std(best)), "diversity_error": div}
    return MonthResult(spec, records, table)


def compute_diversity_threshold(setup: WellbeingSetup | None = None, runs=MONTH_DAYS, n=250,
                                generations=500, base_seed=0, jobs=1, progress=None):
    """Diversity error of one month of single-population recommendations.

    Mirrors how the acceptable diversity level was set: ``runs`` independent
    single-population runs for one user, with the best plan of each forming
    the month.
    """
    setup = setup or WellbeingSetup(p_c=0.6, p_m=0.1)
    if runs != MONTH_DAYS:
        raise ConfigError(f"a month is exactly {MONTH_DAYS} runs")
    catalog = _pool(setup)[0]
    strategy = make_strategy("baseline")
    tasks = [TrialTask("wellbeing", (n,), "single", i,
                       trial_seed(base_seed, "wellbeing", (n,), "single", i, STREAM_THRESHOLD),
                       n, generations, 5, strategy, wellbeing=setup, user_index=setup.month_user)
             for i in range(runs)]
    records = execute(tasks, jobs, progress)
    return month_of(records, catalog), records


# -- export -----------------------------------------------------------------------

def fmt(v):
    """Stable text form for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def _cell_columns(domain):
    return ["beta_h", "beta_p"] if domain == "greater_than" else ["n"]


TRIAL_COLUMNS = ["technique", "trial", "seed", "user", "ever_disengaged", "disengaged_generations",
                 "reached_optimum", "best_objective", "final_mean_objective_host",
                 "final_mean_objective_parasite"]
GRID_COLUMNS = ["technique", "engaged_runs", "reached_optimum", "mean_best_objective",
                "mean_disengaged_gens", "trials", "median_best_objective", "std_best_objective"]
WELLBEING_GRID_EXTRA = ["mean_diversity_error", "fitness_threshold", "diversity_threshold", "thresholds_met"]


def write_csv(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _trial_row(r):
    return [*r.cell, r.technique, r.trial, r.seed, r.user, r.ever_disengaged, r.disengaged_generations,
            r.reached_optimum, r.best_objective, r.final_mean_host, r.final_mean_parasite]


def export_results(result: SweepResult, out_dir):
    """Write trials.csv, grid.csv and (when logged) generations.csv; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    domain = result.spec.domain
    cells = _cell_columns(domain)
    paths = [write_csv(out / "trials.csv", cells + TRIAL_COLUMNS, (_trial_row(r) for r in result.records))]

    header = cells + GRID_COLUMNS + (WELLBEING_GRID_EXTRA if domain == "wellbeing" else [])
    rows = []
    for s in sorted(result.summaries, key=lambda s: (s.cell, TECH_CODES[s.technique])):
        row = [*s.cell, s.technique, s.engaged_run_count, s.reached_optimum_count, s.mean_best_objective,
               s.mean_disengaged_generations, s.trials, s.median_best_objective, s.std_best_objective]
        if domain == "wellbeing":
            row += [s.mean_diversity_error, s.fitness_threshold, s.diversity_threshold, s.thresholds_met]
        rows.append(row)
    paths.append(write_csv(out / "grid.csv", header, rows))

    if result.month_records:
        paths.append(write_csv(out / "month_days.csv", cells + TRIAL_COLUMNS,
                               (_trial_row(r) for r in result.month_records)))
    if result.spec.log_generations:
        paths.append(write_generations(out / "generations.csv", result.records, cells))
    return paths


def write_generations(path, records, cells):
    cols = GenerationStats.columns()
    rows = ([*r.cell, r.technique, r.trial, *(s.as_row()[c] for c in cols)]
            for r in records for s in r.generations)
    return write_csv(path, cells + ["technique", "trial"] + cols, rows)


def export_month(result: MonthResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[r.technique, r.trial, r.seed, r.user, r.best_objective, r.disengaged_generations]
            for r in result.records]
    p1 = write_csv(out / "month.csv", ["condition", "trial", "seed", "user", "best_error",
                                       "disengaged_generations"], rows)
    srows = [[c, t["median_best_error"], t["mean_best_error"], t["std_best_error"], t["diversity_error"]]
             for c, t in result.table.items()]
    p2 = write_csv(out / "month_summary.csv", ["condition", "median_best_error", "mean_best_error",
                                               "std_best_error", "diversity_error"], srows)
    return [p1, p2]


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def with_overrides(spec, **kw):
    return replace(spec, **{k: v for k, v in kw.items() if v is not None})
