"""Command-line entry point: ``coevolab {run,sweep,month,threshold,verify}``.

Settings resolve as flag > config file (``--config FILE``, JSON whose keys
mirror the long flag names with ``-`` or ``_``) > built-in default. Every
data-producing command writes ``manifest.json`` into its output directory;
``coevolab verify DIR/manifest.json`` replays it and compares the files byte
for byte.

Exit codes: 0 success, 1 runtime error or verification mismatch, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .domains.greater_than import GreaterThanDomain, GtConfig
from .domains.wellbeing import FITNESS_THRESHOLD
from .engine import EngineConfig, GenerationStats, run_trial
from .errors import CatalogError, ConfigError, DomainError
from .experiments import (COARSE_BETAS, FULL_BETAS, POP_SIZES, MonthSpec, SweepSpec, TrialTask,
                          WellbeingSetup, bias_grid, build_domain, compute_diversity_threshold,
                          export_month, export_results, run_bias_sweep, run_month_comparison,
                          run_popsize_sweep, sha256_file, wellbeing_sources, write_csv)
from .mitigation import STRATEGY_NAMES, make_strategy

MANIFEST = "manifest.json"

COMMON = {"seed": 0}
SOURCES = {"catalog": None, "users": None, "n_users": 50, "users_seed": 0, "user": 0}
MITIGATION = {"rv_virulence": 0.75, "rv_target": "parasite", "ava_alpha": 0.0125, "ava_mu": 0.3, "ava_tau": 0.56}
GT_ENGINE = {"n": 25, "S": 5, "generations": 1000, "l": 100, "m": 0.005}
WB_OPS = {"p_c": 0.8, "p_m": 0.1, "p_b": 0.9}
MONTH_OPS = {"p_c": 0.6, "p_m": 0.1, "p_b": 0.9}


def defaults(command, domain):
    """Built-in defaults for a command (and domain, where it matters)."""
    if command == "run":
        base = {**COMMON, **MITIGATION, "domain": domain, "mode": "coevolution", "mitigation": "baseline"}
        if domain == "greater_than":
            return {**base, **GT_ENGINE, "beta_host": 0.5, "beta_parasite": 0.5}
        return {**base, **SOURCES, **WB_OPS, "n": 260, "S": 5, "generations": 500}
    if command == "sweep":
        base = {**COMMON, **MITIGATION, "domain": domain, "techniques": list(STRATEGY_NAMES),
                "full_scale": False, "log_generations": False}
        if domain == "greater_than":
            return {**base, **GT_ENGINE, "grid": "coarse", "trials": None}
        return {**base, **SOURCES, **WB_OPS, "S": 5, "generations": 500, "sizes": list(POP_SIZES),
                "trials": None, "month_days": 28, "diversity_threshold": None}
    if command == "month":
        return {**COMMON, **SOURCES, **MONTH_OPS, "trials": 28, "n": 250, "generations": 150, "S": 5,
                "conditions": ["single", "baseline", "sf"]}
    if command == "threshold":
        return {**COMMON, **SOURCES, **MONTH_OPS, "n": 250, "generations": 500}
    raise ConfigError(f"unknown command {command!r}")


# -- argument parsing ---------------------------------------------------------------

def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text):
    return [int(t) for t in _csv_list(text)]


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_common(p, out=True):
    p.add_argument("--config", help="JSON file of settings (flags override it)")
    p.add_argument("--seed", type=_u64)
    if out:
        p.add_argument("--out", help="output directory (required)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--quiet", action="store_true", help="no progress on standard error")


def _add_sources(p):
    p.add_argument("--catalog", help="food/exercise catalog JSON (default: shipped demo catalog)")
    p.add_argument("--users", help="user pool JSON (default: synthetic pool)")
    p.add_argument("--n-users", type=int, help="size of the synthetic user pool")
    p.add_argument("--users-seed", type=int, help="seed of the synthetic user pool")
    p.add_argument("--user", type=int, help="index of the user the plans are for")
    p.add_argument("--p-c", type=float, help="crossover probability")
    p.add_argument("--p-m", type=float, help="mutation probability")
    p.add_argument("--p-b", type=float, help="per-bundle injection probability")


def _add_mitigation(p):
    p.add_argument("--rv-virulence", type=float, help="RV virulence in [0.5, 1.0]")
    p.add_argument("--rv-target", choices=["host", "parasite", "both"])
    p.add_argument("--ava-alpha", type=float)
    p.add_argument("--ava-mu", type=float)
    p.add_argument("--ava-tau", type=float)


def _add_engine(p):
    p.add_argument("--n", type=int, help="population size")
    p.add_argument("-S", "--S", dest="S", type=int, help="opponents sampled per individual")
    p.add_argument("--generations", type=int)
    p.add_argument("--l", type=int, help="greater-than genome length")
    p.add_argument("--m", type=float, help="greater-than per-bit mutation rate")


def build_parser():
    parser = argparse.ArgumentParser(prog="coevolab", description=__doc__.split("\n")[0],
                                     argument_default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"coevolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("run", help="one trial; per-generation CSV + summary", **kw)
    _add_common(p)
    p.add_argument("--domain", choices=["greater-than", "greater_than", "wellbeing"])
    p.add_argument("--mode", choices=["coevolution", "single"])
    p.add_argument("--mitigation", choices=list(STRATEGY_NAMES))
    p.add_argument("--beta-host", type=float)
    p.add_argument("--beta-parasite", type=float)
    _add_engine(p)
    _add_mitigation(p)
    _add_sources(p)

    p = sub.add_parser("sweep", help="bias grid (greater-than) or population sizes (wellbeing)", **kw)
    _add_common(p)
    p.add_argument("--domain", choices=["greater-than", "greater_than", "wellbeing"])
    p.add_argument("--grid", help="coarse, full, a comma list of betas, or cells like 0.25:0.75")
    p.add_argument("--sizes", type=_int_list, help="comma list of population sizes")
    p.add_argument("--techniques", type=_csv_list, help="comma list from baseline,rv,ava,sf")
    p.add_argument("--trials", type=int)
    p.add_argument("--full-scale", action="store_true", help="full grid and 100 (30) trials per cell")
    p.add_argument("--log-generations", action="store_true", help="also write generations.csv")
    p.add_argument("--month-days", type=int, help="sub-trials per wellbeing cell month (28, or 0 to skip)")
    p.add_argument("--diversity-threshold", help="value, or a threshold manifest.json to read it from")
    _add_engine(p)
    _add_mitigation(p)
    _add_sources(p)

    p = sub.add_parser("month", help="single-population vs coevolution vs coevolution+SF", **kw)
    _add_common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--conditions", type=_csv_list)
    _add_sources(p)

    p = sub.add_parser("threshold", help="recompute the month diversity threshold", **kw)
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--generations", type=int)
    _add_sources(p)

    p = sub.add_parser("verify", help="replay a manifest and compare outputs", **kw)
    p.add_argument("manifest")
    p.add_argument("--jobs", type=int)
    p.add_argument("--quiet", action="store_true")
    return parser


RUNTIME_KEYS = ("config", "out", "jobs", "quiet", "command")


def _norm_domain(v):
    return None if v is None else str(v).replace("-", "_")


def resolve(command, flags: dict):
    """Merge defaults, the config file and flags into one settings dict."""
    file_cfg = {}
    if flags.get("config"):
        path = Path(flags["config"])
        try:
            file_cfg = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{path}: expected a JSON object of settings")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
    domain = _norm_domain(flags.get("domain", file_cfg.get("domain", "greater_than")))
    if command in ("month", "threshold"):
        domain = "wellbeing"
    if domain not in ("greater_than", "wellbeing"):
        raise ConfigError(f"unknown domain {domain!r}")
    base = defaults(command, domain)
    unknown = sorted(set(file_cfg) - set(base))
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command} ({domain}): {', '.join(unknown)}")
    cfg = {**base, **file_cfg, **{k: v for k, v in flags.items() if k not in RUNTIME_KEYS}}
    cfg["domain"] = domain
    if command == "run" and domain == "greater_than":
        for k in SOURCES.keys() | WB_OPS.keys():
            if k in flags:
                raise ConfigError(f"--{k.replace('_', '-')} applies to the wellbeing domain only")
    if command == "run" and domain == "wellbeing":
        for k in ("beta_host", "beta_parasite", "l", "m"):
            if k in flags:
                raise ConfigError(f"--{k.replace('_', '-')} applies to the greater-than domain only")
    return cfg


# -- command bodies ---------------------------------------------------------------

def _setup(cfg, ops=None):
    ops = ops or cfg
    return WellbeingSetup(catalog_path=cfg["catalog"], users_path=cfg["users"], n_users=int(cfg["n_users"]),
                          users_seed=int(cfg["users_seed"]), month_user=int(cfg["user"]),
                          p_c=float(ops["p_c"]), p_m=float(ops["p_m"]), p_b=float(ops["p_b"]))


def _strategy(cfg, name):
    return make_strategy(name, rv_virulence=float(cfg["rv_virulence"]), rv_target=cfg["rv_target"],
                         ava_alpha=float(cfg["ava_alpha"]), ava_mu=float(cfg["ava_mu"]),
                         ava_tau=float(cfg["ava_tau"]))


def _jsonable(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def cmd_run(cfg, out, jobs, log, emit):
    mode = "single_population" if cfg["mode"] == "single" else "coevolution"
    strategy = _strategy(cfg, cfg["mitigation"])
    extra = {}
    if cfg["domain"] == "greater_than":
        gt = GtConfig(l=int(cfg["l"]), m=float(cfg["m"]), beta_host=float(cfg["beta_host"]),
                      beta_parasite=float(cfg["beta_parasite"]))
        domain, user = GreaterThanDomain(gt), None
    else:
        setup = _setup(cfg)
        task = TrialTask("wellbeing", (int(cfg["n"]),), "single", 0, 0, int(cfg["n"]), 1, 5,
                         make_strategy("baseline"), wellbeing=setup, user_index=setup.month_user)
        domain, user = build_domain(task)
        extra = wellbeing_sources(setup)
    config = EngineConfig(n=int(cfg["n"]), S=int(cfg["S"]), generations=int(cfg["generations"]),
                          mode=mode, mitigation=strategy, seed=int(cfg["seed"]))
    log(f"run: {cfg['domain']} {mode} {cfg['mitigation']} seed={cfg['seed']}")
    result = run_trial(config, domain)
    cols = GenerationStats.columns()
    paths = [write_csv(out / "trial_result.csv", cols, ([s.as_row()[c] for c in cols] for s in result.per_generation))]
    summary = {k: _jsonable(v) for k, v in asdict(result.summary).items()}
    best = result.final_best_genome["host"]
    if cfg["domain"] == "greater_than":
        summary["best_host_ones"] = int(best.sum())
    else:
        summary["user"] = user
        fit = domain.components(best)[0]
        summary["best_host_components"] = dict(zip(["hf", "ea", "cd", "psi_pref", "phi"], map(float, fit)))
        summary["best_host_plan"] = _plan_dict(best.plan(0, domain.catalog))
        summary["fitness_threshold"] = FITNESS_THRESHOLD
    text = json.dumps(summary, indent=1, sort_keys=True)
    (out / "summary.json").write_text(text + "\n", encoding="utf-8")
    paths.append(out / "summary.json")
    emit(text)
    return paths, extra


def _plan_dict(plan):
    return [{"main": list(b.main), "sides": [list(s) for s in b.sides], "exercise": list(b.exercise)}
            for b in plan.bundles]


def _bias_cells(grid):
    """``coarse``, ``full``, a beta list (all pairs), or explicit ``beta_h:beta_p`` cells."""
    if grid == "coarse":
        return bias_grid(COARSE_BETAS)
    if grid == "full":
        return bias_grid(FULL_BETAS)
    items = _csv_list(str(grid))
    try:
        if any(":" in item for item in items):
            return tuple(tuple(float(b) for b in item.split(":", 1)) for item in items)
        return bias_grid(float(b) for b in items)
    except ValueError:
        raise ConfigError(f"--grid: cannot parse {grid!r}") from None


def _sweep_spec(cfg):
    domain = cfg["domain"]
    full = bool(cfg["full_scale"])
    techniques = tuple(cfg["techniques"])
    trials = cfg["trials"] or ((100 if full else 20) if domain == "greater_than" else (30 if full else 10))
    common = dict(domain=domain, techniques=techniques, trials=int(trials), base_seed=int(cfg["seed"]),
                  generations=int(cfg["generations"]), S=int(cfg["S"]), rv_virulence=float(cfg["rv_virulence"]),
                  ava_alpha=float(cfg["ava_alpha"]), ava_mu=float(cfg["ava_mu"]), ava_tau=float(cfg["ava_tau"]),
                  log_generations=bool(cfg["log_generations"]))
    if cfg["rv_target"] != "parasite":
        raise ConfigError("sweeps apply RV to the parasite population; --rv-target is for single runs")
    if domain == "greater_than":
        grid = cfg["grid"]
        if grid == "coarse" and full:
            grid = "full"
        return SweepSpec(grid=_bias_cells(grid), n=int(cfg["n"]), l=int(cfg["l"]), m=float(cfg["m"]), **common)
    return SweepSpec(grid=tuple(int(n) for n in cfg["sizes"]), wellbeing=_setup(cfg),
                     month_days=int(cfg["month_days"]), **common)


def _threshold_value(cfg, log, jobs):
    raw = cfg["diversity_threshold"]
    if raw is None:
        log("sweep: computing the diversity threshold (28 single-population runs)")
        setup = _setup(cfg, MONTH_OPS)
        value, _ = compute_diversity_threshold(setup, base_seed=int(cfg["seed"]), jobs=jobs)
        return value
    try:
        return float(raw)
    except ValueError:
        pass
    path = Path(raw)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return float(data["diversity_threshold"])
    except (OSError, ValueError, KeyError, TypeError):
        raise ConfigError(f"--diversity-threshold: not a number or a threshold manifest: {raw}") from None


def cmd_sweep(cfg, out, jobs, log, emit):
    spec = _sweep_spec(cfg)
    progress = _progress(log, "sweep")
    extra = {}
    if spec.domain == "greater_than":
        log(f"sweep: {len(spec.grid)} cells x {len(spec.techniques)} techniques x {spec.trials} trials")
        result = run_bias_sweep(spec, jobs, progress)
    else:
        threshold = _threshold_value(cfg, log, jobs)
        extra = {**wellbeing_sources(spec.wellbeing), "diversity_threshold": threshold}
        log(f"sweep: {len(spec.grid)} sizes x {len(spec.techniques)} techniques x {spec.trials} trials")
        result = run_popsize_sweep(spec, threshold, jobs, progress)
    return export_results(result, out), extra


def cmd_month(cfg, out, jobs, log, emit):
    spec = MonthSpec(trials=int(cfg["trials"]), n=int(cfg["n"]), generations=int(cfg["generations"]),
                     S=int(cfg["S"]), base_seed=int(cfg["seed"]), conditions=tuple(cfg["conditions"]),
                     wellbeing=_setup(cfg))
    log(f"month: {len(spec.conditions)} conditions x {spec.trials} trials")
    result = run_month_comparison(spec, jobs, _progress(log, "month"))
    paths = export_month(result, out)
    text = json.dumps({c: {k: _jsonable(v) for k, v in t.items()} for c, t in result.table.items()},
                      indent=1, sort_keys=True)
    emit(text)
    return paths, wellbeing_sources(spec.wellbeing)


def cmd_threshold(cfg, out, jobs, log, emit):
    setup = _setup(cfg)
    log("threshold: 28 single-population runs")
    value, records = compute_diversity_threshold(setup, n=int(cfg["n"]), generations=int(cfg["generations"]),
                                                 base_seed=int(cfg["seed"]), jobs=jobs,
                                                 progress=_progress(log, "threshold"))
    rows = [[r.trial, r.seed, r.user, r.best_objective] for r in records]
    paths = [write_csv(out / "threshold_runs.csv", ["trial", "seed", "user", "best_error"], rows)]
    emit(json.dumps({"diversity_threshold": value}))
    return paths, {**wellbeing_sources(setup), "diversity_threshold": value}


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "month": cmd_month, "threshold": cmd_threshold}


def _progress(log, label):
    def report(done, total):
        if done == total or done % max(1, total // 10) == 0:
            log(f"{label}: {done}/{total} trials")
    return report


def execute(command, cfg, out, jobs=1, log=lambda msg: None, emit=print):
    """Run one data-producing command into ``out`` and write its manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths, extra = COMMANDS[command](cfg, out, jobs, log, emit)
    manifest = {
        "tool": "coevolab",
        "version": __version__,
        "command": command,
        "config": cfg,
        **{k: _jsonable(v) for k, v in extra.items()},
        "outputs": {Path(p).name: sha256_file(p) for p in paths},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def verify(manifest_path, jobs=1, log=lambda msg: None):
    """Replay a manifest; returns ``(ok, first divergent file or None)``."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        command, cfg, outputs = manifest["command"], manifest["config"], manifest["outputs"]
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {path}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: not a valid manifest ({exc})") from None
    if command not in COMMANDS:
        raise ConfigError(f"{path}: unknown command {command!r}")
    with tempfile.TemporaryDirectory() as tmp:
        log(f"verify: replaying {command}")
        execute(command, cfg, tmp, jobs, log, emit=lambda text: None)
        for name in outputs:
            recorded = path.parent / name
            fresh = Path(tmp) / name
            if not recorded.exists() or not fresh.exists():
                return False, name
            if recorded.read_bytes() != fresh.read_bytes():
                return False, name
    return True, None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(args)
    command = flags.pop("command")
    quiet = flags.get("quiet", False)

    def log(msg):
        if not quiet:
            print(msg, file=sys.stderr, flush=True)

    try:
        jobs = int(flags.get("jobs", 1))
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if command == "verify":
            ok, bad = verify(flags["manifest"], jobs, log)
            if ok:
                log("verify: all outputs identical")
                return 0
            print(f"verify: mismatch in {bad}", file=sys.stderr)
            return 1
        cfg = resolve(command, flags)
        if "out" not in flags:
            raise ConfigError(f"{command}: --out DIR is required")
        log(f"kernels: {kernels.backend()}")
        execute(command, cfg, flags["out"], jobs, log)
        return 0
    except (ConfigError, CatalogError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
