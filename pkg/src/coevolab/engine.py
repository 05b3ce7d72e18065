"""Generational loop for two-population coevolution and single-population evolution.

A domain object supplies genomes and operators. It must provide:

``maximize``
    whether larger objective values are better
``init_population(role, n, rng)``
    genomes for role ``"host"``, ``"parasite"`` or ``"single"``
``objective(genomes)``
    float array, one value per genome
``breed(genomes, parents, role, rng)``
    offspring genomes built from ``genomes[parents]``
``take(genomes, idx)``
    copy genomes by index
``is_optimal(value)``
    whether an objective value counts as reaching the optimum
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import numpy as np

from . import kernels
from .errors import ConfigError
from .mitigation import (Baseline, MitigationState, apply_mitigation, compute_delta,
                         make_strategy)

MODES = ("coevolution", "single_population")


@dataclass
class Individual:
    genome: Any
    psi: float


@dataclass
class PopulationState:
    role: str
    genomes: Any
    psi: np.ndarray
    objective: np.ndarray | None = None

    @property
    def sigma(self) -> float:
        return float(np.mean(self.psi))

    @property
    def n(self) -> int:
        return len(self.psi)

    def members(self, take) -> list[Individual]:
        return [Individual(take(self.genomes, np.array([i])), float(p)) for i, p in enumerate(self.psi)]


@dataclass
class EngineConfig:
    n: int = 25
    S: int = 5
    T: int = 2
    generations: int = 1000
    mode: str = "coevolution"
    mitigation: Any = field(default_factory=Baseline)
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.mitigation, str):
            self.mitigation = make_strategy(self.mitigation)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 2:
            raise ConfigError("population size n must be >= 2")
        if self.S < 1:
            raise ConfigError("opponent sample size S must be >= 1")
        if self.S > self.n:
            raise ConfigError(f"opponent sample size S={self.S} exceeds population size n={self.n}")
        if self.T != 2:
            raise ConfigError("only tournament size T=2 is supported")
        if self.generations < 1:
            raise ConfigError("generations must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.mode == "single_population" and not isinstance(self.mitigation, Baseline):
            raise ConfigError("single-population mode takes no mitigation; use baseline")


@dataclass
class GenerationStats:
    gen: int
    sigma_host: float
    sigma_parasite: float
    delta: float
    disengaged: bool
    kappa_applied: int
    virulence_host: float
    virulence_parasite: float
    best_objective_host: float
    best_objective_parasite: float
    mean_objective_host: float
    mean_objective_parasite: float
    psi_mean_host: float
    psi_mean_parasite: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def as_row(self):
        return asdict(self)


@dataclass
class TrialSummary:
    ever_disengaged: bool
    disengaged_generation_count: int
    reached_optimum: bool
    best_objective_overall: float


@dataclass
class TrialResult:
    per_generation: list[GenerationStats]
    final_best_genome: dict
    summary: TrialSummary
    final_population: dict  # role -> PopulationState of the last evaluated generation


# -- building blocks ---------------------------------------------------------

def evaluate_subjective(pop_a: PopulationState, pop_b: PopulationState, S: int, rng, maximize: bool):
    """Refresh psi of both populations from S sampled opponents each.

    Opponents are drawn uniformly with replacement, independently per individual.
    Objectives must already be set on both populations.
    """
    if S < 1:
        raise ConfigError("opponent sample size S must be >= 1")
    opp_a = rng.integers(0, pop_b.n, size=(pop_a.n, S))
    opp_b = rng.integers(0, pop_a.n, size=(pop_b.n, S))
    psi_a = kernels.competition_psi(pop_a.objective, pop_b.objective, opp_a, maximize)
    psi_b = kernels.competition_psi(pop_b.objective, pop_a.objective, opp_b, maximize)
    return replace(pop_a, psi=psi_a), replace(pop_b, psi=psi_b)


def tournament_winners(fitness, k, rng, maximize=True):
    """Run ``k`` size-two tournaments over distinct pairs; ties broken by a fair coin."""
    fitness = np.asarray(fitness)
    n = len(fitness)
    if n < 2:
        raise ConfigError("tournament selection needs at least two members")
    a = rng.integers(0, n, size=k)
    b = rng.integers(0, n - 1, size=k)
    b = b + (b >= a)
    coin = rng.random(k) < 0.5
    fa, fb = fitness[a], fitness[b]
    a_wins = fa > fb if maximize else fa < fb
    tie = fa == fb
    return np.where(a_wins | (tie & coin), a, b)


def tournament_select(pop: PopulationState, rng, maximize=True) -> int:
    return int(tournament_winners(pop.psi, 1, rng, maximize)[0])


def _best(values, maximize):
    return float(np.max(values) if maximize else np.min(values))


def _better(a, b, maximize):
    return a > b if maximize else a < b


# -- coevolution ---------------------------------------------------------------

@dataclass
class CoevolutionState:
    host: PopulationState
    parasite: PopulationState
    mitigation: MitigationState
    gen: int = 0


def init_coevolution(config: EngineConfig, domain, rng) -> CoevolutionState:
    n = config.n
    host = PopulationState("host", domain.init_population("host", n, rng), np.zeros(n))
    parasite = PopulationState("parasite", domain.init_population("parasite", n, rng), np.zeros(n))
    return CoevolutionState(host, parasite, MitigationState.for_strategy(config.mitigation))


def step_generation(state: CoevolutionState, config: EngineConfig, domain, rng):
    """Evaluate, mitigate, select and replace; returns ``(new_state, stats, evaluated)``.

    ``evaluated`` is the ``(host, parasite)`` pair as scored by competition,
    before mitigation rewrote psi or genomes.
    """
    t = state.gen + 1
    maximize = domain.maximize
    host = replace(state.host, objective=domain.objective(state.host.genomes))
    parasite = replace(state.parasite, objective=domain.objective(state.parasite.genomes))
    host, parasite = evaluate_subjective(host, parasite, config.S, rng, maximize)

    sigma_h, sigma_p = host.sigma, parasite.sigma
    delta = compute_delta(sigma_h, sigma_p)
    best_h, best_p = _best(host.objective, maximize), _best(parasite.objective, maximize)
    mean_h, mean_p = float(np.mean(host.objective)), float(np.mean(parasite.objective))
    evaluated = (host, parasite)

    out = apply_mitigation(config.mitigation, host, parasite, state.mitigation, t, domain.take)
    host, parasite = out.host, out.parasite

    stats = GenerationStats(
        gen=t, sigma_host=sigma_h, sigma_parasite=sigma_p, delta=delta,
        disengaged=delta == 1.0, kappa_applied=out.kappa,
        virulence_host=out.virulence_host, virulence_parasite=out.virulence_parasite,
        best_objective_host=best_h, best_objective_parasite=best_p,
        mean_objective_host=mean_h, mean_objective_parasite=mean_p,
        psi_mean_host=host.sigma, psi_mean_parasite=parasite.sigma,
    )

    n = config.n
    parents_h = tournament_winners(host.psi, n, rng)
    children_h = domain.breed(host.genomes, parents_h, "host", rng)
    parents_p = tournament_winners(parasite.psi, n, rng)
    children_p = domain.breed(parasite.genomes, parents_p, "parasite", rng)

    new_state = CoevolutionState(
        PopulationState("host", children_h, np.zeros(n)),
        PopulationState("parasite", children_p, np.zeros(n)),
        state.mitigation, t,
    )
    return new_state, stats, evaluated


def run_trial(config: EngineConfig, domain, rng=None, on_generation=None) -> TrialResult:
    """Run a full coevolution trial of ``config.generations`` generations."""
    if config.mode != "coevolution":
        return run_single_population(config, domain, rng, on_generation)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    maximize = domain.maximize
    state = init_coevolution(config, domain, rng)
    history = []
    best = {"host": None, "parasite": None}
    best_genome = {}
    reached = False
    evaluated = None
    for _ in range(config.generations):
        state, stats, evaluated = step_generation(state, config, domain, rng)
        history.append(stats)
        if on_generation is not None:
            on_generation(stats)
        for pop in evaluated:
            value = _best(pop.objective, maximize)
            if best[pop.role] is None or _better(value, best[pop.role], maximize):
                best[pop.role] = value
                idx = int(np.flatnonzero(pop.objective == value)[0])
                best_genome[pop.role] = domain.take(pop.genomes, np.array([idx]))
        if domain.is_optimal(stats.best_objective_host):
            reached = True

    flags = [s.disengaged for s in history]
    summary = TrialSummary(
        ever_disengaged=any(flags),
        disengaged_generation_count=int(sum(flags)),
        reached_optimum=reached,
        best_objective_overall=best["host"],
    )
    return TrialResult(history, best_genome, summary,
                       {"host": evaluated[0], "parasite": evaluated[1]})


# -- single population ---------------------------------------------------------

def run_single_population(config: EngineConfig, domain, rng=None, on_generation=None) -> TrialResult:
    """Plain GA: fitness is the domain objective itself, no competition or mitigation."""
    if not isinstance(config.mitigation, Baseline):
        raise ConfigError("single-population mode takes no mitigation; use baseline")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    maximize = domain.maximize
    n = config.n
    genomes = domain.init_population("single", n, rng)
    history = []
    best = None
    best_genome = None
    reached = False
    pop = None
    nan = float("nan")
    for t in range(1, config.generations + 1):
        obj = domain.objective(genomes)
        pop = PopulationState("single", genomes, np.zeros(n), obj)
        gen_best = _best(obj, maximize)
        stats = GenerationStats(
            gen=t, sigma_host=nan, sigma_parasite=nan, delta=0.0, disengaged=False,
            kappa_applied=0, virulence_host=1.0, virulence_parasite=1.0,
            best_objective_host=gen_best, best_objective_parasite=nan,
            mean_objective_host=float(np.mean(obj)), mean_objective_parasite=nan,
            psi_mean_host=nan, psi_mean_parasite=nan,
        )
        history.append(stats)
        if on_generation is not None:
            on_generation(stats)
        if best is None or _better(gen_best, best, maximize):
            best = gen_best
            idx = int(np.flatnonzero(obj == gen_best)[0])
            best_genome = domain.take(genomes, np.array([idx]))
        if domain.is_optimal(gen_best):
            reached = True
        parents = tournament_winners(obj, n, rng, maximize)
        genomes = domain.breed(genomes, parents, "single", rng)

    summary = TrialSummary(False, 0, reached, best)
    return TrialResult(history, {"host": best_genome}, summary, {"host": pop})
