import numpy as np
import pytest

from coevolab.domains.greater_than import GreaterThanDomain, GtConfig
from coevolab.engine import (EngineConfig, GenerationStats, PopulationState, evaluate_subjective,
                             init_coevolution, run_single_population, run_trial, step_generation,
                             tournament_winners)
from coevolab.errors import ConfigError
from coevolab.mitigation import ReducedVirulence, SubstitutionOfFittest


def gt(bh=0.5, bp=0.5):
    return GreaterThanDomain(GtConfig(beta_host=bh, beta_parasite=bp))


@pytest.mark.parametrize("kw", [dict(n=1), dict(S=0), dict(S=30), dict(T=3), dict(generations=0),
                                dict(mode="islands"), dict(seed=-1),
                                dict(mode="single_population", mitigation="sf")])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        EngineConfig(**kw)


def test_config_accepts_strategy_names():
    assert isinstance(EngineConfig(mitigation="sf").mitigation, SubstitutionOfFittest)


def test_evaluate_subjective_dominance(rng):
    a = PopulationState("host", None, np.zeros(4), np.array([5.0, 6, 7, 8]))
    b = PopulationState("parasite", None, np.zeros(4), np.array([1.0, 2, 3, 4]))
    a2, b2 = evaluate_subjective(a, b, 3, rng, maximize=True)
    assert a2.psi.tolist() == [1.0] * 4 and b2.psi.tolist() == [0.0] * 4
    a2, b2 = evaluate_subjective(a, b, 3, rng, maximize=False)
    assert a2.sigma == 0.0 and b2.sigma == 1.0


def test_tournament_distinct_pairs_and_ties(rng):
    fit = np.array([0.0, 1.0])
    winners = tournament_winners(fit, 1000, rng)
    assert set(winners.tolist()) == {1}
    winners = tournament_winners(np.zeros(2), 4000, rng)
    assert abs(winners.mean() - 0.5) < 0.05  # fair coin on ties
    assert set(tournament_winners(fit, 100, rng, maximize=False).tolist()) == {0}


def test_tournament_selection_pressure(rng):
    fit = np.arange(10.0)
    winners = tournament_winners(fit, 20000, rng)
    # P(rank r wins) = 2r / (n (n-1)) for distinct pairs
    freq = np.bincount(winners, minlength=10) / 20000
    np.testing.assert_allclose(freq, 2 * np.arange(10) / 90, atol=0.01)


def test_step_records_raw_statistics(rng):
    cfg = EngineConfig(n=6, generations=1, mitigation=ReducedVirulence(0.5))
    state = init_coevolution(cfg, gt(), rng)
    new, stats, (h, p) = step_generation(state, cfg, gt(), rng)
    assert stats.gen == 1 and new.gen == 1
    # all-zero genomes: every encounter is a draw
    assert stats.sigma_host == stats.sigma_parasite == 0.5 and stats.delta == 0.0
    assert not stats.disengaged
    assert stats.virulence_parasite == 0.5
    assert stats.psi_mean_parasite == 1.0  # rv(0.5, 0.5) after mitigation
    assert h.objective.tolist() == [0.0] * 6


def test_trial_is_deterministic():
    cfg = EngineConfig(generations=60, mitigation="sf", seed=99)
    a, b = run_trial(cfg, gt(0.2, 0.8)), run_trial(cfg, gt(0.2, 0.8))
    assert [s.as_row() for s in a.per_generation] == [s.as_row() for s in b.per_generation]
    np.testing.assert_array_equal(a.final_best_genome["host"], b.final_best_genome["host"])


def test_trial_summary_consistent():
    res = run_trial(EngineConfig(generations=200, seed=3), gt(0.25, 0.75))
    flags = [s.disengaged for s in res.per_generation]
    assert res.summary.disengaged_generation_count == sum(flags)
    assert res.summary.ever_disengaged == any(flags)
    assert res.summary.best_objective_overall == max(s.best_objective_host for s in res.per_generation)
    assert res.final_best_genome["host"].sum() == res.summary.best_objective_overall
    assert set(res.final_population) == {"host", "parasite"}
    assert len(res.per_generation) == 200
    assert list(res.per_generation[0].as_row()) == GenerationStats.columns()


def test_on_generation_callback():
    seen = []
    run_trial(EngineConfig(generations=5), gt(), on_generation=seen.append)
    assert [s.gen for s in seen] == [1, 2, 3, 4, 5]
    seen = []
    run_trial(EngineConfig(generations=4, mode="single_population"), gt(), on_generation=seen.append)
    assert len(seen) == 4


def test_single_population_climbs():
    res = run_single_population(EngineConfig(generations=400, seed=1), gt(0.5, 0.5))
    assert res.summary.best_objective_overall > 60
    assert not res.summary.ever_disengaged
    assert np.isnan(res.per_generation[0].sigma_host)


def test_single_population_rejects_mitigation():
    cfg = EngineConfig(generations=2)
    cfg.mitigation = SubstitutionOfFittest()
    with pytest.raises(ConfigError):
        run_single_population(cfg, gt())
