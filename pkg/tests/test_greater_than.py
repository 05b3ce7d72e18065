import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coevolab.domains.greater_than import (GreaterThanDomain, GtConfig, biased_mutate, gt_score,
                                           init_genome, scalar_value)
from coevolab.errors import ConfigError, DomainError


def bits(ones, l=10):
    g = np.zeros(l, dtype=np.uint8)
    g[:ones] = 1
    return g


def test_init_all_zero():
    g = init_genome(100)
    assert g.shape == (100,) and scalar_value(g) == 0


def test_score_cases():
    assert gt_score(bits(6), bits(3)) == 1.0
    assert gt_score(bits(4), bits(4)) == 0.5
    assert gt_score(bits(2), bits(7)) == 0.0


def test_score_only_sees_counts():
    a = np.array([1, 1, 0, 0], dtype=np.uint8)
    b = np.array([0, 0, 1, 1], dtype=np.uint8)
    assert gt_score(a, b) == 0.5


def test_length_mismatch():
    with pytest.raises(DomainError, match="length mismatch"):
        gt_score(bits(1, 5), bits(1, 6))


@given(a=st.integers(0, 20), b=st.integers(0, 20))
def test_score_antisymmetric(a, b):
    assert gt_score(bits(a, 20), bits(b, 20)) + gt_score(bits(b, 20), bits(a, 20)) == 1.0


def test_mutation_extremes(rng):
    g = np.zeros(50, dtype=np.uint8)
    assert scalar_value(biased_mutate(g, 1.0, 1.0, rng)) == 50
    assert scalar_value(biased_mutate(np.ones(50, np.uint8), 1.0, 0.0, rng)) == 0
    np.testing.assert_array_equal(biased_mutate(g, 0.0, 1.0, rng), g)


def test_drift_fixed_point(rng):
    # a freely mutating population drifts to beta * l ones
    g = np.zeros((200, 100), dtype=np.uint8)
    for _ in range(400):
        g = biased_mutate(g, 0.05, 0.3, rng)
    assert g.sum(axis=1).mean() == pytest.approx(30, abs=1.5)


def test_mutation_rate_statistics(rng):
    g = np.zeros((400, 100), dtype=np.uint8)
    out = biased_mutate(g, 0.1, 0.5, rng)
    # flips happen at m * beta
    assert out.mean() == pytest.approx(0.05, abs=0.005)


def test_config_validation():
    with pytest.raises(ConfigError):
        GtConfig(beta_host=1.5)
    with pytest.raises(ConfigError):
        GtConfig(l=0)


def test_domain_protocol(rng):
    d = GreaterThanDomain(GtConfig(l=8, beta_host=1.0, beta_parasite=0.0, m=1.0))
    pop = d.init_population("host", 5, rng)
    assert pop.shape == (5, 8) and d.objective(pop).tolist() == [0.0] * 5
    kids = d.breed(pop, np.array([0, 1, 2, 3, 4]), "host", rng)
    assert d.objective(kids).tolist() == [8.0] * 5
    assert d.is_optimal(8.0) and not d.is_optimal(7.0)
    kids = d.breed(kids, np.array([0, 0]), "parasite", rng)
    assert d.objective(kids).tolist() == [0.0, 0.0]
