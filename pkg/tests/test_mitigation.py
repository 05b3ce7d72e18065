from decimal import MAX_EMAX, MIN_EMIN, Context, Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coevolab.engine import PopulationState
from coevolab.errors import ConfigError
from coevolab.mitigation import (AutonomousVirulence, AvaState, Baseline, MitigationState,
                                 ReducedVirulence, SubstitutionOfFittest, apply_mitigation, ava_update,
                                 compute_delta, make_strategy, rv_transform, sf_apply, sf_kappa,
                                 sf_substitute)


def take(genomes, idx):
    return genomes[idx]


def pop(role, psi):
    psi = np.asarray(psi, dtype=float)
    return PopulationState(role, np.arange(len(psi)) * 10, psi, psi * 100)


# -- reduced virulence

@pytest.mark.parametrize("x, v, want", [(1.0, 1.0, 1.0), (0.5, 0.5, 1.0), (1.0, 0.5, 0.0), (0.0, 0.7, 0.0)])
def test_rv_transform_examples(x, v, want):
    assert rv_transform(x, v) == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("v", [0.49, 1.01, 1.3, -1])
def test_rv_rejects_out_of_range_virulence(v):
    with pytest.raises(ConfigError, match=r"\[0.5, 1.0\]"):
        rv_transform(0.3, v)
    with pytest.raises(ConfigError):
        ReducedVirulence(upsilon=v)


def test_rv_identity_claim_is_only_the_formula():
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(rv_transform(x, 1.0), 2 * x - x * x, atol=1e-15)


@given(v=st.floats(0.5, 1.0), a=st.floats(0, 1), b=st.floats(0, 1))
def test_rv_increasing_below_virulence(v, a, b):
    lo, hi = sorted((a * v, b * v))
    if hi - lo > 1e-9:
        assert rv_transform(lo, v) < rv_transform(hi, v)
    assert rv_transform(v, v) == pytest.approx(1.0)


@given(v=st.floats(0.5, 1.0), x=st.floats(0, 1))
def test_rv_bounded(v, x):
    assert 0.0 <= rv_transform(x, v) <= 1.0


# -- autonomous virulence adaptation

def test_ava_first_generation_jumps_down():
    s = ava_update(AvaState(0.0125, 0.3, 0.56, upsilon_t=0.75), 1.0, 1)
    assert s.delta_t_prev == pytest.approx(-0.5)
    assert s.upsilon_t == 0.5


def test_ava_on_target_no_change():
    s = ava_update(AvaState(0.0125, 0.3, 0.56, upsilon_t=0.8, delta_t_prev=0.0), 0.56, 7)
    assert s.delta_t_prev == pytest.approx(0.0, abs=1e-12)
    assert s.upsilon_t == pytest.approx(0.8)


def test_ava_momentum_step():
    s = ava_update(AvaState(0.0125, 0.3, 0.56, upsilon_t=0.7, delta_t_prev=0.1), 0.56, 5)
    assert s.delta_t_prev == pytest.approx(0.03, abs=1e-9)
    assert s.upsilon_t == pytest.approx(0.73, abs=1e-9)


def test_ava_neutral_start_with_balanced_sigmas():
    strat = AutonomousVirulence()
    state = MitigationState.for_strategy(strat)
    out = apply_mitigation(strat, pop("host", [0.5] * 4), pop("parasite", [0.5] * 4), state, 1, take)
    assert out.virulence_host == out.virulence_parasite == 0.75


@given(xs=st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_ava_virulence_stays_in_range(xs):
    s = AvaState(0.0125, 0.3, 0.56)
    for t, x in enumerate(xs, start=1):
        s = ava_update(s, x, t)
        assert 0.5 <= s.upsilon_t <= 1.0


# -- substitution of the fittest

@pytest.mark.parametrize("n, delta, want", [(25, 1.0, 25), (25, 0.5, 7), (25, 0.1, 1), (25, 0.0, 0)])
def test_sf_kappa_examples(n, delta, want):
    assert sf_kappa(n, delta) == want


def exact_kappa(n, delta):
    ctx = Context(prec=60, Emin=MIN_EMIN, Emax=MAX_EMAX)
    d = Decimal(delta)
    value = ctx.multiply(Decimal(n), ctx.power(d, ctx.divide(Decimal(1), d)))
    return int(value.to_integral_value(rounding="ROUND_CEILING"))


@given(n=st.integers(1, 500), delta=st.floats(1e-6, 1.0))
def test_sf_kappa_matches_exact_ceiling(n, delta):
    assert sf_kappa(n, delta) == exact_kappa(n, delta)


@given(n=st.integers(1, 100), a=st.floats(0, 1), b=st.floats(0, 1))
def test_sf_kappa_monotone(n, a, b):
    lo, hi = sorted((a, b))
    assert sf_kappa(n, lo) <= sf_kappa(n, hi)
    if hi > 0:
        assert sf_kappa(n, hi) >= 1


def test_sf_apply_losing_side_example():
    low = pop("host", [0.0, 0.1, 0.2, 0.8, 0.9])
    high = pop("parasite", [0.2, 0.8, 0.9, 1.0, 1.0])
    new_low, new_high = sf_apply(low, high, 0.5, 2, take)
    assert sorted(low.psi[sf_substitute(low.psi, 2, losing=True)]) == sorted([0.9, 0.8, 0.2, 0.8, 0.9])
    np.testing.assert_allclose(sorted(new_low.psi), sorted([1.0, 1.0, 0.7, 1.0, 1.0]))
    np.testing.assert_allclose(sorted(new_high.psi), sorted([0.0, 0.3, 0.4, 0.0, 0.3]))
    # genomes and objectives travel with their psi
    np.testing.assert_array_equal(new_low.genomes, np.array([40, 30, 20, 30, 40]))
    np.testing.assert_allclose(new_low.objective, np.array([90, 80, 20, 80, 90]))


def test_sf_apply_winning_side_example():
    high = pop("parasite", [0.2, 0.8, 0.9, 1.0, 1.0])
    src = sf_substitute(high.psi, 2, losing=False)
    assert sorted(high.psi[src]) == sorted([0.2, 0.8, 0.9, 0.2, 0.8])


def test_sf_identity_at_zero():
    low, high = pop("host", [0.3, 0.5]), pop("parasite", [0.3, 0.5])
    a, b = sf_apply(low, high, 0.0, 0, take)
    np.testing.assert_array_equal(a.psi, low.psi)
    np.testing.assert_array_equal(b.genomes, high.genomes)


def test_sf_full_substitution_fills_from_one_half():
    psi = np.array([0.1, 0.4, 0.3, 0.2])
    src = sf_substitute(psi, 4, losing=True)
    # best two members (indices 1, 2) are duplicated over everything
    assert sorted(src.tolist()) == [1, 1, 2, 2]
    src = sf_substitute(psi, 4, losing=False)
    assert sorted(src.tolist()) == [0, 0, 3, 3]


def test_sf_trigger_needs_increase():
    strat = SubstitutionOfFittest()
    state = MitigationState.for_strategy(strat)
    h, p = pop("host", [0.4, 0.4]), pop("parasite", [0.6, 0.6])
    first = apply_mitigation(strat, h, p, state, 1, take)
    assert first.kappa == sf_kappa(2, 0.2)
    second = apply_mitigation(strat, h, p, state, 2, take)
    assert second.kappa == 0
    assert second.host is h and second.parasite is p
    assert state.sf.delta_prev == pytest.approx(0.2)


def test_sf_picks_lower_sigma_as_losing():
    strat = SubstitutionOfFittest()
    h, p = pop("host", [0.9, 1.0, 0.8]), pop("parasite", [0.0, 0.1, 0.2])
    out = apply_mitigation(strat, h, p, MitigationState.for_strategy(strat), 1, take)
    assert out.parasite.sigma > p.sigma  # parasite lifted
    assert out.host.sigma < h.sigma


@settings(max_examples=200)
@given(psi=st.lists(st.floats(0, 1), min_size=2, max_size=30), delta=st.floats(0, 1), losing=st.booleans())
def test_sf_shift_keeps_rank_order(psi, delta, losing):
    psi = np.array(psi)
    kappa = sf_kappa(len(psi), delta)
    after = psi[sf_substitute(psi, kappa, losing=losing)]
    shifted = np.minimum(after + delta, 1.0) if losing else np.maximum(after - delta, 0.0)
    order = np.argsort(after, kind="stable")
    assert np.all(np.diff(shifted[order]) >= 0)
    top = set(np.flatnonzero(after == after.max()))
    assert top <= set(np.flatnonzero(shifted == shifted.max()))


def test_baseline_and_rv_dispatch():
    h, p = pop("host", [0.2, 0.6]), pop("parasite", [1.0, 0.5])
    out = apply_mitigation(Baseline(), h, p, MitigationState(), 1, take)
    assert out.host is h and out.parasite is p
    out = apply_mitigation(ReducedVirulence(0.5), h, p, MitigationState(), 1, take)
    np.testing.assert_allclose(out.parasite.psi, [0.0, 1.0])
    np.testing.assert_array_equal(out.host.psi, h.psi)
    out = apply_mitigation(ReducedVirulence(0.5, "both"), h, p, MitigationState(), 1, take)
    np.testing.assert_allclose(out.host.psi, rv_transform(h.psi, 0.5))


def test_make_strategy_names():
    assert make_strategy("rv", rv_virulence=0.9).upsilon == 0.9
    assert make_strategy("sf").name == "sf"
    with pytest.raises(ConfigError, match="unknown mitigation"):
        make_strategy("phantom")


def test_compute_delta_symmetric():
    assert compute_delta(0.2, 0.7) == compute_delta(0.7, 0.2) == pytest.approx(0.5)
