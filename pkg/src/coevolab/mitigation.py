"""Disengagement mitigation: baseline, reduced virulence, AVA and SF.

Each technique is a psi (and, for SF, genome) transform applied between
competitive evaluation and selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

TARGETS = ("host", "parasite", "both")


@dataclass(frozen=True)
class Baseline:
    name = "baseline"


@dataclass(frozen=True)
class ReducedVirulence:
    upsilon: float = 0.75
    target: str = "parasite"
    name = "rv"

    def __post_init__(self):
        check_virulence(self.upsilon)
        if self.target not in TARGETS:
            raise ConfigError(f"RV target must be one of {TARGETS}, got {self.target!r}")


@dataclass(frozen=True)
class AutonomousVirulence:
    alpha: float = 0.0125
    mu: float = 0.3
    tau: float = 0.56
    upsilon0: float = 0.75
    name = "ava"

    def __post_init__(self):
        for label, v in (("alpha", self.alpha), ("mu", self.mu), ("tau", self.tau)):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"AVA {label} must lie in [0, 1], got {v}")
        check_virulence(self.upsilon0)


@dataclass(frozen=True)
class SubstitutionOfFittest:
    name = "sf"


STRATEGY_NAMES = ("baseline", "rv", "ava", "sf")


def make_strategy(name, *, rv_virulence=0.75, rv_target="parasite",
                  ava_alpha=0.0125, ava_mu=0.3, ava_tau=0.56, ava_upsilon0=0.75):
    if name == "baseline":
        return Baseline()
    if name == "rv":
        return ReducedVirulence(rv_virulence, rv_target)
    if name == "ava":
        return AutonomousVirulence(ava_alpha, ava_mu, ava_tau, ava_upsilon0)
    if name == "sf":
        return SubstitutionOfFittest()
    raise ConfigError(f"unknown mitigation {name!r}; choose from {', '.join(STRATEGY_NAMES)}")


def check_virulence(upsilon):
    if not 0.5 <= upsilon <= 1.0:
        raise ConfigError(f"virulence must lie in the valid range [0.5, 1.0], got {upsilon}")


# -- reduced virulence -------------------------------------------------------

def rv_transform(x, upsilon):
    """Virulence-adjusted fitness ``2x/v - x^2/v^2``, clipped to [0, 1].

    Peaks at ``x == upsilon``; with ``upsilon == 1`` it is monotone in ``x``.
    Works on scalars and arrays.
    """
    check_virulence(upsilon)
    x = np.asarray(x, dtype=np.float64)
    out = np.clip(2.0 * x / upsilon - (x * x) / (upsilon * upsilon), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# -- autonomous virulence adaptation -----------------------------------------

@dataclass
class AvaState:
    alpha: float
    mu: float
    tau: float
    upsilon_t: float = 0.75
    delta_t_prev: float = 0.0


def ava_update(state: AvaState, x_bar: float, t: int) -> AvaState:
    """One virulence update from the population's mean subjective score.

    For the first four generations the step is ``(0.5 - x_bar) / t`` so the
    virulence can jump quickly; afterwards a momentum update towards ``tau``.
    """
    if t < 1:
        raise ValueError("generation index t must be >= 1")
    if t < 5:
        step = (0.5 - x_bar) / t
    else:
        step = state.mu * state.delta_t_prev + state.alpha * (1.0 - state.mu) * (state.tau - x_bar)
    upsilon = min(1.0, max(0.5, state.upsilon_t + step))
    return replace(state, upsilon_t=upsilon, delta_t_prev=step)


# -- substitution of the fittest ---------------------------------------------

@dataclass
class SfState:
    delta_prev: float = 0.0
    kappa_last: int = 0


def compute_delta(sigma_a, sigma_b):
    return abs(sigma_a - sigma_b)


def sf_kappa(n: int, delta: float) -> int:
    """Number of individuals to substitute: ``ceil(n * delta ** (1 / delta))``, 0 at delta 0."""
    if n < 1:
        raise ValueError("population size must be >= 1")
    if delta <= 0.0:
        return 0
    # the power underflows to 0.0 for tiny delta; the exact ceiling is still >= 1
    return min(n, max(1, math.ceil(n * delta ** (1.0 / delta))))


def rank_order(psi):
    """Indices from worst to best psi and from best to worst; ties go to the lower index first."""
    psi = np.asarray(psi)
    idx = np.arange(len(psi))
    worst_first = np.lexsort((idx, psi))
    best_first = np.lexsort((idx, -psi))
    return worst_first, best_first


def sf_substitute(psi, kappa, *, losing):
    """Index map for SF substitution; the new population is ``old[src]``.

    Ranks come from the pre-substitution psi. In the losing population the
    i-th worst slot is overwritten with the current content of the i-th best
    slot, for i = 1..kappa in order; the winning population mirrors this
    (i-th best overwritten by the i-th worst). Replacement is in place, so
    once kappa exceeds n/2 later copies read slots already overwritten and
    the population fills with the upper (losing side) or lower (winning
    side) half.
    """
    n = len(psi)
    src = np.arange(n)
    if kappa <= 0:
        return src
    worst, best = rank_order(psi)
    dst, origin = (worst, best) if losing else (best, worst)
    for i in range(min(kappa, n)):
        src[dst[i]] = src[origin[i]]
    return src


def sf_apply(pop_low, pop_high, delta, kappa, take):
    """Apply SF to the losing (``pop_low``) and winning (``pop_high``) populations.

    ``take(genomes, idx)`` copies genomes by index. Returns new populations.
    Copies inherit the source psi, then every psi is shifted by ``delta``
    (up for the losing side, down for the winning side) and clipped.
    """
    src_low = sf_substitute(pop_low.psi, kappa, losing=True)
    src_high = sf_substitute(pop_high.psi, kappa, losing=False)
    low = replace(pop_low, genomes=take(pop_low.genomes, src_low),
                  psi=np.minimum(pop_low.psi[src_low] + delta, 1.0),
                  objective=None if pop_low.objective is None else pop_low.objective[src_low])
    high = replace(pop_high, genomes=take(pop_high.genomes, src_high),
                   psi=np.maximum(pop_high.psi[src_high] - delta, 0.0),
                   objective=None if pop_high.objective is None else pop_high.objective[src_high])
    return low, high


# -- dispatch ----------------------------------------------------------------

@dataclass
class MitigationState:
    """Per-trial mutable state for the active technique."""
    ava: dict = field(default_factory=dict)
    sf: SfState = field(default_factory=SfState)

    @classmethod
    def for_strategy(cls, strategy):
        state = cls()
        if isinstance(strategy, AutonomousVirulence):
            for role in ("host", "parasite"):
                state.ava[role] = AvaState(strategy.alpha, strategy.mu, strategy.tau,
                                           upsilon_t=strategy.upsilon0)
        return state


@dataclass
class MitigationOutcome:
    host: object
    parasite: object
    kappa: int = 0
    virulence_host: float = 1.0
    virulence_parasite: float = 1.0


def apply_mitigation(strategy, host, parasite, state: MitigationState, t: int, take):
    """Transform freshly evaluated populations according to ``strategy``.

    ``t`` is the 1-based generation index. Returns a :class:`MitigationOutcome`.
    """
    if isinstance(strategy, Baseline):
        return MitigationOutcome(host, parasite)

    if isinstance(strategy, ReducedVirulence):
        v = strategy.upsilon
        out = MitigationOutcome(host, parasite)
        if strategy.target in ("host", "both"):
            out.host = replace(host, psi=rv_transform(host.psi, v))
            out.virulence_host = v
        if strategy.target in ("parasite", "both"):
            out.parasite = replace(parasite, psi=rv_transform(parasite.psi, v))
            out.virulence_parasite = v
        return out

    if isinstance(strategy, AutonomousVirulence):
        state.ava["host"] = ava_update(state.ava["host"], host.sigma, t)
        state.ava["parasite"] = ava_update(state.ava["parasite"], parasite.sigma, t)
        vh = state.ava["host"].upsilon_t
        vp = state.ava["parasite"].upsilon_t
        return MitigationOutcome(replace(host, psi=rv_transform(host.psi, vh)),
                                 replace(parasite, psi=rv_transform(parasite.psi, vp)),
                                 virulence_host=vh, virulence_parasite=vp)

    if isinstance(strategy, SubstitutionOfFittest):
        delta = compute_delta(host.sigma, parasite.sigma)
        fire = delta > state.sf.delta_prev
        state.sf.delta_prev = delta
        if not fire:
            state.sf.kappa_last = 0
            return MitigationOutcome(host, parasite)
        kappa = sf_kappa(len(host.psi), delta)
        state.sf.kappa_last = kappa
        if host.sigma <= parasite.sigma:
            h, p = sf_apply(host, parasite, delta, kappa, take)
        else:
            p, h = sf_apply(parasite, host, delta, kappa, take)
        return MitigationOutcome(h, p, kappa=kappa)

    raise ConfigError(f"unsupported mitigation strategy {strategy!r}")
