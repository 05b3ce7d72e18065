"""Bit-string "greater than" game with per-population mutation bias."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ConfigError, DomainError


@dataclass(frozen=True)
class GtConfig:
    l: int = 100
    m: float = 0.005
    beta_host: float = 0.5
    beta_parasite: float = 0.5

    def __post_init__(self):
        if self.l < 1:
            raise ConfigError("genome length l must be >= 1")
        for label, v in (("m", self.m), ("beta_host", self.beta_host), ("beta_parasite", self.beta_parasite)):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{label} must lie in [0, 1], got {v}")


def init_genome(l: int) -> np.ndarray:
    if l < 1:
        raise ConfigError("genome length l must be >= 1")
    return np.zeros(l, dtype=np.uint8)


def scalar_value(g) -> int:
    return int(np.count_nonzero(np.asarray(g)))


def gt_score(a, b) -> float:
    """1 if ``a`` holds more ones than ``b``, 0.5 on equal counts, else 0."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DomainError(f"genome length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    sa, sb = scalar_value(a), scalar_value(b)
    if sa > sb:
        return 1.0
    if sa == sb:
        return 0.5
    return 0.0


def biased_mutate(g, m: float, beta: float, rng) -> np.ndarray:
    """Mutate one genome or a ``(n, l)`` batch.

    Each bit is reassigned with probability ``m``; a reassigned bit becomes 1
    with probability ``beta`` (it may keep its old value).
    """
    g = np.asarray(g, dtype=np.uint8)
    batch = np.atleast_2d(g)
    mask_u = rng.random(batch.shape)
    value_u = rng.random(batch.shape)
    out = kernels.biased_mutate(batch, mask_u, value_u, m, beta)
    return out if g.ndim == 2 else out[0]


class GreaterThanDomain:
    """Asexual bit-string populations scored by pairwise comparison of one-counts."""

    maximize = True

    def __init__(self, config: GtConfig | None = None):
        self.config = config or GtConfig()

    def beta(self, role):
        return self.config.beta_parasite if role == "parasite" else self.config.beta_host

    def init_population(self, role, n, rng):
        return np.zeros((n, self.config.l), dtype=np.uint8)

    def objective(self, genomes):
        return genomes.sum(axis=1, dtype=np.int64).astype(np.float64)

    def take(self, genomes, idx):
        return genomes[idx]

    def breed(self, genomes, parents, role, rng):
        return biased_mutate(genomes[parents], self.config.m, self.beta(role), rng)

    def is_optimal(self, value):
        return value >= self.config.l
