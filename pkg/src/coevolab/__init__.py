"""Two-population competitive coevolution lab with disengagement mitigation.

Domains: the bit-string greater-than game and a meal + exercise plan
recommender. Mitigations: reduced virulence, autonomous virulence adaptation
and substitution of the fittest.
"""

__version__ = "0.1.0"
