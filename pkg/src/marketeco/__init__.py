"""Macroecological analysis of asset panels.

Ecology-style descriptors of a market treated as a community: each asset is
a species, its capitalization an abundance.  The package covers abundance
distributions, the species-population relation, turnover statistics,
community-similarity decay, dependency structure, and a neutral stochastic
community model to test those patterns against.
"""

__version__ = "0.1.0"

from . import codependence, community, distributions, neutralsim, panel, sad, spr, statcore, turnover  # noqa: F401
from .errors import MarketEcoError  # noqa: F401
