"""Simulation and exact verification toolkit for the 2D drainage network."""

from .environment import (Environment, SiteCoord, SiteState, empirical_bernoulli_check,
                          replicate_seed, site_state)
from .network import (CoalescenceTime, CrossingError, DifferenceProcess, LatticePath,
                      SearchOverflow, coalescence_time, difference_process, eta_count, hop,
                      search_cap, trace)

__version__ = "0.1.0"

__all__ = [
    "Environment", "SiteCoord", "SiteState", "site_state", "empirical_bernoulli_check",
    "replicate_seed", "LatticePath", "DifferenceProcess", "CoalescenceTime", "SearchOverflow",
    "CrossingError", "hop", "trace", "difference_process", "coalescence_time", "eta_count",
    "search_cap", "__version__",
]
