"""Conditional environment laws given a path, the monotonicity couplings, and their verification."""

from .couplings import Coupling
from .law import ConditioningPath, conditional_law
from .order import IncrementOrderWitness, check_increment_order
from .probability import GridSpec, exact_conditional_probability
from .verify import verify_all, verify_couplings, verify_independence, verify_monotonicity

__all__ = [
    "ConditioningPath", "conditional_law", "IncrementOrderWitness", "check_increment_order",
    "GridSpec", "exact_conditional_probability", "Coupling", "verify_monotonicity",
    "verify_couplings", "verify_independence", "verify_all",
]
