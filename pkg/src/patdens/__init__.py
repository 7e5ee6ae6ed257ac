"""Pattern-encounter densities in random words: matching, exact oracles, Monte Carlo."""

from .matcher import count_encounters, density, find_witness, is_instance
from .words import Pattern, Word, parse_pattern, zimin

__version__ = "0.1.0"

__all__ = [
    "Pattern",
    "Word",
    "count_encounters",
    "density",
    "find_witness",
    "is_instance",
    "parse_pattern",
    "zimin",
    "__version__",
]
