"""Online relevance estimation for budget-constrained re-ranking."""

from .config import Settings
from .errors import BudgetError, OreError, ParseError, RefusalError, UnknownIdError, ValidationError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "BudgetError", "OreError", "ParseError", "RefusalError", "Settings", "UnknownIdError",
           "ValidationError", "__version__"]
