# Error hierarchy shared by the library and the command-line front end.
# Each class carries the process exit code the CLI uses when it reaches the top level.

class ConfigurationError(ValueError):
    """Raised when config.yaml, CLI flags or column/level declarations are inconsistent."""
    exit_code = 2

class IngestError(ValueError):
    """Raised when an input file is empty, unreadable or holds non-numeric responses."""
    exit_code = 3

class InvalidInputError(ValueError):
    """Raised when an argument violates the invariants of its type."""
    exit_code = 3

class InvalidDesignError(InvalidInputError):
    """Raised when a one-way design cannot support the requested computation."""

class DegenerateVarianceError(InvalidInputError):
    """Raised when a variance estimate needed as a denominator is zero."""

class NumericError(ArithmeticError):
    """Raised when a decomposition or root search fails."""
    exit_code = 4
