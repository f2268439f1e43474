"""Exception types shared across the package.

Argument validation failures raise plain ValueError. The types below mark
conditions that indicate an internal bug or a broken run rather than bad
caller input.
"""


class CapExceededError(RuntimeError):
    """An iteration loop ran past its proven termination cap.

    The separation and pull loops both carry finite-iteration guarantees;
    hitting the hard cap means the implementation (or the metric fed to it)
    violated a precondition, so we fail loudly instead of truncating.
    """


class ContractViolationError(RuntimeError):
    """An internal invariant failed (e.g. a loss queried outside its domain)."""


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""
