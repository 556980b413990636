"""Exception hierarchy shared across the package."""


class SinklimitError(Exception):
    """Base class for all package errors."""


class GameFormatError(SinklimitError, ValueError):
    """Malformed game input (bad JSON, inconsistent tensor sizes, bad ranges)."""


class SolverConvergenceError(SinklimitError, RuntimeError):
    """A numerical solve failed to converge or violated a residual bound."""


class ContractViolation(SinklimitError, RuntimeError):
    """An internal precondition was broken by the caller or an invariant
    guaranteed by the algorithm failed to hold (surfaced loudly, never
    papered over)."""
