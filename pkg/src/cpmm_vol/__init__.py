"""Expected liquidity-fee payoff of constant-product AMM positions under GBM prices."""

__version__ = "0.1.0"


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge within its budget."""
