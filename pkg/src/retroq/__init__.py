"""retroq: forward states, backward effects, and the conditional statistics between them."""

__version__ = "0.1.0"
