"""dtrlab - two-stage dynamic treatment regime learning by surrogate value maximization."""

__version__ = "0.1.0"
