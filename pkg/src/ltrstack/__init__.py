"""Learning-to-rank from univariate scorers up to fully context-aware rerankers, on a simulated marketplace."""

__version__ = "0.1.0"
