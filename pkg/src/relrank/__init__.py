"""Relational stock ranking: sequential and relational embeddings trained
with a combined pointwise/pairwise objective, plus a daily trading backtest."""

__version__ = "0.1.0"
