"""Regime-aware in-context volatility forecasting with classical baselines."""

__version__ = "0.1.0"
