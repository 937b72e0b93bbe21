"""Electricity price forecasting with calendar embeddings, long-term
profiles and hourly price forward curves."""

__version__ = "0.1.0"
