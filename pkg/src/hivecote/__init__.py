"""HIVE-COTE 1.0 time series classification."""

__version__ = "0.1.0"
