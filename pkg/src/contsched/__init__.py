"""Container placement by genetic search, with baselines and a trace-replay simulator."""

__version__ = "0.1.0"
