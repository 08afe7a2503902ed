"""Joint increment / log reaction-time mixed model: simulation, likelihood and estimation."""

__version__ = "0.1.0"
