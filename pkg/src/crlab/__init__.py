"""Numerics for horizontal submanifolds of the CR sphere S^{2n+1}."""
from .catalog import make_chart
from .immersion import Chart, fundamental_data
from .integration import build_grid, volume, weighted_volume

__all__ = ["Chart", "build_grid", "fundamental_data", "make_chart", "volume", "weighted_volume"]
__version__ = "0.1.0"
