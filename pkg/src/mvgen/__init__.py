"""Music video generation from a shot-segmented, color-profiled scene corpus."""

__version__ = "0.1.0"
