"""Random interlacements on Z^d: simulation, potential theory and renormalization checks."""

__version__ = "0.1.0"
