"""Motion-corrupted nanoCT simulation and motion-aware reconstruction."""

__version__ = "0.1.0"
