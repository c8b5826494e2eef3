"""Model-free inverse reinforcement learning by MAP estimation."""

__version__ = "0.1.0"
