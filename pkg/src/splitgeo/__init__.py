"""splitgeo: numerics for spacelike submanifolds of orthogonally split spacetimes."""

from .kernel import BACKEND as kernel_backend

__version__ = "0.1.0"
