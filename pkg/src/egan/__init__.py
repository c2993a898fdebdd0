"""Evolutionary GAN training on 2D Gaussian mixtures."""
from egan.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
