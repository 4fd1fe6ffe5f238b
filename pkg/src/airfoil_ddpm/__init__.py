"""Conditional denoising diffusion over an 11-parameter CST airfoil space."""

__version__ = "0.1.0"
