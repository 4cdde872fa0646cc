"""Transport of stratified densities by IPM and Stokes flow in a periodic channel."""

__version__ = "0.1.0"
