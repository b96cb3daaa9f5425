"""Numerical toolkit for stable transfer: Fourier transforms on component
families, pullbacks along L-morphisms, elliptic splittings, SL2(R) and torus
transfer."""

__version__ = "0.1.0"
