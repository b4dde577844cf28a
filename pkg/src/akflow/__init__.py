"""Rigorous-precision construction of a half-line vector field whose time-1/2
flow map loses second-derivative regularity while staying smooth on a Cantor
set of times, together with the verification suite for its quantitative bounds."""

from .scalar import Scalar, DEFAULT_PRECISION

__version__ = "0.1.0"

__all__ = ["Scalar", "DEFAULT_PRECISION", "__version__"]
