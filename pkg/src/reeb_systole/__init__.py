"""Numerical systolic geometry on the 2-sphere."""
from ._backend import BACKEND

__version__ = "0.1.0"
