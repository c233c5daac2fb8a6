"""Anisotropic variable-exponent elliptic problems with L1 data on unbounded domains.

The package solves regularised problems on truncated balls by finite
differences and checks a-priori estimates, measure decay and the entropy
inequality on the discrete solutions.
"""

from anisolab.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
