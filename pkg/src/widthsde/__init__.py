"""Stochastic width dynamics of a collapsing wave packet.

Modules: profile (shape coefficients and SDE parameters), model (vector
fields and transforms), integrate (path simulation), timechange (weak
solutions by time change), ergodic (occupation statistics and the decay
audit), control (reachability), verify (claim reports) and cli.
"""

from .errors import WidthSDEError
from .model import HalfPlaneState, SdeParamsRef, TransformedState

__version__ = "0.1.0"

__all__ = ["HalfPlaneState", "SdeParamsRef", "TransformedState", "WidthSDEError", "__version__"]
