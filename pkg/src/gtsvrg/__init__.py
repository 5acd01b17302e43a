"""GT-SVRG: decentralized gradient tracking with SVRG variance reduction.

Simulator, convergence-theory calculator and verification oracles.
"""

from .errors import (ConfigError, DivergedError, GTSVRGError, InternalError, NumericError,
                     PreconditionError, TopologyError, UsageError)

__version__ = "0.1.0"

__all__ = [
    "GTSVRGError",
    "ConfigError",
    "UsageError",
    "TopologyError",
    "NumericError",
    "DivergedError",
    "PreconditionError",
    "InternalError",
    "__version__",
]
