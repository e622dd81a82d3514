"""photonwire: statistics and detection toolkit for PMT optical receivers.

Submodules
----------
gain       cascade gain model, normalized-sample law, samplers
sim        photon arrivals, waveform synthesis, dead-time counting
inforate   on-off-keying mutual information and duty-cycle optimization
regimes    operating-regime thresholds (pulse counting vs mean power)
detect     detector error rates (counting / mean power, linear & saturated)
calibrate  response-curve fitting from mean/variance measurements
cli        command-line entry points
"""

from . import gain, sim, inforate, regimes, detect, calibrate  # noqa: F401
from .errors import ConfigError, InvariantViolation, NumericError, PhotonwireError  # noqa: F401

__version__ = "0.1.0"
