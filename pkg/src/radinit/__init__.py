"""radinit: generate random geometric radio networks, simulate randomized
initialization protocols on a collision-prone slotted channel, and check the
outcomes against closed-form limits."""

__version__ = "0.1.0"

from . import experiments, geomnet, limits, protocols, radiosim  # noqa: F401
