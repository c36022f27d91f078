"""Simulation and optimization lab for cloning-purification diversity
over multi-mode qubit channels with depolarization and crosstalk."""

__version__ = "0.1.0"

from .channel import ChannelChoi, ChannelParams, apply_channel, channel_choi  # noqa: F401
from .cloner import (  # noqa: F401
    AsymmetryVector,
    clone_amplitudes,
    clone_fidelities,
    cloner_choi,
    feasible_boundary,
)
from .decoder import (  # noqa: F401
    build_qr,
    compose_effective_map,
    optimize_gamma,
    purification_sdp,
    rayleigh_bound,
)
from .metrics import asymmetry_index, empirical_density, purification_gain  # noqa: F401
from .strategies import STRATEGIES, FidelityRecord, run_strategy  # noqa: F401
