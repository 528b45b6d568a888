"""Steady-state criteria and Pareto search for probabilistic-forwarding
wireless relay networks under an interference-aware channel model."""

__version__ = "0.1.0"

from .errors import (
    DivergentSystemError,
    FlowConservationError,
    HalfDuplexError,
    InconsistentForwardingError,
    InfeasibleError,
    InfeasibleRateError,
    InfeasibleTauError,
    ModelViolationError,
    ParetoRelayError,
    SchemaError,
)
from .topology import (
    NetworkSpec,
    NodeSpec,
    RadioSpec,
    Role,
    SlotFrame,
    load_network,
    serialize_network,
)
from .rates import (
    RateGrid,
    RateMatrix,
    active_set,
    check_flow_conservation,
    check_half_duplex,
    count_rate_matrices,
    default_source_rates,
    enumerate_rate_matrices,
)
from .channel import (
    ChannelConfig,
    ChannelMatrix,
    InterferingSet,
    ber_bpsk_awgn,
    channel_matrix,
    channel_probability_exact,
    channel_probability_sampled,
    interference_candidates,
    interference_power,
    interfering_set_probability,
    packet_success,
    per,
    sinr,
)
from .forwarding import (
    ForwardingMatrix,
    consistency_residuals,
    sample_feasible_forwarding,
    solve_chain_closed_form,
)
from .steady_state import (
    CriteriaVector,
    TransitionSystem,
    build_transition_system,
    evaluate,
    fundamental_matrix,
    spectral_radius,
)
from .pareto import (
    ObjectiveSense,
    ParetoArchive,
    ParetoSolution,
    PruneThresholds,
    SearchResult,
    Sense,
    dominates,
    exhaustive_search,
    prune_tau,
)
from .mc_oracle import SimConfig, SimEstimate, simulate

__all__ = [
    "__version__",
    "ParetoRelayError",
    "SchemaError",
    "InfeasibleError",
    "FlowConservationError",
    "HalfDuplexError",
    "InconsistentForwardingError",
    "InfeasibleRateError",
    "InfeasibleTauError",
    "ModelViolationError",
    "DivergentSystemError",
    "Role",
    "NodeSpec",
    "RadioSpec",
    "SlotFrame",
    "NetworkSpec",
    "load_network",
    "serialize_network",
    "RateGrid",
    "RateMatrix",
    "active_set",
    "check_flow_conservation",
    "check_half_duplex",
    "default_source_rates",
    "enumerate_rate_matrices",
    "count_rate_matrices",
    "ChannelConfig",
    "ChannelMatrix",
    "InterferingSet",
    "ber_bpsk_awgn",
    "per",
    "packet_success",
    "interference_candidates",
    "interference_power",
    "interfering_set_probability",
    "channel_probability_exact",
    "channel_probability_sampled",
    "channel_matrix",
    "sinr",
    "ForwardingMatrix",
    "consistency_residuals",
    "solve_chain_closed_form",
    "sample_feasible_forwarding",
    "CriteriaVector",
    "TransitionSystem",
    "build_transition_system",
    "spectral_radius",
    "fundamental_matrix",
    "evaluate",
    "ObjectiveSense",
    "ParetoArchive",
    "ParetoSolution",
    "PruneThresholds",
    "SearchResult",
    "Sense",
    "dominates",
    "prune_tau",
    "exhaustive_search",
    "SimConfig",
    "SimEstimate",
    "simulate",
]
