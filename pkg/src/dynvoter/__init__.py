"""Voter model and coalescing walks on rewiring random regular graphs.

Closed-form side: the diffusion constant theta(d, nu) = 1 - Delta/beta
with Delta a continued fraction, plus every quantity derived from it
(meeting probabilities, collision local times, merge rates).  Simulation
side: event-driven dynamics of the graph, one or two walks, and the
voter model, with an exact duality check via event-log replay.
"""

from .errors import (
    DegenerateHeightError,
    DynvoterError,
    NumericalFailure,
    ParameterError,
)
from .fw import FwPath, fw_heterozygosity, fw_simulate
from .graph import (
    GraphState,
    RewireEvent,
    apply_rewire,
    bfs_distance,
    rewire_total_rate,
    sample_matching,
    uniform_edge,
)
from .rng import Stream
from .simulate import (
    EventLog,
    MeetingResult,
    VoterTrace,
    backward_walk,
    duality_check,
    forward_voter_from_log,
    simulate_two_walks,
    simulate_voter,
    simulate_with_log,
)
from .stats import (
    SurvivalCurve,
    edge_tail_estimate,
    exp_rate_fit,
    homogenisation_functional,
    ks_statistic,
    survival_curve,
)
from .theta import (
    ModelConst,
    ThetaBundle,
    asymptotic_table,
    delta_cf,
    delta_seq,
    gamma_rate,
    identity_residual,
    local_time_R,
    make_bundle,
    make_consts,
    meet_prob_q,
    theta,
    toy_height,
)
from .toymodel import TwoPhaseSample, chain_run, mc_R0, mc_q, two_phase_sample

__version__ = "0.1.0"

__all__ = [
    "DegenerateHeightError",
    "DynvoterError",
    "EventLog",
    "FwPath",
    "GraphState",
    "MeetingResult",
    "ModelConst",
    "NumericalFailure",
    "ParameterError",
    "RewireEvent",
    "Stream",
    "SurvivalCurve",
    "ThetaBundle",
    "TwoPhaseSample",
    "VoterTrace",
    "apply_rewire",
    "asymptotic_table",
    "backward_walk",
    "bfs_distance",
    "chain_run",
    "delta_cf",
    "delta_seq",
    "duality_check",
    "edge_tail_estimate",
    "exp_rate_fit",
    "forward_voter_from_log",
    "fw_heterozygosity",
    "fw_simulate",
    "gamma_rate",
    "homogenisation_functional",
    "identity_residual",
    "ks_statistic",
    "local_time_R",
    "make_bundle",
    "make_consts",
    "mc_R0",
    "mc_q",
    "meet_prob_q",
    "rewire_total_rate",
    "sample_matching",
    "simulate_two_walks",
    "simulate_voter",
    "simulate_with_log",
    "survival_curve",
    "theta",
    "toy_height",
    "two_phase_sample",
    "uniform_edge",
]
