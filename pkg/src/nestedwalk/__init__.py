"""Simulation and verification suite for quantum-walk search with
coin-dependent data, nested updates, and the collision-walk solver."""

__version__ = "0.1.0"

from .ledger import CostLedger
from .markov import (
    MarkovChain,
    SimulationCapError,
    classical_walk_search,
    johnson_chain,
    spectral_gap,
    stationary_distribution,
    validate_chain,
)
from .quantize import (
    build_operators,
    eigenphase_gap,
    map_pi_to_piM,
    mnrs_search,
    prepare_pi,
    reflect_about_pi,
)
from .nested import (
    ImplementationPair,
    InnerWalkFamily,
    composed_setup,
    nested_search,
    phase_flip_via_inner,
    verify_implementation,
)
from .histset import EdgeEncoding, HistoryFreeSet
from .hashing import PolyHash, sample as sample_hash, verify_kwise
from .threedist import (
    Instance,
    Parameters,
    Tripartition,
    count_inner_marked,
    garbage_state,
    oracle_solve,
    preprocess,
    setup_state,
    solve,
)
from .costs import CostParams, mnrs_cost, nested_cost, optimize

__all__ = [
    "CostLedger", "MarkovChain", "SimulationCapError", "classical_walk_search",
    "johnson_chain", "spectral_gap", "stationary_distribution", "validate_chain",
    "build_operators", "eigenphase_gap", "map_pi_to_piM", "mnrs_search",
    "prepare_pi", "reflect_about_pi", "ImplementationPair", "InnerWalkFamily",
    "composed_setup", "nested_search", "phase_flip_via_inner",
    "verify_implementation", "EdgeEncoding", "HistoryFreeSet", "PolyHash",
    "sample_hash", "verify_kwise", "Instance", "Parameters", "Tripartition",
    "count_inner_marked", "garbage_state", "oracle_solve", "preprocess",
    "setup_state", "solve", "CostParams", "mnrs_cost", "nested_cost", "optimize",
]
