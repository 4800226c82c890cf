"""Simulation and analytics for heralded parity-projection distillation.

Two remote matter qubits build shared entanglement from lone detector
clicks surviving heavy photon loss; repeated measurement iterates distill
the noisy heralded pairs into a clean parity projection on long-lived
client qubits.  The package evolves the protocol exactly as density
matrices, samples it by Monte Carlo and evaluates the closed-form rate,
drift and chain-growth expressions next to those simulations.
"""

from .analytics import (
    ChainGrowthResult,
    DriftParams,
    Objective,
    RateComparison,
    RateResult,
    RegionLabel,
    RegionPoint,
    SequenceCountVector,
    chain_growth_rate,
    crossover_transmission,
    dark_count_fidelity_region,
    drift_infidelity_exact,
    drift_infidelity_physical,
    drift_infidelity_quadratic,
    golden_section_max,
    loop_interval_probabilities,
    loop_success_probability_closed_form,
    optimize_theta,
    rate_bell,
    rate_comparison,
    sequence_counts,
    two_photon_reference_rate,
)
from .errors import (
    ConfigFormatError,
    DegenerateParameterError,
    NonConvergenceError,
    SimulationError,
    UnknownLabelError,
    VanishingTraceError,
)
from .photonics import (
    ApparatusParams,
    ExcitationAngle,
    HeraldedPair,
    eta_weight,
    heralded_state,
    heralded_state_with_dark_counts,
    p_click,
)
from .protocol import (
    BROKER_LABELS,
    CLIENT_LABELS,
    DistillationRun,
    ExactTree,
    IterateBranch,
    IterateOutcome,
    Leaf,
    OUTCOMES,
    SampleStats,
    Status,
    StrategyConfig,
    StrategyMode,
    classify,
    iterate_channel,
    run_iterate_exact,
    run_strategy_exact,
    run_trajectories,
)
from .qstate import (
    DensityMatrix,
    SingleQubitOperator,
    XMeasurement,
    apply_cz,
    apply_one_qubit,
    asymmetry_distortion,
    basis_state,
    bell_even,
    bell_odd,
    fidelity,
    identity_op,
    measure_x,
    pauli,
    plus_state,
    project_x_unnormalized,
    ry_minus_half_pi,
    tensor,
)

__version__ = "0.1.0"

__all__ = [
    "ApparatusParams",
    "BROKER_LABELS",
    "CLIENT_LABELS",
    "ChainGrowthResult",
    "ConfigFormatError",
    "DegenerateParameterError",
    "DensityMatrix",
    "DistillationRun",
    "DriftParams",
    "ExactTree",
    "ExcitationAngle",
    "HeraldedPair",
    "IterateBranch",
    "IterateOutcome",
    "Leaf",
    "NonConvergenceError",
    "OUTCOMES",
    "Objective",
    "RateComparison",
    "RateResult",
    "RegionLabel",
    "RegionPoint",
    "SampleStats",
    "SequenceCountVector",
    "SimulationError",
    "SingleQubitOperator",
    "Status",
    "StrategyConfig",
    "StrategyMode",
    "UnknownLabelError",
    "VanishingTraceError",
    "XMeasurement",
    "apply_cz",
    "apply_one_qubit",
    "asymmetry_distortion",
    "basis_state",
    "bell_even",
    "bell_odd",
    "chain_growth_rate",
    "classify",
    "crossover_transmission",
    "dark_count_fidelity_region",
    "drift_infidelity_exact",
    "drift_infidelity_physical",
    "drift_infidelity_quadratic",
    "eta_weight",
    "fidelity",
    "golden_section_max",
    "heralded_state",
    "heralded_state_with_dark_counts",
    "identity_op",
    "iterate_channel",
    "loop_interval_probabilities",
    "loop_success_probability_closed_form",
    "measure_x",
    "optimize_theta",
    "p_click",
    "pauli",
    "plus_state",
    "project_x_unnormalized",
    "rate_bell",
    "rate_comparison",
    "run_iterate_exact",
    "run_strategy_exact",
    "run_trajectories",
    "ry_minus_half_pi",
    "sequence_counts",
    "tensor",
    "two_photon_reference_rate",
]
