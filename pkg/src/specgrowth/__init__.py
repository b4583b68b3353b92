"""Spectral simulator and verification suite for time-periodic
perturbations of linear Schrodinger equations whose Sobolev norms grow
polynomially in time.

The perturbation is built by conjugating a fixed banded coupling with
the free flow, V(t) = exp(-it K0) A exp(it K0), which makes the exact
solution available in closed form and lets every numerical scheme be
checked against it.
"""

from .core import (
    BandedHermitian,
    EigenLadder,
    PropagationStrategy,
    QuantumState,
    SpectralModel,
    apply_hamiltonian,
    check_state,
    conjugated_potential,
    sobolev_norm,
)
from .errors import (
    BreakdownError,
    ConfigError,
    DegenerateStateError,
    DimensionMismatchError,
    ExpansionMismatchError,
    InvalidParameterError,
    LeakageError,
    SpecGrowthError,
    StrategyError,
    SupportWindowError,
)
from .models import (
    build_halfwave,
    build_harmonic,
    build_zoll_surrogate,
    cosine_potential,
    interleaved_modes,
)
from .propagate import (
    PropagationPlan,
    PropagationScheme,
    Trajectory,
    coupling_flow,
    default_sample_times,
    oracle_propagate,
    propagate,
    required_modes,
    step_magnus_midpoint,
    step_strang,
    tail_mass_fraction,
)
from .commutators import (
    CommutatorChain,
    NilpotencyReport,
    expand_ad_power,
    growth_lower_constant,
    iterated_commutator,
    lie_norm_expansion,
    verify_nilpotency,
)
from .diagnostics import (
    FitReport,
    GrowthRecord,
    SymbolMatrixReport,
    chodosh_order_check,
    egorov_rotated_symbol,
    fit_growth_exponent,
    truncation_leakage,
)
from .runner import ExperimentConfig, run_experiment, validate_config

__version__ = "0.1.0"

__all__ = [
    "BandedHermitian",
    "BreakdownError",
    "CommutatorChain",
    "ConfigError",
    "DegenerateStateError",
    "DimensionMismatchError",
    "EigenLadder",
    "ExpansionMismatchError",
    "ExperimentConfig",
    "FitReport",
    "GrowthRecord",
    "InvalidParameterError",
    "LeakageError",
    "NilpotencyReport",
    "PropagationPlan",
    "PropagationScheme",
    "PropagationStrategy",
    "QuantumState",
    "SpecGrowthError",
    "SpectralModel",
    "StrategyError",
    "SupportWindowError",
    "SymbolMatrixReport",
    "Trajectory",
    "apply_hamiltonian",
    "build_halfwave",
    "build_harmonic",
    "build_zoll_surrogate",
    "check_state",
    "chodosh_order_check",
    "conjugated_potential",
    "cosine_potential",
    "coupling_flow",
    "default_sample_times",
    "egorov_rotated_symbol",
    "expand_ad_power",
    "fit_growth_exponent",
    "growth_lower_constant",
    "interleaved_modes",
    "iterated_commutator",
    "lie_norm_expansion",
    "oracle_propagate",
    "propagate",
    "required_modes",
    "run_experiment",
    "sobolev_norm",
    "step_magnus_midpoint",
    "step_strang",
    "tail_mass_fraction",
    "truncation_leakage",
    "validate_config",
    "verify_nilpotency",
]
