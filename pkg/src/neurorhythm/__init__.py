"""Deterministic emulation of neuromorphic rhythm generators.

AdEx neurons with first-order synapses, device mismatch and Poisson noise,
simulated on a fixed-step clock; builders for half-center CPGs, E/I neural
oscillators and three-phase networks; analysis of bursts, oscillation
frequency, phase offsets and cycle jitter.
"""

from .errors import AnalysisError, ConfigError, FormatError, NeuroRhythmError, SimulationError
from .neuron import (
    NeuronParams,
    NeuronState,
    SynapseParams,
    SynapseState,
    adex_derivatives,
    step_neuron,
    step_synapse,
)
from .network import (
    ConnectionSpec,
    NetworkInstance,
    NetworkSpec,
    PopulationSpec,
    apply_mismatch,
    build_network,
)
from .engine import BACKEND, SimulationConfig, SpikeRecord, StateTrace, run, run_trials, simulate
from .analysis import (
    Burst,
    OscillationMetrics,
    PhasePortrait,
    RateSeries,
    detect_bursts,
    oscillation_metrics,
    phase_portrait,
    population_rate,
)
from .primitives import (
    PRESETS,
    CpgMode,
    StimulationSchedule,
    ThreePhaseKind,
    ThreePhaseSpec,
    build_half_center_cpg,
    build_neural_oscillator,
    build_three_phase,
    cardiac_schedule,
    couple_oscillators,
    get_preset,
    modulate_frequency,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "ConfigError",
    "FormatError",
    "NeuroRhythmError",
    "SimulationError",
    "NeuronParams",
    "NeuronState",
    "SynapseParams",
    "SynapseState",
    "adex_derivatives",
    "step_neuron",
    "step_synapse",
    "ConnectionSpec",
    "NetworkInstance",
    "NetworkSpec",
    "PopulationSpec",
    "apply_mismatch",
    "build_network",
    "BACKEND",
    "SimulationConfig",
    "SpikeRecord",
    "StateTrace",
    "run",
    "run_trials",
    "simulate",
    "Burst",
    "OscillationMetrics",
    "PhasePortrait",
    "RateSeries",
    "detect_bursts",
    "oscillation_metrics",
    "phase_portrait",
    "population_rate",
    "PRESETS",
    "CpgMode",
    "StimulationSchedule",
    "ThreePhaseKind",
    "ThreePhaseSpec",
    "build_half_center_cpg",
    "build_neural_oscillator",
    "build_three_phase",
    "cardiac_schedule",
    "couple_oscillators",
    "get_preset",
    "modulate_frequency",
    "__version__",
]
