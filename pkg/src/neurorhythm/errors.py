"""Exception hierarchy shared by all modules.

The CLI prints ``type(err).__name__`` as the machine-parseable error class,
so the names here are part of the command-line contract.
"""


class NeuroRhythmError(Exception):
    """Base class for all package errors."""


class ConfigError(NeuroRhythmError, ValueError):
    """Invalid parameters, network specs or experiment configs."""


class SimulationError(NeuroRhythmError, RuntimeError):
    """Numeric divergence during a run.

    Carries the simulated time and the neuron that went non-finite.
    """

    def __init__(self, message, t_ms=None, population=None, neuron=None, trial=None):
        super().__init__(message)
        self.t_ms = t_ms
        self.population = population
        self.neuron = neuron
        self.trial = trial


class AnalysisError(NeuroRhythmError, ValueError):
    """Analysis could not produce a result (e.g. insufficient cycles)."""


class FormatError(NeuroRhythmError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
