"""Adaptive exponential integrate-and-fire neurons and first-order synapses.

Membrane potential V and adaptation current w evolve as::

    C dV/dt  = -gL (V - EL) + gL DeltaT exp((V - VT) / DeltaT) - w + I
    tau_w dw/dt = a (V - EL) - w

with reset ``V -> Vreset, w -> w + b`` when V reaches ``Vpeak``, followed by
a refractory hold of ``t_ref`` during which V stays at ``Vreset`` and only w
evolves. Synaptic currents decay exponentially with time constant ``tau_s``
and jump by ``weight`` per presynaptic spike.

Units: mV, ms, pA, nS, pF (so nS*mV = pA and pA/pF = mV/ms).

The neuron ODE is stepped with Heun's method (Euler predictor, trapezoid
corrector) at a fixed dt; synaptic decay uses the closed form.

These scalar functions are the reference semantics; the vectorised kernels in
``neurorhythm._kernel`` / ``neurorhythm._kernel_py`` evaluate the very same
floating-point expressions in the same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from numbers import Real

from .errors import ConfigError, SimulationError

# Upper bound on (V - VT) / DeltaT before exponentiation.
EXP_ARG_MAX = 20.0


@dataclass(frozen=True)
class NeuronParams:
    """AdEx constants. Defaults are a conventional regular-spiking point."""

    C: float = 200.0  # pF
    gL: float = 10.0  # nS
    EL: float = -70.0  # mV
    VT: float = -50.0  # mV
    DeltaT: float = 2.0  # mV
    Vpeak: float = 0.0  # mV
    Vreset: float = -58.0  # mV
    t_ref: float = 2.0  # ms
    a: float = 0.0  # nS
    b: float = 0.0  # pA
    tau_w: float = 100.0  # ms

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
                raise ConfigError(f"NeuronParams.{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.C <= 0 or self.gL <= 0 or self.DeltaT <= 0 or self.tau_w <= 0:
            raise ConfigError("NeuronParams requires C, gL, DeltaT and tau_w > 0")
        if self.t_ref < 0:
            raise ConfigError("NeuronParams.t_ref must be >= 0")
        if not self.Vreset < self.Vpeak:
            raise ConfigError("NeuronParams requires Vreset < Vpeak")
        if not self.VT < self.Vpeak:
            raise ConfigError("NeuronParams requires VT < Vpeak")
        if self.a < 0 or self.b < 0:
            raise ConfigError("NeuronParams requires a >= 0 and b >= 0")

    def replace(self, **changes) -> "NeuronParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class NeuronState:
    V: float
    w: float = 0.0
    ref_remaining: float = 0.0

    @classmethod
    def rest(cls, params: NeuronParams) -> "NeuronState":
        return cls(V=params.EL, w=0.0, ref_remaining=0.0)


@dataclass(frozen=True)
class SynapseParams:
    tau_s: float  # ms
    weight: float  # pA per presynaptic spike
    sign: int = 1

    def __post_init__(self):
        if not self.tau_s > 0:
            raise ConfigError(f"SynapseParams.tau_s must be > 0, got {self.tau_s}")
        if not self.weight >= 0:
            raise ConfigError(f"SynapseParams.weight must be >= 0, got {self.weight}")
        if self.sign not in (1, -1):
            raise ConfigError(f"SynapseParams.sign must be +1 or -1, got {self.sign}")


@dataclass(frozen=True)
class SynapseState:
    I_syn: float = 0.0  # pA, magnitude; applied with the synapse sign


def refractory_steps(t_ref: float, dt: float) -> int:
    """Whole steps of refractory hold that cover ``t_ref``."""
    return max(0, math.ceil(t_ref / dt - 1e-9))


def adex_derivatives(state: NeuronState, params: NeuronParams, I_in: float) -> tuple[float, float]:
    """Right-hand side of the AdEx ODE, ``(dV/dt [mV/ms], dw/dt [pA/ms])``."""
    V, w = state.V, state.w
    if not (math.isfinite(V) and math.isfinite(w) and math.isfinite(I_in)):
        raise ValueError(f"non-finite AdEx input: V={V}, w={w}, I_in={I_in}")
    arg = (V - params.VT) / params.DeltaT
    if arg > EXP_ARG_MAX:
        arg = EXP_ARG_MAX
    dV = (-params.gL * (V - params.EL) + params.gL * params.DeltaT * math.exp(arg) - w + I_in) / params.C
    dw = (params.a * (V - params.EL) - w) / params.tau_w
    return dV, dw


def step_neuron(
    state: NeuronState, params: NeuronParams, I_in: float, dt: float
) -> tuple[NeuronState, bool]:
    """Advance one neuron by one Heun (explicit trapezoid) step.

    The input current is held constant over the step. An Euler predictor that
    already reaches ``Vpeak`` counts as the spike; otherwise the trapezoid
    corrector gives the new state. A spike resets V within the same step, so
    the returned V never exceeds ``Vpeak``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    h = dt * 0.5
    if state.ref_remaining > 1e-9 * dt:
        V = params.Vreset
        k1 = (params.a * (V - params.EL) - state.w) / params.tau_w
        k2 = (params.a * (V - params.EL) - (state.w + dt * k1)) / params.tau_w
        w = state.w + h * (k1 + k2)
        ref = state.ref_remaining - dt
        if ref < 1e-9 * dt:
            ref = 0.0
        if not math.isfinite(w):
            raise SimulationError(f"neuron state diverged: w={w}")
        return NeuronState(V, w, ref), False

    k1V, k1w = adex_derivatives(state, params, I_in)
    V = state.V + dt * k1V
    w = state.w + dt * k1w
    if not (math.isfinite(V) and math.isfinite(w)):
        raise SimulationError(f"neuron state diverged: V={V}, w={w}")
    if V < params.Vpeak:
        k2V, k2w = adex_derivatives(NeuronState(V, w), params, I_in)
        V = state.V + h * (k1V + k2V)
        w = state.w + h * (k1w + k2w)
        if not (math.isfinite(V) and math.isfinite(w)):
            raise SimulationError(f"neuron state diverged: V={V}, w={w}")
    if V >= params.Vpeak:
        return NeuronState(params.Vreset, w + params.b, params.t_ref), True
    return NeuronState(V, w, 0.0), False


def step_synapse(state: SynapseState, params: SynapseParams, dt: float, n_presyn_spikes: int = 0) -> SynapseState:
    """Exact exponential decay over ``dt`` plus one ``weight`` jump per presynaptic spike."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if n_presyn_spikes < 0:
        raise ValueError("n_presyn_spikes must be >= 0")
    return SynapseState(state.I_syn * math.exp(-dt / params.tau_s) + n_presyn_spikes * params.weight)
