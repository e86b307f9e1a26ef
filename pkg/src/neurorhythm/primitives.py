"""Builders for rhythm-generating circuits, plus stimulation mapping.

Every builder is a pure function returning a :class:`NetworkSpec`. Weights
are per presynaptic spike (pA) with a synaptic time constant (ms), written as
``(weight, tau_s)`` pairs. The numeric defaults are tuned presets; each one is
reachable by name through :data:`PRESETS` and fully overridable.

Population labels follow two conventions the analysis relies on: phase
populations are ``P1_E``, ``P2_E``, ... and inhibitory populations end in
``_I``.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from numbers import Real
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from .analysis import DEFAULT_MAX_ISI, DEFAULT_MIN_SPIKES, phase_bursts
from .engine import SpikeRecord
from .errors import ConfigError, FormatError
from .network import ConnectionSpec, NetworkSpec, PopulationSpec
from .neuron import NeuronParams

Synapse = tuple  # (weight pA, tau_s ms)

PHASES = ("P1_E", "P2_E", "P3_E")
CHANNELS = ("RA", "LA", "V")


class CpgMode(str, Enum):
    RELEASE = "release"
    ESCAPE = "escape"


class ThreePhaseKind(str, Enum):
    CPG_UNIT = "cpg-unit"
    NEURAL_OSCILLATOR = "neural-oscillator"


def _number(value, what: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
        raise ConfigError(f"{what} must be a finite number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{what} must be > 0, got {value}")
    if nonneg and not value >= 0:
        raise ConfigError(f"{what} must be >= 0, got {value}")
    return float(value)


def _count(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ConfigError(f"{what} must be an integer >= 1, got {value!r}")
    return int(value)


def _synapse(pair, what: str) -> tuple[float, float]:
    try:
        weight, tau = pair
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a (weight, tau_s) pair, got {pair!r}") from None
    return _number(weight, f"{what} weight", nonneg=True), _number(tau, f"{what} tau_s", positive=True)


# --------------------------------------------------------------------------
# Single units
# --------------------------------------------------------------------------

# mode -> drive, adaptation (b, tau_w), inhibition, self-excitation
HALF_CENTER_PRESETS = {
    CpgMode.ESCAPE: dict(drive=375.0, adaptation=(8.5, 400.0), inhibition=(23.0, 40.0), self_excitation=(6.0, 80.0)),
    CpgMode.RELEASE: dict(drive=350.0, adaptation=(3.4, 1800.0), inhibition=(2.5, 40.0), self_excitation=(10.0, 90.0)),
}


def build_half_center_cpg(
    mode: CpgMode = CpgMode.ESCAPE,
    drive: Optional[float] = None,
    adaptation: Optional[Synapse] = None,
    inhibition: Optional[Synapse] = None,
    n: int = 4,
    *,
    self_excitation: Optional[Synapse] = None,
    neuron_params: Optional[NeuronParams] = None,
    mismatch_cv: float = 0.0,
    seed: int = 0,
    onset_lag: float = 50.0,
    labels: Sequence[str] = ("P1_E", "P2_E"),
) -> NetworkSpec:
    """Two excitatory pools with mutual inhibition.

    Arguments left as ``None`` take the preset of ``mode``: Escape uses a
    strong, fast adaptation so the inhibited side escapes on its own; Release
    uses a weak, slow one with feeble inhibition, so the active side falls
    silent and lets go. ``onset_lag`` delays the second pool's drive to
    break the left/right symmetry. Each pool also excites itself so that its
    members fire as a group.
    """
    try:
        mode = CpgMode(mode)
    except ValueError:
        raise ConfigError(f"unknown CPG mode {mode!r}; expected 'escape' or 'release'") from None
    preset = HALF_CENTER_PRESETS[mode]
    drive = _number(preset["drive"] if drive is None else drive, "drive")
    b, tau_w = _synapse(preset["adaptation"] if adaptation is None else adaptation, "adaptation")
    w_inh, tau_inh = _synapse(preset["inhibition"] if inhibition is None else inhibition, "inhibition")
    w_self, tau_self = _synapse(
        preset["self_excitation"] if self_excitation is None else self_excitation, "self_excitation"
    )
    n = _count(n, "n")
    onset_lag = _number(onset_lag, "onset_lag", nonneg=True)
    if len(labels) != 2 or labels[0] == labels[1]:
        raise ConfigError(f"half-center needs two distinct labels, got {labels!r}")
    params = (neuron_params or NeuronParams()).replace(b=b, tau_w=tau_w)
    a, z = labels
    pops = [
        PopulationSpec(a, n, params, I_const=drive),
        PopulationSpec(z, n, params, I_const=drive, drive_onset=onset_lag),
    ]
    conns = [
        ConnectionSpec(a, z, -1, w_inh, tau_inh),
        ConnectionSpec(z, a, -1, w_inh, tau_inh),
        ConnectionSpec(a, a, 1, w_self, tau_self),
        ConnectionSpec(z, z, 1, w_self, tau_self),
    ]
    return NetworkSpec(pops, conns, mismatch_cv=mismatch_cv, seed=seed)


def build_bursting_neuron(
    drive: float = 245.0,
    adaptation: Synapse = (17.0, 410.0),
    self_excitation: Synapse = (57.0, 85.0),
    *,
    neuron_params: Optional[NeuronParams] = None,
    mismatch_cv: float = 0.0,
    seed: int = 0,
    label: str = "P1_E",
) -> NetworkSpec:
    """One neuron whose autapse sustains a burst until adaptation ends it."""
    b, tau_w = _synapse(adaptation, "adaptation")
    w, tau = _synapse(self_excitation, "self_excitation")
    params = (neuron_params or NeuronParams()).replace(b=b, tau_w=tau_w)
    pop = PopulationSpec(label, 1, params, I_const=_number(drive, "drive"))
    return NetworkSpec([pop], [ConnectionSpec(label, label, 1, w, tau)], mismatch_cv=mismatch_cv, seed=seed)


OSCILLATOR_WEIGHTS = {"ee": (17.0, 35.0), "ei": (12.5, 30.0), "ie": (90.0, 420.0)}
OSCILLATOR_SIZES = (16, 4)


def _oscillator_weights(weights: Optional[Mapping], nE: int, nI: int) -> dict:
    """Merge overrides into the preset; defaults are rescaled to keep summed input."""
    out = {}
    given = dict(weights or {})
    unknown = set(given) - set(OSCILLATOR_WEIGHTS)
    if unknown:
        raise ConfigError(f"unknown oscillator weight key(s) {sorted(unknown)}; expected ee, ei, ie")
    ref_E, ref_I = OSCILLATOR_SIZES
    for key, (w, tau) in OSCILLATOR_WEIGHTS.items():
        if key in given:
            out[key] = _synapse(given[key], f"weights[{key!r}]")
        else:
            scale = ref_E / nE if key[0] == "e" else ref_I / nI
            out[key] = (w * scale, tau)
    return out


def build_neural_oscillator(
    nE: int = 16,
    nI: int = 4,
    drive: float = 350.0,
    weights: Optional[Mapping[str, Synapse]] = None,
    *,
    neuron_params: Optional[NeuronParams] = None,
    mismatch_cv: float = 0.1,
    seed: int = 0,
    noise_rate: float = 0.0,
    noise_weight: float = 0.0,
    drive_onset: float = 0.0,
    prefix: str = "P1",
) -> NetworkSpec:
    """Excitatory pool with recurrent excitation, reciprocally tied to an inhibitory pool.

    ``weights`` maps ``ee``, ``ei`` and ``ie`` to ``(weight, tau_s)``. Keys
    not given take the preset, scaled by ``16 / nE`` (E-sourced) or
    ``4 / nI`` (I-sourced) so the summed synaptic input is size-independent.
    Only the E pool is driven; adaptation is off.
    """
    nE, nI = _count(nE, "nE"), _count(nI, "nI")
    w = _oscillator_weights(weights, nE, nI)
    params = (neuron_params or NeuronParams()).replace(b=0.0)
    E, I = f"{prefix}_E", f"{prefix}_I"
    pops = [
        PopulationSpec(E, nE, params, I_const=_number(drive, "drive"), drive_onset=drive_onset,
                       noise_rate=noise_rate, noise_weight=noise_weight),
        PopulationSpec(I, nI, params, noise_rate=noise_rate, noise_weight=noise_weight),
    ]
    conns = [
        ConnectionSpec(E, E, 1, *w["ee"]),
        ConnectionSpec(E, I, 1, *w["ei"]),
        ConnectionSpec(I, E, -1, *w["ie"]),
    ]
    return NetworkSpec(pops, conns, mismatch_cv=mismatch_cv, seed=seed)


# --------------------------------------------------------------------------
# Coupling
# --------------------------------------------------------------------------


def _oscillator_shape(unit: NetworkSpec, k: int) -> tuple[str, str]:
    labels = unit.labels
    E = [lab for lab in labels if lab.endswith("_E")]
    I = [lab for lab in labels if lab.endswith("_I")]
    if len(labels) != 2 or len(E) != 1 or len(I) != 1 or E[0][:-2] != I[0][:-2]:
        raise ConfigError(f"unit {k} is not oscillator-shaped: expects one X_E and one X_I population, got {labels}")
    return E[0], I[0]


def _matrix(m, k: int, what: str) -> np.ndarray:
    if m is None:
        return np.zeros((k, k))
    try:
        arr = np.array(m, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a numeric matrix") from None
    if arr.shape != (k, k):
        raise ConfigError(f"{what} must be {k}x{k}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError(f"{what} entries must be finite and >= 0")
    if np.any(np.diag(arr) != 0):
        raise ConfigError(f"{what} must have a zero diagonal")
    return arr


def couple_oscillators(
    units: Sequence[NetworkSpec],
    ee_weights=None,
    ii_weights=None,
    *,
    ie_weights=None,
    ee_tau: float = 10.0,
    ii_tau: float = 300.0,
    ie_tau: float = 300.0,
    ee_delays=None,
) -> NetworkSpec:
    """Merge oscillator units into one network, relabelled ``P1``..``Pk``.

    Matrix entry ``[i][j]`` is the weight from unit ``i`` onto unit ``j``.
    ``ee_weights`` add excitatory E->E links (optionally delayed by
    ``ee_delays``, ms), ``ii_weights`` inhibitory I->I links and
    ``ie_weights`` inhibitory I->E links. Zero entries add nothing, so
    every I-sourced connection stays negative and every E-sourced one
    positive. All units must share one mismatch level; the first unit's
    seed is kept.
    """
    units = list(units)
    if not units:
        raise ConfigError("couple_oscillators needs at least one unit")
    k = len(units)
    shapes = [_oscillator_shape(u, i) for i, u in enumerate(units)]
    if len({u.mismatch_cv for u in units}) > 1:
        raise ConfigError("coupled units must share the same mismatch_cv")
    ee = _matrix(ee_weights, k, "ee_weights")
    ii = _matrix(ii_weights, k, "ii_weights")
    ie = _matrix(ie_weights, k, "ie_weights")
    delays = _matrix(ee_delays, k, "ee_delays")

    pops, conns = [], []
    for i, (unit, (E, I)) in enumerate(zip(units, shapes), start=1):
        rename = {E: f"P{i}_E", I: f"P{i}_I"}
        pops.extend(replace(p, label=rename[p.label]) for p in unit.populations)
        conns.extend(replace(c, src=rename[c.src], dst=rename[c.dst]) for c in unit.connections)
    for i in range(k):
        for j in range(k):
            if ee[i, j] > 0:
                conns.append(ConnectionSpec(f"P{i+1}_E", f"P{j+1}_E", 1, ee[i, j], ee_tau, delay=delays[i, j]))
            if ii[i, j] > 0:
                conns.append(ConnectionSpec(f"P{i+1}_I", f"P{j+1}_I", -1, ii[i, j], ii_tau))
            if ie[i, j] > 0:
                conns.append(ConnectionSpec(f"P{i+1}_I", f"P{j+1}_E", -1, ie[i, j], ie_tau))
    return NetworkSpec(pops, conns, mismatch_cv=units[0].mismatch_cv, seed=units[0].seed)


# --------------------------------------------------------------------------
# Three-phase networks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    """Calibrated three-phase preset.

    ``calibration`` holds measured (drive pA, frequency Hz) pairs used to
    pick the drive for a target frequency. ``burst_width`` (ms) is the
    measured median phase burst duration, the smallest separation two
    phase onsets can have.
    """

    name: str
    kind: ThreePhaseKind
    weights: Mapping[str, Synapse]
    calibration: tuple
    burst_width: float
    mismatch_cv: float
    noise_rate: float = 0.0
    noise_weight: float = 0.0
    seed: int = 1
    sizes: tuple = (16, 4)

    def drive_for(self, freq: float) -> float:
        drives, freqs = np.array(self.calibration, dtype=np.float64).T
        if not freqs[0] <= freq <= freqs[-1]:
            raise ConfigError(
                f"target_freq {freq:g} Hz is outside the calibrated range "
                f"[{freqs[0]:.3g}, {freqs[-1]:.3g}] Hz of the {self.name!r} preset"
            )
        return float(np.interp(freq, freqs, drives))


TOPOLOGIES = {
    "oscillator-ring": Topology(
        name="oscillator-ring",
        kind=ThreePhaseKind.NEURAL_OSCILLATOR,
        weights={**OSCILLATOR_WEIGHTS, "forward": (5.0, 300.0), "backward": (80.0, 300.0)},
        calibration=((350.0, 0.717), (400.0, 0.783), (450.0, 0.844), (500.0, 0.904),
                     (550.0, 0.959), (600.0, 1.014), (650.0, 1.066), (700.0, 1.105)),
        burst_width=60.0,
        mismatch_cv=0.01,
        noise_rate=100.0,
        noise_weight=14.0,
    ),
    "cardiac-chain": Topology(
        name="cardiac-chain",
        kind=ThreePhaseKind.NEURAL_OSCILLATOR,
        weights={**OSCILLATOR_WEIGHTS, "chain": (100.0, 10.0), "follower_drive": (150.0, 1.0)},
        calibration=((240.0, 0.735), (260.0, 0.793), (280.0, 0.837), (300.0, 0.879), (320.0, 0.924),
                     (340.0, 0.967), (360.0, 0.997), (380.0, 1.036), (420.0, 1.110), (480.0, 1.223)),
        burst_width=60.0,
        mismatch_cv=0.02,
        noise_rate=100.0,
        noise_weight=10.0,
    ),
    "cpg-ring": Topology(
        name="cpg-ring",
        kind=ThreePhaseKind.CPG_UNIT,
        weights={"adaptation": (12.0, 340.0), "self": (6.0, 80.0), "forward": (15.0, 40.0), "backward": (30.0, 40.0)},
        # above 340 pA the ring loses its even phase spacing
        calibration=((270.0, 0.860), (280.0, 0.874), (290.0, 0.904), (300.0, 0.936), (310.0, 0.987),
                     (320.0, 1.015), (330.0, 1.034), (340.0, 1.083)),
        burst_width=370.0,
        mismatch_cv=0.0,
        sizes=(4, 0),
    ),
}

# Onset of phase k's drive, breaking the ring symmetry in the P1 -> P2 -> P3 direction.
RING_ONSETS = {"oscillator-ring": (0.0, 50.0, 100.0), "cpg-ring": (0.0, 60.0, 120.0)}

# Offset sensitivity of the oscillator ring: d(offset / T) per unit log-scale of
# the inhibition onto P2 (from P3_I) and onto P3 (from P1_I).
RING_SENSITIVITY = np.array([[0.11, 0.065], [-0.066, 0.178]])
RING_BASE_FRACTIONS = np.array([1 / 3, 2 / 3])
RING_SCALE_RANGE = (0.25, 3.0)

# Cardiac chain: onset latency on top of the synaptic delay (ms).
CHAIN_LATENCY = (23.9, 9.3)

# CPG rings only hold the symmetric pattern; tolerated deviation, fraction of T.
CPG_OFFSET_TOLERANCE = 0.05

_TOPOLOGY_DEFAULT = {ThreePhaseKind.CPG_UNIT: "cpg-ring", ThreePhaseKind.NEURAL_OSCILLATOR: "oscillator-ring"}


@dataclass(frozen=True)
class ThreePhaseSpec:
    """Request for a three-phase network.

    ``phase_offsets`` are the P2 and P3 onsets (ms) after the P1 onset;
    ``None`` means the topology's default pattern (thirds of the period for
    rings). ``drive``, when set, overrides the drive otherwise looked up from
    ``target_freq``. ``n_E``/``n_I`` default to the topology's sizes, and
    ``weights`` overrides individual entries of its weight set.
    """

    kind: ThreePhaseKind = ThreePhaseKind.NEURAL_OSCILLATOR
    target_freq: float = 1.0
    phase_offsets: Optional[tuple] = None
    n_E: Optional[int] = None
    n_I: Optional[int] = None
    weights: Optional[Mapping[str, Synapse]] = None
    topology: Optional[str] = None
    drive: Optional[float] = None
    mismatch_cv: Optional[float] = None
    noise_rate: Optional[float] = None
    noise_weight: Optional[float] = None
    seed: Optional[int] = None
    n_phases: int = 3

    def __post_init__(self):
        if self.n_phases != 3:
            raise ConfigError(f"three phases required, got n_phases={self.n_phases!r}")
        try:
            object.__setattr__(self, "kind", ThreePhaseKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown three-phase kind {self.kind!r}") from None
        freq = _number(self.target_freq, "target_freq", positive=True)
        object.__setattr__(self, "target_freq", freq)
        if self.phase_offsets is not None:
            offs = tuple(self.phase_offsets)
            if len(offs) != 2:
                raise ConfigError(
                    f"three phases required: phase_offsets gives the P2 and P3 onsets, got {len(offs)} value(s)"
                )
            offs = tuple(_number(o, "phase offset") for o in offs)
            period = 1000.0 / freq
            if not 0 < offs[0] < offs[1] < period:
                raise ConfigError(
                    f"phase_offsets must satisfy 0 < P2 < P3 < period ({period:g} ms), got {offs}"
                )
            object.__setattr__(self, "phase_offsets", offs)
        name = self.topology or _TOPOLOGY_DEFAULT[self.kind]
        if name not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {name!r}; expected one of {sorted(TOPOLOGIES)}")
        if TOPOLOGIES[name].kind != self.kind:
            raise ConfigError(f"topology {name!r} is not of kind {self.kind.value!r}")
        object.__setattr__(self, "topology", name)

    @property
    def period(self) -> float:
        return 1000.0 / self.target_freq


def _gap_bound(offsets, period: float, width: float):
    gaps = (offsets[0], offsets[1] - offsets[0], period - offsets[1])
    if min(gaps) < width:
        raise ConfigError(
            f"phase offsets {tuple(round(o, 3) for o in offsets)} unreachable at {1000 / period:g} Hz: "
            f"every inter-phase gap must be at least one burst width ({width:g} ms)"
        )


def _ring_scales(offsets, period: float) -> tuple[float, float]:
    target = np.array(offsets) / period - RING_BASE_FRACTIONS
    log_s = np.linalg.solve(RING_SENSITIVITY, target)
    lo, hi = RING_SCALE_RANGE
    if np.any(log_s < math.log(lo)) or np.any(log_s > math.log(hi)):
        reach = RING_SENSITIVITY @ np.array([math.log(lo), math.log(hi)])
        raise ConfigError(
            f"phase offsets {tuple(offsets)} unreachable with the ring preset: needs inhibition scales "
            f"{tuple(np.round(np.exp(log_s), 3))}, calibrated range is [{lo}, {hi}] "
            f"(about {abs(reach[0]) * period:.0f} ms of shift per offset)"
        )
    return tuple(float(x) for x in np.exp(log_s))


def build_three_phase(spec: ThreePhaseSpec) -> NetworkSpec:
    """Three rhythm units firing in the order P1, P2, P3 once per cycle.

    Topologies:

    * ``oscillator-ring``: three E/I oscillators; each I pool inhibits the
      next phase's E pool weakly and the previous one strongly, which locks
      the sequence. Offsets other than thirds are reached by rescaling the
      inhibition onto P2 and P3 (a stronger brake delays that phase).
    * ``cardiac-chain``: a pacemaker oscillator drives two sub-threshold
      followers through delayed excitatory links; offsets set the delays and
      the long gap is whatever remains of the cycle.
    * ``cpg-ring``: three adapting excitatory pools in an asymmetric
      inhibitory ring (symmetric offsets only).
    """
    topo = TOPOLOGIES[spec.topology]
    period = spec.period
    weights = dict(topo.weights)
    for key, value in (spec.weights or {}).items():
        if key not in weights:
            raise ConfigError(f"unknown weight key {key!r} for {topo.name!r}; expected one of {sorted(weights)}")
        weights[key] = _synapse(value, f"weights[{key!r}]")
    drive = topo.drive_for(spec.target_freq) if spec.drive is None else _number(spec.drive, "drive")
    cv = topo.mismatch_cv if spec.mismatch_cv is None else spec.mismatch_cv
    rate = topo.noise_rate if spec.noise_rate is None else spec.noise_rate
    nw = topo.noise_weight if spec.noise_weight is None else spec.noise_weight
    seed = topo.seed if spec.seed is None else spec.seed
    nE = _count(spec.n_E if spec.n_E is not None else topo.sizes[0], "n_E")

    if topo.name == "cpg-ring":
        if spec.n_I not in (None, 0):
            raise ConfigError("the cpg-ring topology has no inhibitory populations; leave n_I unset")
        if spec.phase_offsets is not None:
            frac = np.array(spec.phase_offsets) / period
            if np.max(np.abs(frac - RING_BASE_FRACTIONS)) > CPG_OFFSET_TOLERANCE:
                raise ConfigError(
                    f"phase offsets {spec.phase_offsets} unreachable with the cpg-ring preset, which only "
                    f"holds offsets within {CPG_OFFSET_TOLERANCE:g} T of (T/3, 2T/3)"
                )
        return _cpg_ring(nE, drive, weights, cv, seed)

    nI = _count(spec.n_I if spec.n_I is not None else topo.sizes[1], "n_I")
    unit_w = {k: weights[k] for k in OSCILLATOR_WEIGHTS}
    ref_E, ref_I = OSCILLATOR_SIZES
    unit_w = {
        k: (w * (ref_E / nE if k[0] == "e" else ref_I / nI), tau)
        if spec.weights is None or k not in spec.weights else (w, tau)
        for k, (w, tau) in unit_w.items()
    }

    def unit(k, I, onset=0.0):
        return build_neural_oscillator(
            nE, nI, I, unit_w, mismatch_cv=cv, seed=seed,
            noise_rate=rate, noise_weight=nw, drive_onset=onset, prefix=f"P{k}",
        )

    if topo.name == "oscillator-ring":
        offsets = spec.phase_offsets or tuple(RING_BASE_FRACTIONS * period)
        _gap_bound(offsets, period, topo.burst_width)
        s2, s3 = _ring_scales(offsets, period)
        (wf, tf), (wb, tb) = weights["forward"], weights["backward"]
        if spec.weights is None or "forward" not in spec.weights:
            wf *= ref_I / nI
        if spec.weights is None or "backward" not in spec.weights:
            wb *= ref_I / nI
        if tf != tb:
            raise ConfigError("ring forward and backward inhibition must share one tau_s")
        ie = np.zeros((3, 3))
        for k in range(3):
            ie[k, (k + 1) % 3] = wf
            ie[k, (k - 1) % 3] = wb
        ie[2, 1] *= s2  # P3_I -> P2_E
        ie[0, 2] *= s3  # P1_I -> P3_E
        units = [unit(k + 1, drive, RING_ONSETS[topo.name][k]) for k in range(3)]
        return couple_oscillators(units, ie_weights=ie, ie_tau=tf)

    # cardiac chain
    offsets = spec.phase_offsets or (27.5, 150.0)
    if period - offsets[1] < topo.burst_width:
        raise ConfigError(
            f"phase offsets {offsets} unreachable at {spec.target_freq:g} Hz: the gap after P3 must be at "
            f"least one burst width ({topo.burst_width:g} ms)"
        )
    lat12, lat23 = CHAIN_LATENCY
    d12 = round(offsets[0] - lat12, 1)
    d23 = round(offsets[1] - offsets[0] - lat23, 1)
    if d12 < 0 or d23 < 0:
        raise ConfigError(
            f"phase offsets {offsets} unreachable with the cardiac chain: P2 needs >= {lat12:g} ms after P1 "
            f"and P3 >= {lat23:g} ms after P2 (one synaptic transmission)"
        )
    w, tau = weights["chain"]
    if spec.weights is None or "chain" not in spec.weights:
        w *= ref_E / nE
    follower = weights["follower_drive"][0]
    units = [unit(1, drive), unit(2, follower), unit(3, follower)]
    ee = np.zeros((3, 3))
    delays = np.zeros((3, 3))
    ee[0, 1], ee[1, 2] = w, w
    delays[0, 1], delays[1, 2] = d12, d23
    return couple_oscillators(units, ee_weights=ee, ee_tau=tau, ee_delays=delays)


def _cpg_ring(n: int, drive: float, weights: Mapping, cv: float, seed: int) -> NetworkSpec:
    b, tau_w = weights["adaptation"]
    params = NeuronParams(b=b, tau_w=tau_w)
    onsets = RING_ONSETS["cpg-ring"]
    pops = [PopulationSpec(lab, n, params, I_const=drive, drive_onset=o) for lab, o in zip(PHASES, onsets)]
    conns = []
    for k, lab in enumerate(PHASES):
        conns.append(ConnectionSpec(lab, lab, 1, *weights["self"]))
        conns.append(ConnectionSpec(lab, PHASES[(k + 1) % 3], -1, *weights["forward"]))
        conns.append(ConnectionSpec(lab, PHASES[(k - 1) % 3], -1, *weights["backward"]))
    return NetworkSpec(pops, conns, mismatch_cv=cv, seed=seed)


# --------------------------------------------------------------------------
# Stimulation schedule
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StimulationSchedule:
    """Time-ordered ``(t_ms, channel)`` stimulation events.

    ``n_cycles`` counts the cycles kept; ``skipped`` holds the P1 onsets of
    cycles dropped because a phase burst was missing or out of order.
    """

    events: tuple = ()
    n_cycles: int = 0
    skipped: tuple = ()
    channels: tuple = CHANNELS

    def __post_init__(self):
        events = tuple((float(t), str(ch)) for t, ch in self.events)
        if any(b[0] < a[0] for a, b in zip(events, events[1:])):
            raise ConfigError("stimulation events must be in non-decreasing time order")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "skipped", tuple(float(t) for t in self.skipped))

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)

    def times(self, channel: str) -> np.ndarray:
        return np.array([t for t, ch in self.events if ch == channel])

    def counts(self) -> dict:
        return {ch: int(sum(1 for _, c in self.events if c == ch)) for ch in self.channels}

    def cycles(self) -> np.ndarray:
        """Kept cycles as an ``(n_cycles, 3)`` array of channel onset times."""
        return np.array([t for t, _ in self.events]).reshape(-1, len(self.channels))

    def gaps(self) -> dict:
        """Median delays (ms) between consecutive channels and the long gap to the next cycle."""
        cyc = self.cycles()
        out = {}
        if cyc.shape[0] == 0:
            return out
        a, b, c = self.channels
        out[f"{b}-{a}"] = float(np.median(cyc[:, 1] - cyc[:, 0]))
        out[f"{c}-{b}"] = float(np.median(cyc[:, 2] - cyc[:, 1]))
        if cyc.shape[0] >= 2:
            out[f"{c}-next {a}"] = float(np.median(cyc[1:, 0] - cyc[:-1, 2]))
        return out

    def summary(self) -> dict:
        return {
            "n_cycles": self.n_cycles,
            "n_skipped": self.n_skipped,
            "skipped_cycle_onsets": list(self.skipped),
            "counts": self.counts(),
            "median_gaps": self.gaps(),
        }

    def to_csv(self) -> str:
        return "t_ms,channel\n" + "".join(f"{t:.6f},{ch}\n" for t, ch in self.events)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, channels: Sequence[str] = CHANNELS) -> "StimulationSchedule":
        lines = text.splitlines()
        if not lines or lines[0].strip() != "t_ms,channel":
            raise FormatError("expected header 't_ms,channel'", line=1)
        events = []
        for i, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 2 or parts[1] not in channels:
                raise FormatError(f"malformed stimulation row {line!r}", line=i)
            try:
                t = float(parts[0])
            except ValueError:
                raise FormatError(f"bad time {parts[0]!r}", line=i) from None
            if not math.isfinite(t):
                raise FormatError(f"bad time {parts[0]!r}", line=i)
            events.append((t, parts[1]))
        n = len(events) // len(channels)
        return cls(events=events, n_cycles=n, channels=tuple(channels))


def _resolve_phase(record: SpikeRecord, key: str) -> str:
    if key in record.labels:
        return key
    if f"{key}_E" in record.labels:
        return f"{key}_E"
    raise ConfigError(f"record has no phase population {key!r}")


def cardiac_schedule(
    record: SpikeRecord,
    mapping: Optional[Mapping[str, str]] = None,
    max_isi: float = DEFAULT_MAX_ISI,
    min_spikes: int = DEFAULT_MIN_SPIKES,
    t_min: float = 0.0,
) -> StimulationSchedule:
    """One stimulation event per channel per cycle, at that phase's burst onset.

    ``mapping`` assigns phases (``P1`` or ``P1_E`` style keys) to channels,
    default ``P1 -> RA, P2 -> LA, P3 -> V``; its iteration order is the
    expected order within a cycle. A cycle runs from one burst onset of
    the first phase to the next (the last one to the end of the record). A
    cycle missing a later phase, or whose onsets are out of order, is
    skipped and listed in ``skipped``.
    """
    mapping = dict(mapping or {"P1": "RA", "P2": "LA", "P3": "V"})
    channels = tuple(mapping.values())
    if len(mapping) != 3 or len(set(channels)) != 3:
        raise ConfigError(f"mapping must be a bijection of three phases onto three channels, got {mapping}")
    phases = [_resolve_phase(record, key) for key in mapping]
    if len(set(phases)) != 3:
        raise ConfigError(f"mapping names the same phase twice: {mapping}")
    onsets = [np.array([b.t_start for b in phase_bursts(record, p, max_isi, min_spikes, t_min)]) for p in phases]
    p1 = onsets[0]
    ends = np.append(p1[1:], np.inf)
    events, skipped = [], []
    for start, stop in zip(p1, ends):
        found = [float(start)]
        for ons in onsets[1:]:
            inside = ons[(ons >= start) & (ons < stop)]
            if inside.size == 0:
                break
            found.append(float(inside[0]))
        if len(found) < 3 or not found[0] < found[1] < found[2]:
            skipped.append(float(start))
            continue
        events.extend(zip(found, channels))
    return StimulationSchedule(events=events, n_cycles=len(events) // 3, skipped=skipped, channels=channels)


# --------------------------------------------------------------------------
# Frequency modulation
# --------------------------------------------------------------------------


def modulate_frequency(physio: float, calibration: tuple) -> float:
    """Map a physiological scalar in [0, 1] linearly onto a drive current."""
    physio = _number(physio, "physio")
    if not 0.0 <= physio <= 1.0:
        raise ConfigError(f"physio must lie in [0, 1], got {physio}")
    try:
        lo, hi = calibration
    except (TypeError, ValueError):
        raise ConfigError(f"calibration must be an (I_min, I_max) pair, got {calibration!r}") from None
    lo, hi = _number(lo, "I_min"), _number(hi, "I_max")
    if not lo < hi:
        raise ConfigError(f"calibration requires I_min < I_max, got ({lo}, {hi})")
    return lo + physio * (hi - lo)


def apply_drive(spec: NetworkSpec, drive: float, labels: Optional[Sequence[str]] = None) -> NetworkSpec:
    """Set ``I_const`` of the given populations (default: every excitatory one)."""
    drive = _number(drive, "drive")
    if labels is None:
        labels = [p.label for p in spec.populations if not p.is_inhibitory]
    for lab in labels:
        spec = spec.with_population(lab, I_const=drive)
    return spec


# --------------------------------------------------------------------------
# Named presets
# --------------------------------------------------------------------------


def _preset_half_center(mode="escape", drive=None, b=None, tau_w=None, w_inh=None, tau_inh=None,
                        w_self=None, tau_self=None, n=4, mismatch_cv=0.0, seed=0, onset_lag=50.0):
    base = HALF_CENTER_PRESETS[CpgMode(mode)] if mode in {m.value for m in CpgMode} else None
    if base is None:
        raise ConfigError(f"unknown CPG mode {mode!r}; expected 'escape' or 'release'")
    pick = lambda v, d: d if v is None else v  # noqa: E731
    return build_half_center_cpg(
        mode, drive,
        (pick(b, base["adaptation"][0]), pick(tau_w, base["adaptation"][1])),
        (pick(w_inh, base["inhibition"][0]), pick(tau_inh, base["inhibition"][1])),
        n,
        self_excitation=(pick(w_self, base["self_excitation"][0]), pick(tau_self, base["self_excitation"][1])),
        mismatch_cv=mismatch_cv, seed=seed, onset_lag=onset_lag,
    )


def _preset_burst(drive=245.0, b=17.0, tau_w=410.0, w_self=57.0, tau_self=85.0, mismatch_cv=0.0, seed=0):
    return build_bursting_neuron(drive, (b, tau_w), (w_self, tau_self), mismatch_cv=mismatch_cv, seed=seed)


def _preset_oscillator(drive=350.0, nE=16, nI=4, mismatch_cv=0.1, seed=1, noise_rate=0.0, noise_weight=0.0):
    return build_neural_oscillator(nE, nI, drive, mismatch_cv=mismatch_cv, seed=seed,
                                   noise_rate=noise_rate, noise_weight=noise_weight)


def _three_phase_preset(kind, topology):
    def build(target_freq=1.0, phase_offsets=None, drive=None, n_E=None, n_I=None, mismatch_cv=None,
              noise_rate=None, noise_weight=None, seed=None):
        return build_three_phase(ThreePhaseSpec(
            kind=kind, topology=topology, target_freq=target_freq,
            phase_offsets=None if phase_offsets is None else tuple(phase_offsets),
            drive=drive, n_E=n_E, n_I=n_I, mismatch_cv=mismatch_cv,
            noise_rate=noise_rate, noise_weight=noise_weight, seed=seed,
        ))
    return build


@dataclass(frozen=True)
class Preset:
    """A named network plus the simulation and analysis settings it was tuned with."""

    name: str
    description: str
    builder: Callable[..., NetworkSpec]
    phases: tuple
    duration: float = 10000.0  # ms
    warmup: float = 2000.0  # ms discarded before analysis
    max_isi: float = DEFAULT_MAX_ISI
    min_spikes: int = DEFAULT_MIN_SPIKES
    defaults: Mapping[str, Any] = field(default_factory=dict)

    @property
    def parameters(self) -> list[str]:
        return list(inspect.signature(self.builder).parameters)

    def build(self, **overrides) -> NetworkSpec:
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise ConfigError(
                f"unknown parameter(s) {sorted(unknown)} for preset {self.name!r}; "
                f"expected some of {self.parameters}"
            )
        return self.builder(**{**self.defaults, **overrides})


PRESETS = {
    p.name: p
    for p in [
        Preset("burst-neuron", "single self-exciting adapting neuron, ~500 ms bursts",
               _preset_burst, ("P1_E",), duration=15000.0),
        Preset("cpg-escape-0.5hz", "half-center CPG in escape mode, 0.5 Hz anti-phase",
               _preset_half_center, ("P1_E", "P2_E"), duration=14000.0, warmup=4000.0, defaults={"mode": "escape"}),
        Preset("cpg-release-0.5hz", "half-center CPG in release mode, ~0.5 Hz anti-phase",
               _preset_half_center, ("P1_E", "P2_E"), duration=14000.0, warmup=4000.0, defaults={"mode": "release"}),
        Preset("oscillator-1hz", "single E/I neural oscillator (16 E, 4 I), ~1 Hz",
               _preset_oscillator, ("P1_E",), duration=12000.0),
        Preset("three-phase-cpg-1hz", "three adapting pools in an inhibitory ring, 1 Hz",
               _three_phase_preset(ThreePhaseKind.CPG_UNIT, "cpg-ring"), PHASES,
               duration=14000.0, warmup=4000.0),
        Preset("symmetric-1hz", "three coupled E/I oscillators, 1 Hz, offsets T/3 and 2T/3",
               _three_phase_preset(ThreePhaseKind.NEURAL_OSCILLATOR, "oscillator-ring"), PHASES,
               duration=40000.0, warmup=5000.0),
        Preset("cardiac-1hz", "pacemaker oscillator chained to two followers (RA, LA, V), ~1 Hz",
               _three_phase_preset(ThreePhaseKind.NEURAL_OSCILLATOR, "cardiac-chain"), PHASES,
               duration=12000.0),
    ]
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
