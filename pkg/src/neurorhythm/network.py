"""Declarative network descriptions and their seeded instantiation.

A :class:`NetworkSpec` lists populations and population-level connections.
:func:`build_network` turns it into a :class:`NetworkInstance`: concrete
per-neuron parameters (after device mismatch), sampled connectivity and the
flattened synapse/edge tables the simulation kernels consume.

Random streams are derived from ``NetworkSpec.seed`` with
:class:`numpy.random.SeedSequence` spawn keys, so every stream is independent
of how many other populations or connections exist before it:

* mismatch of population ``i``:    ``SeedSequence(seed, spawn_key=(0, i))``
* fan-in sampling of connection ``c``: ``SeedSequence(seed, spawn_key=(1, c))``

Noise streams belong to the simulation run, see :mod:`neurorhythm.engine`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from numbers import Real
from typing import Sequence, Union

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .neuron import NeuronParams

SCHEMA_VERSION = 1

MISMATCH_FIELDS = ("C", "gL", "VT", "tau_w", "b")
DEFAULT_MISMATCH_CV = 0.1
DEFAULT_NOISE_TAU = 5.0  # ms

FanIn = Union[int, str]


@dataclass(frozen=True)
class PopulationSpec:
    """A homogeneous group of neurons sharing a parameter template and drive.

    ``noise_tau_s`` (decay of the background-noise synapse) and
    ``drive_onset`` (time at which ``I_const`` switches on) extend the basic
    description; their defaults reproduce a noise synapse of 5 ms and a
    drive present from t = 0.
    """

    label: str
    n: int
    neuron_params: NeuronParams = field(default_factory=NeuronParams)
    I_const: float = 0.0
    noise_rate: float = 0.0
    noise_weight: float = 0.0
    noise_tau_s: float = DEFAULT_NOISE_TAU
    drive_onset: float = 0.0

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ConfigError(f"population label must be a non-empty string, got {self.label!r}")
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigError(f"population {self.label!r}: n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("I_const", "noise_rate", "noise_weight", "noise_tau_s", "drive_onset"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
                raise ConfigError(f"population {self.label!r}: {name} must be a finite number")
            object.__setattr__(self, name, float(value))
        if self.noise_rate < 0 or self.noise_weight < 0:
            raise ConfigError(f"population {self.label!r}: noise_rate and noise_weight must be >= 0")
        if self.noise_tau_s <= 0:
            raise ConfigError(f"population {self.label!r}: noise_tau_s must be > 0")
        if self.drive_onset < 0:
            raise ConfigError(f"population {self.label!r}: drive_onset must be >= 0")
        if not isinstance(self.neuron_params, NeuronParams):
            raise ConfigError(f"population {self.label!r}: neuron_params must be NeuronParams")

    @property
    def is_inhibitory(self) -> bool:
        """Population role by label convention (``*_I`` inhibitory, otherwise excitatory)."""
        return self.label.endswith("_I")


@dataclass(frozen=True)
class ConnectionSpec:
    src: str
    dst: str
    sign: int
    weight: float
    tau_s: float
    fan_in: FanIn = "all"
    delay: float = 0.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ConfigError(f"connection {self.name}: sign must be +1 or -1, got {self.sign!r}")
        object.__setattr__(self, "sign", int(self.sign))
        for name in ("weight", "tau_s", "delay"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
                raise ConfigError(f"connection {self.name}: {name} must be a finite number")
            object.__setattr__(self, name, float(value))
        if self.weight < 0:
            raise ConfigError(f"connection {self.name}: weight must be >= 0")
        if self.tau_s <= 0:
            raise ConfigError(f"connection {self.name}: tau_s must be > 0")
        if self.delay < 0:
            raise ConfigError(f"connection {self.name}: delay must be >= 0")
        if self.fan_in != "all":
            if isinstance(self.fan_in, bool) or not isinstance(self.fan_in, (int, np.integer)) or self.fan_in < 1:
                raise ConfigError(f"connection {self.name}: fan_in must be 'all' or an integer >= 1")
            object.__setattr__(self, "fan_in", int(self.fan_in))

    @property
    def name(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class NetworkSpec:
    populations: tuple[PopulationSpec, ...]
    connections: tuple[ConnectionSpec, ...] = ()
    mismatch_cv: float = DEFAULT_MISMATCH_CV
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "populations", tuple(self.populations))
        object.__setattr__(self, "connections", tuple(self.connections))
        if not self.populations:
            raise ConfigError("network needs at least one population")
        if isinstance(self.mismatch_cv, bool) or not isinstance(self.mismatch_cv, Real):
            raise ConfigError("mismatch_cv must be a number")
        if not (math.isfinite(self.mismatch_cv) and self.mismatch_cv >= 0):
            raise ConfigError(f"mismatch_cv must be >= 0, got {self.mismatch_cv}")
        object.__setattr__(self, "mismatch_cv", float(self.mismatch_cv))
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))

        sizes = {}
        for pop in self.populations:
            if pop.label in sizes:
                raise ConfigError(f"duplicate population label {pop.label!r}")
            sizes[pop.label] = pop.n
        for conn in self.connections:
            for end in (conn.src, conn.dst):
                if end not in sizes:
                    raise ConfigError(f"connection {conn.name}: unknown population {end!r}")
            if conn.fan_in != "all" and conn.fan_in > sizes[conn.src]:
                raise ConfigError(
                    f"connection {conn.name}: fan_in {conn.fan_in} exceeds source size {sizes[conn.src]}"
                )

    @property
    def n_neurons(self) -> int:
        return sum(p.n for p in self.populations)

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.populations]

    def population(self, label: str) -> PopulationSpec:
        for pop in self.populations:
            if pop.label == label:
                return pop
        raise ConfigError(f"unknown population {label!r}")

    def replace(self, **changes) -> "NetworkSpec":
        return replace(self, **changes)

    def with_population(self, label: str, **changes) -> "NetworkSpec":
        pops = tuple(replace(p, **changes) if p.label == label else p for p in self.populations)
        self.population(label)
        return replace(self, populations=pops)

    def to_dict(self) -> dict:
        return spec_to_dict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        return spec_from_dict(data)


# --------------------------------------------------------------------------
# Mismatch
# --------------------------------------------------------------------------


def _truncated_factor(rng: np.random.Generator, cv: float) -> float:
    lo, hi = 1.0 - 4.0 * cv, 1.0 + 4.0 * cv
    while True:
        f = rng.normal(1.0, cv)
        if f > 0.0 and lo <= f <= hi:
            return float(f)


def apply_mismatch(params: NeuronParams, cv: float, rng: np.random.Generator) -> NeuronParams:
    """Jitter C, gL, VT, tau_w and b by independent factors ~ N(1, cv).

    Factors are truncated to ``(0, inf) ∩ [1 - 4cv, 1 + 4cv]`` by resampling.
    The threshold is jittered as a gap above rest, ``VT' = EL + f (VT - EL)``,
    so that ``cv`` is relative to the rest-to-threshold distance rather than
    to an absolute (negative) potential.
    """
    if not cv >= 0:
        raise ConfigError(f"mismatch cv must be >= 0, got {cv}")
    if cv == 0:
        return params
    values = {}
    for name in MISMATCH_FIELDS:
        while True:
            f = _truncated_factor(rng, cv)
            if name == "VT":
                value = params.EL + f * (params.VT - params.EL)
                if value < params.Vpeak:
                    break
            else:
                value = getattr(params, name) * f
                break
        values[name] = float(value)
    return params.replace(**values)


# --------------------------------------------------------------------------
# Instantiation
# --------------------------------------------------------------------------


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class NetworkInstance:
    """Concrete, mutable-by-the-engine realisation of a :class:`NetworkSpec`.

    Neurons are flattened population by population; ``offsets[i]`` is the
    global index of the first neuron of population ``i``. Each connection
    owns one synapse *slot* per target neuron; ``edge_src``/``edge_slot``
    list which source neuron feeds which slot.
    """

    spec: NetworkSpec
    offsets: np.ndarray
    neuron_params: list[NeuronParams]
    sources: list[list[np.ndarray]]  # per connection, per target: source indices within src pop
    slot_conn: np.ndarray
    slot_dst: np.ndarray
    edge_src: np.ndarray
    edge_slot: np.ndarray

    @property
    def n_neurons(self) -> int:
        return int(self.offsets[-1])

    @property
    def n_slots(self) -> int:
        return int(self.slot_conn.size)

    def param_array(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.neuron_params], dtype=np.float64)

    def locate(self, index: int) -> tuple[str, int]:
        """Global neuron index -> (population label, index within population)."""
        i = int(np.searchsorted(self.offsets, index, side="right")) - 1
        return self.spec.populations[i].label, int(index - self.offsets[i])

    def global_index(self, label: str, index: int) -> int:
        for i, pop in enumerate(self.spec.populations):
            if pop.label == label:
                if not 0 <= index < pop.n:
                    raise ConfigError(f"neuron index {index} out of range for {label!r} (n={pop.n})")
                return int(self.offsets[i] + index)
        raise ConfigError(f"unknown population {label!r}")

    def population_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.spec.populations)), np.diff(self.offsets))


def build_network(spec: NetworkSpec) -> NetworkInstance:
    """Instantiate ``spec``: mismatch each neuron, sample fan-in, lay out synapse slots."""
    # Re-validate: specs may have been assembled with dataclasses.replace.
    spec = NetworkSpec(spec.populations, spec.connections, spec.mismatch_cv, spec.seed)
    pop_index = {p.label: i for i, p in enumerate(spec.populations)}
    offsets = np.zeros(len(spec.populations) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([p.n for p in spec.populations])

    neuron_params: list[NeuronParams] = []
    for i, pop in enumerate(spec.populations):
        if spec.mismatch_cv == 0:
            neuron_params.extend([pop.neuron_params] * pop.n)
        else:
            rng = _stream(spec.seed, 0, i)
            neuron_params.extend(apply_mismatch(pop.neuron_params, spec.mismatch_cv, rng) for _ in range(pop.n))

    sources: list[list[np.ndarray]] = []
    slot_conn, slot_dst, edge_src, edge_slot = [], [], [], []
    for c, conn in enumerate(spec.connections):
        src_pop = spec.populations[pop_index[conn.src]]
        dst_pop = spec.populations[pop_index[conn.dst]]
        src_off = offsets[pop_index[conn.src]]
        dst_off = offsets[pop_index[conn.dst]]
        rng = _stream(spec.seed, 1, c) if conn.fan_in != "all" else None
        per_target = []
        for t in range(dst_pop.n):
            if rng is None:
                idx = np.arange(src_pop.n)
            else:
                idx = np.sort(rng.choice(src_pop.n, size=conn.fan_in, replace=False))
            per_target.append(idx)
            slot = len(slot_conn)
            slot_conn.append(c)
            slot_dst.append(dst_off + t)
            edge_src.extend((src_off + idx).tolist())
            edge_slot.extend([slot] * idx.size)
        sources.append(per_target)

    edge_src_a = np.asarray(edge_src, dtype=np.int64)
    edge_slot_a = np.asarray(edge_slot, dtype=np.int64)
    order = np.argsort(edge_src_a, kind="stable")
    return NetworkInstance(
        spec=spec,
        offsets=offsets,
        neuron_params=neuron_params,
        sources=sources,
        slot_conn=np.asarray(slot_conn, dtype=np.int64),
        slot_dst=np.asarray(slot_dst, dtype=np.int64),
        edge_src=edge_src_a[order],
        edge_slot=edge_slot_a[order],
    )


# --------------------------------------------------------------------------
# Serialisation (TOML)
# --------------------------------------------------------------------------

_POP_KEYS = {f.name for f in fields(PopulationSpec)}
_CONN_KEYS = {f.name for f in fields(ConnectionSpec)}
_PARAM_KEYS = {f.name for f in fields(NeuronParams)}
_SPEC_KEYS = {"schema_version", "populations", "connections", "mismatch_cv", "seed"}


def _check_keys(data: dict, allowed: set, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a table, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mismatch_cv": spec.mismatch_cv,
        "seed": spec.seed,
        "populations": [asdict(p) for p in spec.populations],
        "connections": [asdict(c) for c in spec.connections],
    }


def spec_from_dict(data: dict) -> NetworkSpec:
    _check_keys(data, _SPEC_KEYS, "network")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"network: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    pops = []
    for k, p in enumerate(data.get("populations", [])):
        _check_keys(p, _POP_KEYS, f"network.populations[{k}]")
        p = dict(p)
        np_data = p.pop("neuron_params", {})
        _check_keys(np_data, _PARAM_KEYS, f"network.populations[{k}].neuron_params")
        try:
            pops.append(PopulationSpec(neuron_params=NeuronParams(**np_data), **p))
        except TypeError as exc:
            raise ConfigError(f"network.populations[{k}]: {exc}") from None
    conns = []
    for k, c in enumerate(data.get("connections", [])):
        _check_keys(c, _CONN_KEYS, f"network.connections[{k}]")
        try:
            conns.append(ConnectionSpec(**c))
        except TypeError as exc:
            raise ConfigError(f"network.connections[{k}]: {exc}") from None
    return NetworkSpec(
        populations=pops,
        connections=conns,
        mismatch_cv=data.get("mismatch_cv", DEFAULT_MISMATCH_CV),
        seed=data.get("seed", 0),
    )


def dumps(spec: NetworkSpec) -> str:
    import tomli_w

    return tomli_w.dumps(spec_to_dict(spec))


def loads(text: str) -> NetworkSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    return spec_from_dict(data)


def merge_specs(units: Sequence[NetworkSpec], prefixes: Sequence[str]) -> NetworkSpec:
    """Concatenate specs, renaming each unit's labels ``X`` -> ``prefix_X``."""
    pops, conns = [], []
    for unit, prefix in zip(units, prefixes):
        rename = {p.label: f"{prefix}_{p.label}" for p in unit.populations}
        pops.extend(replace(p, label=rename[p.label]) for p in unit.populations)
        conns.extend(replace(c, src=rename[c.src], dst=rename[c.dst]) for c in unit.connections)
    first = units[0]
    return NetworkSpec(pops, conns, first.mismatch_cv, first.seed)
