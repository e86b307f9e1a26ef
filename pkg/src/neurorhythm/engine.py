"""Fixed-step simulation of a :class:`~neurorhythm.network.NetworkInstance`.

Each step of ``dt`` runs, in this order: delivery of delayed spikes, synapse
decay and jump, current summation (``I_const`` + noise + signed synaptic
currents), the AdEx neuron update, and enqueueing of the emitted spikes. A
spike emitted in step ``s`` through a connection with delay ``d`` is delivered
at the start of step ``s + 1 + d/dt``; spikes are stamped with the end time of
the step in which V crossed ``Vpeak``.

The inner loop lives in a compiled kernel (``neurorhythm._kernel``) with a
bit-identical numpy fallback (``neurorhythm._kernel_py``). Set
``NEURORHYTHM_BACKEND=python`` to force the fallback.

Noise: population ``i`` with ``noise_rate > 0`` draws per-step Poisson counts
from ``SeedSequence(trial_seed, spawn_key=(2, i))``. Trial ``k`` of
:func:`run_trials` uses ``trial_seed = derive_trial_seed(seed_base, k)``.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from numbers import Real
from typing import Optional, Sequence

import numpy as np

from . import _kernel_py
from .errors import ConfigError, FormatError, SimulationError
from .network import NetworkInstance, NetworkSpec, build_network
from .neuron import refractory_steps

try:
    from . import _kernel as _kernel_c
except ImportError:  # extension not built
    _kernel_c = None

BACKENDS = {"python": _kernel_py.advance}
if _kernel_c is not None:
    BACKENDS["compiled"] = _kernel_c.advance

_requested = os.environ.get("NEURORHYTHM_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "compiled"):
    raise ImportError(f"NEURORHYTHM_BACKEND must be 'python' or 'compiled', got {_requested!r}")
if _requested == "compiled" and _kernel_c is None:
    raise ImportError("NEURORHYTHM_BACKEND=compiled but neurorhythm._kernel is not built")
BACKEND = _requested or ("compiled" if _kernel_c is not None else "python")

CHUNK_STEPS = 2048
SPIKE_HEADER = ("t_ms", "population", "neuron")
TRACE_HEADER = ("t_ms", "population", "neuron", "V_mV", "w_pA")


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 0.1  # ms
    duration: float = 1000.0  # ms
    record_spikes: bool = True
    trace_neurons: tuple = ()  # (population label, index) pairs
    trial_seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.dt, Real) and 0 < self.dt <= 1.0):
            raise ConfigError(f"dt must be in (0, 1] ms, got {self.dt!r}")
        if not (isinstance(self.duration, Real) and self.duration >= self.dt):
            raise ConfigError(f"duration must be >= dt, got {self.duration!r}")
        if not 0 <= int(self.trial_seed) < 2**64:
            raise ConfigError("trial_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "trial_seed", int(self.trial_seed))
        object.__setattr__(self, "trace_neurons", tuple((str(p), int(i)) for p, i in self.trace_neurons))

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


def _canonical_times(t: np.ndarray) -> np.ndarray:
    # Snap to the 6-decimal grid used by the CSV export so that a record read
    # back from disk compares equal to the in-memory one.
    return np.array([float(f"{v:.6f}") for v in t.tolist()], dtype=np.float64)


@dataclass(frozen=True)
class SpikeRecord:
    """Time-ordered spike events.

    Events are stored column-wise: ``t`` (ms), ``pop`` (index into
    ``labels``) and ``neuron`` (index within the population). ``sizes`` holds
    the population sizes when known (0 when inferred from a file).
    """

    t: np.ndarray
    pop: np.ndarray
    neuron: np.ndarray
    labels: tuple
    sizes: tuple
    duration: float
    dt: float

    def __len__(self):
        return int(self.t.size)

    @property
    def events(self) -> list[tuple[float, str, int]]:
        return [(float(t), self.labels[p], int(i)) for t, p, i in zip(self.t, self.pop, self.neuron)]

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ConfigError(f"unknown population {label!r}; record has {list(self.labels)}") from None

    def size_of(self, label: str) -> int:
        k = self.label_index(label)
        if self.sizes[k]:
            return int(self.sizes[k])
        sel = self.pop == k
        return int(self.neuron[sel].max()) + 1 if sel.any() else 1

    def times(self, label: str) -> np.ndarray:
        """All spike times of one population, sorted."""
        return self.t[self.pop == self.label_index(label)]

    def neuron_times(self, label: str, index: int) -> np.ndarray:
        k = self.label_index(label)
        return self.t[(self.pop == k) & (self.neuron == index)]

    def shifted(self, offset: float) -> "SpikeRecord":
        return replace(self, t=self.t + offset)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(SPIKE_HEADER) + "\n")
        labels = self.labels
        for t, p, i in zip(self.t.tolist(), self.pop.tolist(), self.neuron.tolist()):
            buf.write(f"{t:.6f},{labels[p]},{i}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, labels: Optional[Sequence[str]] = None, sizes=None) -> "SpikeRecord":
        """Parse the ``t_ms,population,neuron`` export. Errors name the 1-based line."""
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty file, expected header t_ms,population,neuron", line=1) from None
        if tuple(h.strip() for h in header) != SPIKE_HEADER:
            raise FormatError(f"bad header {header!r}, expected t_ms,population,neuron", line=1)
        ts, ps, ns = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"expected 3 fields, got {len(row)}", line=lineno)
            try:
                t = float(row[0])
                n = int(row[2])
            except ValueError:
                raise FormatError(f"cannot parse row {row!r}", line=lineno) from None
            if not math.isfinite(t) or n < 0 or not row[1]:
                raise FormatError(f"invalid values in row {row!r}", line=lineno)
            if ts and t < ts[-1]:
                raise FormatError("spike times must be non-decreasing", line=lineno)
            ts.append(t)
            ps.append(row[1])
            ns.append(n)
        order = list(labels) if labels else []
        for p in ps:
            if p not in order:
                order.append(p)
        index = {p: k for k, p in enumerate(order)}
        sz = tuple(sizes) if sizes else (0,) * len(order)
        if len(sz) < len(order):
            sz = sz + (0,) * (len(order) - len(sz))
        t_arr = np.asarray(ts, dtype=np.float64)
        return cls(
            t=t_arr,
            pop=np.asarray([index[p] for p in ps], dtype=np.int64),
            neuron=np.asarray(ns, dtype=np.int64),
            labels=tuple(order),
            sizes=sz,
            duration=float(t_arr[-1]) if t_arr.size else 0.0,
            dt=0.0,
        )

    @classmethod
    def read_csv(cls, path, **kwargs) -> "SpikeRecord":
        with open(path, newline="") as fh:
            return cls.from_csv(fh.read(), **kwargs)


@dataclass(frozen=True)
class StateTrace:
    """Per recorded neuron: V and w on the uniform grid ``t = dt, 2 dt, ...``."""

    t: np.ndarray
    neurons: tuple  # (label, index) pairs
    V: np.ndarray  # shape (n_steps, n_neurons)
    w: np.ndarray

    def get(self, label: str, index: int) -> tuple[np.ndarray, np.ndarray]:
        j = self.neurons.index((label, index))
        return self.V[:, j], self.w[:, j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(TRACE_HEADER) + "\n")
        for j, (label, index) in enumerate(self.neurons):
            for t, v, w in zip(self.t.tolist(), self.V[:, j].tolist(), self.w[:, j].tolist()):
                buf.write(f"{t:.6f},{label},{index},{v!r},{w!r}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


@dataclass
class _Compiled:
    """dt-dependent kernel tables derived from an instance."""

    params: tuple
    slots: tuple
    edges: tuple
    ring_len: int
    noise_pops: list = field(default_factory=list)  # (pop index, offset, n, lam)


def _compile(instance: NetworkInstance, config: SimulationConfig) -> _Compiled:
    spec = instance.spec
    dt = config.dt
    N = instance.n_neurons
    pa = instance.param_array
    pop_of = instance.population_index()
    pops = spec.populations

    I_const = np.array([pops[k].I_const for k in pop_of], dtype=np.float64)
    onset = np.array([int(math.ceil(pops[k].drive_onset / dt - 1e-9)) for k in pop_of], dtype=np.int64)
    ref_steps = np.array([refractory_steps(p.t_ref, dt) for p in instance.neuron_params], dtype=np.int32)
    noise_w = np.array([pops[k].noise_weight for k in pop_of], dtype=np.float64)
    noise_decay = np.array([math.exp(-dt / pops[k].noise_tau_s) for k in pop_of], dtype=np.float64)
    params = (
        pa("C"), pa("gL"), pa("EL"), pa("VT"), pa("DeltaT"), pa("Vpeak"), pa("Vreset"),
        pa("a"), pa("b"), pa("tau_w"), I_const, onset, ref_steps, noise_w, noise_decay,
    )

    conns = spec.connections
    delay_steps = []
    for c in conns:
        q = c.delay / dt
        if abs(q - round(q)) > 1e-6:
            raise ConfigError(f"connection {c.name}: delay {c.delay} ms is not a multiple of dt={dt} ms")
        delay_steps.append(int(round(q)))
    sc = instance.slot_conn
    slot_decay = np.array([math.exp(-dt / conns[c].tau_s) for c in sc.tolist()], dtype=np.float64)
    slot_weight = np.array([conns[c].weight for c in sc.tolist()], dtype=np.float64)
    slot_sign = np.array([float(conns[c].sign) for c in sc.tolist()], dtype=np.float64)
    slot_delay = np.array([delay_steps[c] for c in sc.tolist()], dtype=np.int64)
    slots = (slot_decay, slot_weight, slot_sign, instance.slot_dst.astype(np.int64), slot_delay)

    out_ptr = np.zeros(N + 1, dtype=np.int64)
    np.add.at(out_ptr, instance.edge_src + 1, 1)
    out_ptr = np.cumsum(out_ptr)
    edges = (out_ptr, instance.edge_slot.astype(np.int64))

    noise_pops = []
    for k, pop in enumerate(pops):
        if pop.noise_rate > 0 and pop.noise_weight > 0:
            noise_pops.append((k, int(instance.offsets[k]), pop.n, pop.noise_rate * dt / 1000.0))
    return _Compiled(params, slots, edges, max(delay_steps, default=0) + 2, noise_pops)


def run(
    instance: NetworkInstance, config: SimulationConfig, backend: Optional[str] = None
) -> tuple[SpikeRecord, Optional[StateTrace]]:
    """Simulate ``instance`` for ``config.duration`` ms.

    Returns the spike record and, if ``config.trace_neurons`` is non-empty,
    the V/w trace of those neurons. Raises :class:`SimulationError` naming the
    time and neuron if any state becomes non-finite.
    """
    advance = BACKENDS[backend or BACKEND]
    comp = _compile(instance, config)
    N = instance.n_neurons
    S = instance.n_slots
    dt = config.dt
    n_steps = config.n_steps

    V = instance.param_array("EL")
    w = np.zeros(N)
    ref_count = np.zeros(N, dtype=np.int32)
    I_syn = np.zeros(S)
    I_noise = np.zeros(N)
    ring = np.zeros((comp.ring_len, S), dtype=np.int32)

    trace_idx = np.array([instance.global_index(p, i) for p, i in config.trace_neurons], dtype=np.int64)
    K = trace_idx.size
    trace_V = np.empty((n_steps, K))
    trace_w = np.empty((n_steps, K))

    rngs = [
        (np.random.default_rng(np.random.SeedSequence(config.trial_seed, spawn_key=(2, k))), off, n, lam)
        for k, off, n, lam in comp.noise_pops
    ]
    empty_noise = np.zeros((0, N), dtype=np.int32)
    spike_step = np.empty(CHUNK_STEPS * N, dtype=np.int64)
    spike_id = np.empty(CHUNK_STEPS * N, dtype=np.int32)
    steps_out, ids_out = [], []

    step = 0
    while step < n_steps:
        m = min(CHUNK_STEPS, n_steps - step)
        if rngs:
            noise = np.zeros((m, N), dtype=np.int32)
            for rng, off, n, lam in rngs:
                noise[:, off:off + n] = rng.poisson(lam, size=(m, n))
        else:
            noise = empty_noise
        n_sp, bad_step, bad_neuron = advance(
            *comp.params, *comp.slots, *comp.edges,
            V, w, ref_count, I_syn, I_noise, ring,
            step, m, dt,
            noise, trace_idx, trace_V[step:step + m], trace_w[step:step + m],
            spike_step, spike_id,
        )
        if bad_step >= 0:
            label, idx = instance.locate(bad_neuron)
            t = (bad_step + 1) * dt
            raise SimulationError(
                f"non-finite state at t={t:.4f} ms in neuron {label}[{idx}]",
                t_ms=t, population=label, neuron=idx,
            )
        if config.record_spikes and n_sp:
            steps_out.append(spike_step[:n_sp].copy())
            ids_out.append(spike_id[:n_sp].copy())
        step += m

    if steps_out:
        steps_all = np.concatenate(steps_out)
        ids_all = np.concatenate(ids_out).astype(np.int64)
    else:
        steps_all = np.zeros(0, dtype=np.int64)
        ids_all = np.zeros(0, dtype=np.int64)
    pop_of = instance.population_index()
    spec = instance.spec
    record = SpikeRecord(
        t=_canonical_times((steps_all + 1) * dt),
        pop=pop_of[ids_all].astype(np.int64),
        neuron=(ids_all - instance.offsets[pop_of[ids_all]]).astype(np.int64),
        labels=tuple(spec.labels),
        sizes=tuple(p.n for p in spec.populations),
        duration=n_steps * dt,
        dt=dt,
    )
    trace = None
    if K:
        trace = StateTrace(
            t=(np.arange(n_steps) + 1) * dt, neurons=config.trace_neurons, V=trace_V, w=trace_w
        )
    return record, trace


def simulate(spec: NetworkSpec, config: SimulationConfig, backend: Optional[str] = None):
    """Build ``spec`` and run it; convenience wrapper around :func:`run`."""
    return run(build_network(spec), config, backend=backend)


def derive_trial_seed(seed_base: int, k: int) -> int:
    """Seed of trial ``k``: first 64-bit word of ``SeedSequence([seed_base, k])``."""
    return int(np.random.SeedSequence([int(seed_base), int(k)]).generate_state(1, np.uint64)[0])


def run_trials(
    spec: NetworkSpec,
    config: SimulationConfig,
    n_trials: int,
    seed_base: int,
    workers: int = 1,
    backend: Optional[str] = None,
) -> list[SpikeRecord]:
    """Run ``n_trials`` independent trials of one network (same device, fresh noise).

    The result is ordered by trial index and does not depend on ``workers``.
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    instance = build_network(spec)

    def one(k: int) -> SpikeRecord:
        cfg = replace(config, trial_seed=derive_trial_seed(seed_base, k))
        try:
            return run(instance, cfg, backend=backend)[0]
        except SimulationError as exc:
            raise SimulationError(
                f"trial {k}: {exc}", t_ms=exc.t_ms, population=exc.population, neuron=exc.neuron, trial=k
            ) from exc

    if workers <= 1:
        return [one(k) for k in range(n_trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_trials)))
