import math

import numpy as np
import pytest

from neurorhythm import engine
from neurorhythm.engine import (
    SimulationConfig,
    SpikeRecord,
    derive_trial_seed,
    run,
    run_trials,
    simulate,
)
from neurorhythm.errors import ConfigError, FormatError, SimulationError
from neurorhythm.network import ConnectionSpec, NetworkSpec, PopulationSpec, build_network
from neurorhythm.neuron import (
    NeuronParams,
    NeuronState,
    SynapseParams,
    SynapseState,
    step_neuron,
    step_synapse,
)

needs_compiled = pytest.mark.skipif("compiled" not in engine.BACKENDS, reason="compiled kernel not built")


def reference_run(spec: NetworkSpec, dt: float, n_steps: int):
    """Scalar re-implementation of the documented step order (no noise, cv = 0, all-to-all)."""
    pops = spec.populations
    labels = [p.label for p in pops]
    neurons = [(k, i) for k, p in enumerate(pops) for i in range(p.n)]
    state = {nid: NeuronState.rest(pops[nid[0]].neuron_params) for nid in neurons}
    syn = {}
    for c, conn in enumerate(spec.connections):
        for i in range(spec.population(conn.dst).n):
            syn[(c, i)] = SynapseState()
    pending = {}  # step -> list of (connection, count)
    spikes = []
    for s in range(n_steps):
        arrivals = pending.pop(s, {})
        current = {nid: 0.0 for nid in neurons}
        for c, conn in enumerate(spec.connections):
            par = SynapseParams(conn.tau_s, conn.weight, conn.sign)
            k_dst = labels.index(conn.dst)
            for i in range(pops[k_dst].n):
                syn[(c, i)] = step_synapse(syn[(c, i)], par, dt, arrivals.get(c, 0))
                current[(k_dst, i)] += conn.sign * syn[(c, i)].I_syn
        fired = []
        for k, i in neurons:
            pop = pops[k]
            drive = pop.I_const if s >= round(pop.drive_onset / dt) else 0.0
            st, sp = step_neuron(state[(k, i)], pop.neuron_params, drive + current[(k, i)], dt)
            state[(k, i)] = st
            if sp:
                fired.append((k, i))
                spikes.append((round((s + 1) * dt, 6), pop.label, i))
        for k, i in fired:
            for c, conn in enumerate(spec.connections):
                if conn.src == labels[k]:
                    due = s + 1 + round(conn.delay / dt)
                    pending.setdefault(due, {})
                    pending[due][c] = pending[due].get(c, 0) + 1
    return spikes


def chain_spec(delay=0.0):
    return NetworkSpec(
        [
            PopulationSpec("A", 2, NeuronParams(b=20.0, tau_w=150.0), I_const=420.0),
            PopulationSpec("B", 1, NeuronParams(), I_const=150.0, drive_onset=5.0),
        ],
        [
            ConnectionSpec("A", "B", 1, 120.0, 8.0, delay=delay),
            ConnectionSpec("B", "A", -1, 40.0, 20.0),
        ],
        mismatch_cv=0.0,
    )


@pytest.mark.parametrize("delay", [0.0, 0.3, 2.5])
def test_engine_matches_scalar_reference(delay):
    spec = chain_spec(delay)
    record, _ = simulate(spec, SimulationConfig(dt=0.1, duration=300.0))
    expected = reference_run(spec, 0.1, 3000)
    assert len(expected) > 10
    assert record.events == expected


def test_single_neuron_trace_matches_step_neuron():
    p = NeuronParams(a=2.0, b=40.0)
    spec = NetworkSpec([PopulationSpec("N", 1, p, I_const=500.0)], mismatch_cv=0.0)
    _, trace = simulate(spec, SimulationConfig(dt=0.1, duration=100.0, trace_neurons=[("N", 0)]))
    st = NeuronState.rest(p)
    Vs, ws = [], []
    for _ in range(1000):
        st, _ = step_neuron(st, p, 500.0, 0.1)
        Vs.append(st.V)
        ws.append(st.w)
    np.testing.assert_array_equal(trace.V[:, 0], Vs)
    np.testing.assert_array_equal(trace.w[:, 0], ws)
    np.testing.assert_allclose(trace.t[:3], [0.1, 0.2, 0.3])


def test_spikes_stamped_at_end_of_step():
    spec = NetworkSpec([PopulationSpec("N", 1, I_const=5000.0)], mismatch_cv=0.0)
    record, trace = simulate(spec, SimulationConfig(dt=0.1, duration=20.0, trace_neurons=[("N", 0)]))
    first = record.t[0]
    k = int(round(first / 0.1)) - 1
    assert trace.V[k, 0] == NeuronParams().Vreset
    assert trace.V[k - 1, 0] > NeuronParams().Vreset


def test_drive_onset_delays_firing():
    spec = NetworkSpec([PopulationSpec("N", 1, I_const=800.0, drive_onset=50.0)], mismatch_cv=0.0)
    record, _ = simulate(spec, SimulationConfig(duration=100.0))
    assert record.t[0] > 50.0


def test_delay_must_be_multiple_of_dt():
    with pytest.raises(ConfigError, match="multiple"):
        simulate(chain_spec(0.25), SimulationConfig(dt=0.1, duration=10.0))


@pytest.mark.parametrize("kwargs", [{"dt": 0.0}, {"dt": 2.0}, {"duration": 0.01}, {"trial_seed": -1}])
def test_bad_simulation_config(kwargs):
    with pytest.raises(ConfigError):
        SimulationConfig(**kwargs)


def noisy_spec():
    return NetworkSpec(
        [
            PopulationSpec("P1_E", 12, NeuronParams(b=2.0), I_const=260.0, noise_rate=200.0, noise_weight=30.0),
            PopulationSpec("P1_I", 4, noise_rate=50.0, noise_weight=20.0),
        ],
        [
            ConnectionSpec("P1_E", "P1_E", 1, 5.0, 20.0, fan_in=6),
            ConnectionSpec("P1_E", "P1_I", 1, 15.0, 20.0, delay=1.0),
            ConnectionSpec("P1_I", "P1_E", -1, 60.0, 100.0),
        ],
        mismatch_cv=0.1,
        seed=11,
    )


def test_determinism_byte_identical_csv():
    cfg = SimulationConfig(duration=500.0, trial_seed=5)
    a, _ = simulate(noisy_spec(), cfg)
    b, _ = simulate(noisy_spec(), cfg)
    assert len(a) > 50
    assert a.to_csv() == b.to_csv()
    c, _ = simulate(noisy_spec(), SimulationConfig(duration=500.0, trial_seed=6))
    assert c.to_csv() != a.to_csv()


@needs_compiled
def test_backends_bit_identical():
    inst = build_network(noisy_spec())
    cfg = SimulationConfig(duration=800.0, trial_seed=2, trace_neurons=[("P1_E", 0), ("P1_I", 3)])
    r_py, t_py = run(inst, cfg, backend="python")
    r_c, t_c = run(inst, cfg, backend="compiled")
    assert r_py.to_csv() == r_c.to_csv()
    np.testing.assert_array_equal(t_py.V, t_c.V)
    np.testing.assert_array_equal(t_py.w, t_c.w)


def test_chunk_boundaries_do_not_matter(monkeypatch):
    cfg = SimulationConfig(duration=300.0, trial_seed=1)
    a, _ = simulate(noisy_spec(), cfg)
    monkeypatch.setattr(engine, "CHUNK_STEPS", 7)
    b, _ = simulate(noisy_spec(), cfg)
    assert a.to_csv() == b.to_csv()


def test_run_trials_serial_equals_parallel():
    cfg = SimulationConfig(duration=300.0)
    serial = run_trials(noisy_spec(), cfg, 4, seed_base=7, workers=1)
    parallel = run_trials(noisy_spec(), cfg, 4, seed_base=7, workers=4)
    assert [r.to_csv() for r in serial] == [r.to_csv() for r in parallel]
    assert len({r.to_csv() for r in serial}) == 4


def test_derive_trial_seed():
    s = derive_trial_seed(7, 0)
    assert s == int(np.random.SeedSequence([7, 0]).generate_state(1, np.uint64)[0])
    assert derive_trial_seed(7, 1) != s
    assert 0 <= s < 2**64


def test_simulation_error_names_neuron():
    spec = NetworkSpec(
        [PopulationSpec("ok", 2), PopulationSpec("bad", 3, NeuronParams(C=1e-300), I_const=1e10)],
        mismatch_cv=0.0,
    )
    with pytest.raises(SimulationError) as info:
        simulate(spec, SimulationConfig(duration=10.0))
    err = info.value
    assert err.population == "bad" and err.neuron == 0
    assert err.t_ms == pytest.approx(0.1)


def test_run_trials_error_names_trial():
    spec = NetworkSpec([PopulationSpec("bad", 1, NeuronParams(C=1e-300), I_const=1e10)], mismatch_cv=0.0)
    with pytest.raises(SimulationError) as info:
        run_trials(spec, SimulationConfig(duration=1.0), 2, seed_base=0)
    assert info.value.trial == 0


def test_silent_network_without_input():
    spec = NetworkSpec([PopulationSpec("N", 5)], mismatch_cv=0.2, seed=1)
    record, _ = simulate(spec, SimulationConfig(duration=500.0))
    assert len(record) == 0
    assert record.to_csv() == "t_ms,population,neuron\n"


def test_csv_round_trip():
    record, _ = simulate(noisy_spec(), SimulationConfig(duration=300.0, trial_seed=3))
    back = SpikeRecord.from_csv(record.to_csv(), labels=record.labels, sizes=record.sizes)
    np.testing.assert_array_equal(back.t, record.t)
    np.testing.assert_array_equal(back.pop, record.pop)
    np.testing.assert_array_equal(back.neuron, record.neuron)
    assert back.to_csv() == record.to_csv()
    assert all(len(line.split(",")[0].split(".")[1]) == 6 for line in record.to_csv().splitlines()[1:])


@pytest.mark.parametrize(
    "text,line",
    [
        ("", 1),
        ("t,pop,n\n", 1),
        ("t_ms,population,neuron\n1.0,A,0\n2.0,A\n", 3),
        ("t_ms,population,neuron\n1.0,A,0\nx,A,0\n", 3),
        ("t_ms,population,neuron\n2.0,A,0\n1.0,A,0\n", 3),
        ("t_ms,population,neuron\n1.0,A,-1\n", 2),
        ("t_ms,population,neuron\nnan,A,0\n", 2),
    ],
)
def test_malformed_csv_names_line(text, line):
    with pytest.raises(FormatError) as info:
        SpikeRecord.from_csv(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_record_accessors():
    text = "t_ms,population,neuron\n1.000000,A,0\n2.000000,B,3\n3.000000,A,1\n"
    rec = SpikeRecord.from_csv(text)
    assert rec.labels == ("A", "B")
    np.testing.assert_array_equal(rec.times("A"), [1.0, 3.0])
    np.testing.assert_array_equal(rec.neuron_times("A", 1), [3.0])
    assert rec.size_of("B") == 4
    assert rec.shifted(10.0).t[0] == 11.0
    with pytest.raises(ConfigError):
        rec.times("C")


def test_trace_csv_layout():
    spec = NetworkSpec([PopulationSpec("N", 2, I_const=300.0)], mismatch_cv=0.0)
    _, trace = simulate(spec, SimulationConfig(duration=1.0, trace_neurons=[("N", 1)]))
    lines = trace.to_csv().splitlines()
    assert lines[0] == "t_ms,population,neuron,V_mV,w_pA"
    assert len(lines) == 11
    t, pop, idx, V, w = lines[1].split(",")
    assert (t, pop, idx) == ("0.100000", "N", "1")
    assert math.isfinite(float(V))
