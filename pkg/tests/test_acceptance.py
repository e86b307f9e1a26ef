"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest or directly with ``python3 tests/test_acceptance.py``.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from neurorhythm.analysis import burst_statistics, detect_bursts, oscillation_metrics, phase_portrait, population_rate
from neurorhythm.cli import execute, load_config, main
from neurorhythm.engine import SimulationConfig, run_trials, simulate
from neurorhythm.network import NetworkSpec, PopulationSpec
from neurorhythm.neuron import NeuronParams
from neurorhythm.primitives import PHASES, get_preset

HERE = Path(__file__).resolve().parent


def demo(name, **overrides):
    return execute(load_config(f"demo/{name}", **overrides))


def symmetric(cv, noise_rate):
    return get_preset("symmetric-1hz").build(mismatch_cv=cv, noise_rate=noise_rate)


# -- criteria ------------------------------------------------------------------

def c1_burst_neuron():
    t0 = time.perf_counter()
    res = demo("burst-neuron")
    elapsed = time.perf_counter() - t0
    cfg = res.config.analysis
    bursts = [b for b in detect_bursts(res.record.times("P1_E"), cfg.max_isi, cfg.min_spikes) if b.t_start >= cfg.warmup]
    stats = burst_statistics(bursts)
    dur, ibi = stats["duration"], stats["interval"]
    ok = (stats["n_bursts"] >= 10 and 375.0 <= dur <= 625.0 and abs(ibi - dur) <= 0.25 * dur and elapsed <= 30.0)
    return ok, f"{stats['n_bursts']} bursts, duration {dur:.1f} ms, interval {ibi:.1f} ms, {elapsed:.1f} s"


SWEEP = "370:8,400:10,430:14,470:20,500:28,530:40,565:56,600:80"


def c2_cpg_range(tmp):
    t0 = time.perf_counter()
    code = main(["sweep", "demo/cpg-escape", "--param", "network.params.drive", "--param", "network.params.b",
                 "--values", SWEEP, "--workers", "4", "--out", str(tmp)])
    elapsed = time.perf_counter() - t0
    lines = (Path(tmp) / "sweep.csv").read_text().splitlines()[1:]
    freqs = [float(line.split(",")[2]) if line.split(",")[2] else math.nan for line in lines]
    monotone = all(b > a for a, b in zip(freqs, freqs[1:]))
    ok = code == 0 and monotone and min(freqs) <= 0.5 and max(freqs) >= 3.0 and elapsed <= 300.0
    return ok, f"freqs {', '.join(f'{f:.2f}' for f in freqs)} Hz, monotone {monotone}, {elapsed:.1f} s"


def c3_three_phase_cpg():
    res = demo("three-phase-cpg")
    osc = res.analysis.metrics["oscillation"]
    span = res.config.simulation.duration - res.config.analysis.warmup
    ok = (abs(osc["freq"] - 1.0) <= 0.2 and osc["n_unordered"] == 0 and osc["n_excluded"] == 0
          and span >= 10000.0 and osc["n_cycles"] >= 8)
    return ok, f"freq {osc['freq']:.3f} Hz, {osc['n_cycles']} cycles, unordered {osc['n_unordered']} over {span / 1000:.0f} s"


def c4_three_phase_oscillator():
    res = demo("three-phase-oscillator")
    spec = res.config.network
    osc = res.analysis.metrics["oscillation"]
    frac = osc["offset_fractions"]
    ok = (len(spec.populations) == 6 and spec.n_neurons == 60 and abs(osc["freq"] - 1.0) <= 0.2
          and abs(frac[0] - 1 / 3) <= 0.1 and abs(frac[1] - 2 / 3) <= 0.1)
    return ok, f"{spec.n_neurons} neurons, freq {osc['freq']:.3f} Hz, offsets {frac[0]:.3f} T, {frac[1]:.3f} T"


def c5_jitter():
    record, _ = simulate(symmetric(0.0, 0.0), SimulationConfig(duration=20000.0))
    clean = oscillation_metrics(record, list(PHASES), t_min=5000.0)
    res = demo("three-phase-oscillator")
    cal = res.analysis.metrics["oscillation"]
    pop = res.config.network.populations[0]
    ok = (clean.jitter_std <= 2 * 0.1 and 1.0 <= cal["jitter_std"] <= 5.0 and cal["n_cycles"] >= 30
          and abs(cal["freq"] - 1.0) <= 0.2)
    return ok, (f"clean jitter {clean.jitter_std:.3f} ms; calibrated (cv {res.config.network.mismatch_cv:g}, "
                f"noise {pop.noise_rate:g} Hz x {pop.noise_weight:g} pA) jitter "
                f"{cal['jitter_std']:.2f} ms over {cal['n_cycles']} cycles at {cal['freq']:.3f} Hz")


def c6_cardiac():
    res = demo("cardiac-pacing")
    s = res.analysis.metrics["schedule"]
    freq = res.analysis.metrics["oscillation"]["freq"]
    short, long_ = s["median_gaps"]["LA-RA"], s["median_gaps"]["V-next RA"]
    ok = 25.0 <= short <= 30.0 and 800.0 <= long_ <= 900.0 and s["n_cycles"] >= 8 and abs(freq - 1.0) <= 0.2
    return ok, f"LA-RA {short:.1f} ms, V to next RA {long_:.1f} ms, {s['n_cycles']} cycles at {freq:.3f} Hz"


def _portrait_score(spec, warmup=5000.0):
    record, _ = simulate(spec, SimulationConfig(duration=12000.0))
    osc = oscillation_metrics(record, list(PHASES), t_min=warmup)
    onsets = osc.cycle_onsets["P1_E"][:3]
    rE = population_rate(record, "P1_E", 1.0, 20.0)
    rI = population_rate(record, "P1_I", 1.0, 20.0)
    return phase_portrait(rE, rI, onsets).score


def c7_portrait():
    clean = _portrait_score(symmetric(0.0, 0.0))
    noisy = demo("three-phase-oscillator").analysis.metrics["portrait"]["score"]
    ok = clean < 0.01 and clean < noisy < 0.1
    return ok, f"score {clean:.4f} without mismatch or noise, {noisy:.4f} for the calibrated demo"


def _single(p, drive, dt, duration, trace=False):
    spec = NetworkSpec([PopulationSpec("N", 1, p, I_const=drive)], mismatch_cv=0.0)
    cfg = SimulationConfig(dt=dt, duration=duration, trace_neurons=[("N", 0)] if trace else [])
    return simulate(spec, cfg)


def c8_oracle():
    cases = [(NeuronParams(), 500.0), (NeuronParams(), 300.0), (NeuronParams(a=2.0, b=60.0), 500.0)]
    errs, counts = [], []
    for p, drive in cases:
        fine_rec, fine = _single(p, drive, 0.001, 1000.0, trace=True)
        coarse_rec, coarse = _single(p, drive, 0.1, 1000.0, trace=True)
        n = int(round(min(fine_rec.t[0], coarse_rec.t[0]) / 0.1)) - 1  # up to the first spike
        ref = fine.V[99::100, 0][:n]  # fine samples on the coarse grid
        errs.append(float(np.max(np.abs(coarse.V[:n, 0] - ref)) / np.max(np.abs(ref))))
        counts.append((len(coarse_rec), len(fine_rec)))
    ok = max(errs) < 0.01 and all(abs(a - b) <= 1 for a, b in counts)
    return ok, ("L-inf error to first spike " + ", ".join(f"{e:.3%}" for e in errs)
                + "; spikes in 1 s " + ", ".join(f"{a} vs {b}" for a, b in counts))


def c9_determinism():
    spec = get_preset("symmetric-1hz").build()
    cfg = SimulationConfig(duration=3000.0, trial_seed=7)
    a, _ = simulate(spec, cfg)
    b, _ = simulate(spec, cfg)
    serial = run_trials(spec, cfg, 4, seed_base=3, workers=1)
    parallel = run_trials(spec, cfg, 4, seed_base=3, workers=4)
    same = [x.to_csv() for x in serial] == [x.to_csv() for x in parallel]
    ok = a.to_csv() == b.to_csv() and len(a) > 0 and same
    return ok, f"{len(a)} spikes byte-identical; 4 trials serial == parallel: {same}"


def c10_properties():
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(HERE / "test_properties.py")],
                          capture_output=True, text=True)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    return proc.returncode == 0, tail


def perf_contract():
    spec = get_preset("symmetric-1hz").build()
    t0 = time.perf_counter()
    simulate(spec, SimulationConfig(duration=10000.0))
    elapsed = time.perf_counter() - t0
    return elapsed < 10.0, f"60 neurons, 10 s simulated in {elapsed:.2f} s"


CRITERIA = {
    "C1 bursting neuron": c1_burst_neuron,
    "C2 CPG frequency range": c2_cpg_range,
    "C3 three-phase CPG": c3_three_phase_cpg,
    "C4 three-phase oscillator": c4_three_phase_oscillator,
    "C5 jitter": c5_jitter,
    "C6 cardiac delays": c6_cardiac,
    "C7 phase portrait": c7_portrait,
    "C8 numerical oracle": c8_oracle,
    "C9 determinism": c9_determinism,
    "C10 property suites": c10_properties,
    "performance contract": perf_contract,
}


def line(name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"


@pytest.mark.parametrize("name", list(CRITERIA))
def test_criterion(name, capsys, tmp_path):
    fn = CRITERIA[name]
    ok, detail = fn(tmp_path) if name.startswith("C2") else fn()
    with capsys.disabled():
        print("\n" + line(name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in CRITERIA.items():
        with tempfile.TemporaryDirectory() as tmp:
            ok, detail = fn(tmp) if name.startswith("C2") else fn()
        failed += not ok
        print(line(name, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
