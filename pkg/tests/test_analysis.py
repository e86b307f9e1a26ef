import json
import math

import numpy as np
import pytest

from neurorhythm.analysis import (
    Burst,
    OscillationMetrics,
    burst_statistics,
    detect_bursts,
    oscillation_metrics,
    partition_spikes,
    phase_bursts,
    phase_portrait,
    population_rate,
)
from neurorhythm.engine import SpikeRecord
from neurorhythm.errors import AnalysisError, ConfigError


def make_record(events, labels=None, sizes=None, duration=None):
    events = sorted(events)
    text = "t_ms,population,neuron\n" + "".join(f"{t:.6f},{p},{i}\n" for t, p, i in events)
    rec = SpikeRecord.from_csv(text, labels=labels, sizes=sizes)
    if duration is not None:
        from dataclasses import replace

        rec = replace(rec, duration=duration)
    return rec


def burst(t0, label, n=4, isi=10.0):
    return [(t0 + k * isi, label, k % 2) for k in range(n)]


# P1 onsets 100, 1100, 2120, 3100, 4090; P2 300 ms and P3 650 ms after P1
P1_ONSETS = [100.0, 1100.0, 2120.0, 3100.0, 4090.0]


def three_phase_record():
    ev = []
    for t in P1_ONSETS:
        ev += burst(t, "P1_E") + burst(t + 300.0, "P2_E") + burst(t + 650.0, "P3_E")
    return make_record(ev, labels=["P1_E", "P2_E", "P3_E"], sizes=[2, 2, 2], duration=5000.0)


def test_hand_computed_metrics():
    m = oscillation_metrics(three_phase_record(), ["P1_E", "P2_E", "P3_E"])
    # periods 1000, 1020, 980, 990: median 995, mean 997.5, squared deviations sum to 875
    assert m.period == pytest.approx(995.0)
    assert m.freq == pytest.approx(1000.0 / 995.0)
    assert m.jitter_std == pytest.approx(math.sqrt(875.0 / 3.0))
    assert m.offsets == pytest.approx((300.0, 650.0))
    assert m.n_cycles == 4  # the last P1 burst opens no complete cycle
    assert m.n_excluded == 0 and m.n_unordered == 0
    assert m.cycle_onsets["P1_E"] == P1_ONSETS[:4]


def test_missing_phase_excludes_cycle():
    ev = []
    for k, t in enumerate(P1_ONSETS):
        ev += burst(t, "P1_E") + burst(t + 300.0, "P2_E")
        if k != 1:
            ev += burst(t + 650.0, "P3_E")
    m = oscillation_metrics(make_record(ev), ["P1_E", "P2_E", "P3_E"])
    assert m.n_excluded == 1 and m.n_cycles == 3


def test_unordered_cycle_counted():
    ev = []
    for t in P1_ONSETS:
        ev += burst(t, "P1_E") + burst(t + 650.0, "P2_E") + burst(t + 300.0, "P3_E")
    m = oscillation_metrics(make_record(ev), ["P1_E", "P2_E", "P3_E"])
    assert m.n_unordered == 4


def test_insufficient_cycles():
    rec = make_record(burst(100.0, "P1_E"))
    with pytest.raises(AnalysisError, match="insufficient cycles"):
        oscillation_metrics(rec, ["P1_E"])


def test_t_min_drops_straddling_burst():
    ev = burst(990.0, "P1_E", n=5) + burst(2000.0, "P1_E") + burst(3000.0, "P1_E") + burst(4000.0, "P1_E")
    rec = make_record(ev)
    onsets = [b.t_start for b in phase_bursts(rec, "P1_E", 100.0, 3, t_min=1000.0)]
    assert onsets == [2000.0, 3000.0, 4000.0]
    m = oscillation_metrics(rec, ["P1_E"], t_min=1000.0)
    assert m.jitter_std == 0.0 and m.freq == pytest.approx(1.0)


def test_detect_bursts_and_rejects():
    t = [0, 10, 20, 200, 210, 500, 505, 510, 515]
    groups, rejected = partition_spikes(t, max_isi=50.0, min_spikes=3)
    assert [g.tolist() for g in groups] == [[0, 10, 20], [500, 505, 510, 515]]
    assert rejected.tolist() == [200, 210]
    bursts = detect_bursts(t, 50.0, 3)
    assert bursts == [Burst(0.0, 20.0, 3), Burst(500.0, 515.0, 4)]
    stats = burst_statistics(bursts)
    assert stats == {"n_bursts": 2, "duration": 17.5, "interval": 480.0}
    assert burst_statistics([])["n_bursts"] == 0


@pytest.mark.parametrize("max_isi,min_spikes", [(0.0, 3), (10.0, 1)])
def test_burst_parameters_validated(max_isi, min_spikes):
    with pytest.raises(ConfigError):
        partition_spikes([1.0, 2.0], max_isi, min_spikes)


def test_population_rate_hand_computed():
    ev = [(1.0, "A", 0), (2.0, "A", 1), (12.0, "A", 0)]
    rec = make_record(ev, sizes=[4], duration=20.0)
    r = population_rate(rec, "A", bin=10.0)
    # 2 spikes / (4 neurons * 10 ms) = 50 Hz; 1 spike -> 25 Hz
    np.testing.assert_allclose(r.rate, [50.0, 25.0])
    np.testing.assert_allclose(r.t, [5.0, 15.0])
    # away from the edges smoothing only redistributes mass
    inner = make_record([(t + 10.0, p, i) for t, p, i in ev], sizes=[4], duration=40.0)
    smooth = population_rate(inner, "A", bin=1.0, smooth_width=4.0)
    assert smooth.rate.sum() == pytest.approx(smooth.raw.sum())
    assert smooth.rate.max() < smooth.raw.max()


def test_population_rate_validation():
    rec = make_record([(1.0, "A", 0)])
    with pytest.raises(ConfigError):
        population_rate(rec, "A", bin=0.0)
    with pytest.raises(ConfigError):
        population_rate(rec, "A", bin=1.0, smooth_width=-1.0)


def test_rate_csv():
    rec = make_record([(1.0, "A", 0)], sizes=[1], duration=2.0)
    assert population_rate(rec, "A", 1.0).to_csv().splitlines() == ["t_ms,rate_hz", "0.500000,0.0", "1.500000,1000.0"]


def _loop_record(scale2=1.0):
    ev = []
    for c in range(3):
        base = 1000.0 * c
        s = 1.0 if c < 2 else scale2
        for k in range(int(20 * s)):
            ev.append((base + 100.0 + 5.0 * k, "P1_E", k % 4))
        for k in range(8):
            ev.append((base + 250.0 + 10.0 * k, "P1_I", k % 2))
    return make_record(ev, labels=["P1_E", "P1_I"], sizes=[4, 2], duration=3000.0)


def test_phase_portrait_identical_cycles_score_zero():
    rec = _loop_record()
    rE = population_rate(rec, "P1_E", 1.0, 20.0)
    rI = population_rate(rec, "P1_I", 1.0, 20.0)
    pp = phase_portrait(rE, rI, [0.0, 1000.0, 2000.0])
    assert pp.score == pytest.approx(0.0, abs=1e-12)
    assert pp.diameter > 0
    assert pp.loops[0].shape == (200, 2)
    assert pp.to_csv().startswith("cycle,point,rate_E_hz,rate_I_hz\n1,0,")


def test_phase_portrait_distinguishes_cycles():
    rec = _loop_record(scale2=0.5)
    rE = population_rate(rec, "P1_E", 1.0, 20.0)
    rI = population_rate(rec, "P1_I", 1.0, 20.0)
    assert phase_portrait(rE, rI, [1000.0, 2000.0, 3000.0]).score > 0.01


def test_phase_portrait_errors():
    rec = _loop_record()
    rE = population_rate(rec, "P1_E", 1.0)
    with pytest.raises(AnalysisError):
        phase_portrait(rE, population_rate(rec, "P1_I", 2.0), [0.0, 1000.0, 2000.0])
    with pytest.raises(AnalysisError):
        phase_portrait(rE, rE, [0.0, 2000.0, 1000.0])


def test_metrics_json_round_trip():
    m = oscillation_metrics(three_phase_record(), ["P1_E", "P2_E", "P3_E"])
    d = json.loads(m.to_json())
    assert OscillationMetrics.from_dict(d) == m
