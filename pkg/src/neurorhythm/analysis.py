"""Spike-record analysis: rates, bursts, oscillation metrics, phase portraits.

Conventions
-----------
* A burst is a maximal run of pooled population spikes whose consecutive
  gaps are ``<= max_isi``, kept only if it has ``>= min_spikes`` spikes.
* Cycle onsets are the starts of the first phase population's bursts.
  ``freq = 1000 / median(inter-onset interval)`` in Hz.
* ``jitter_std`` is the sample standard deviation (ddof = 1) of the
  inter-onset intervals of the first phase, i.e. a *period* jitter.
* Phase offsets are medians over complete cycles of
  ``onset(Pk) - onset(P1)``, with ``onset(Pk)`` the first burst of ``Pk``
  starting in ``[onset_n(P1), onset_{n+1}(P1))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import SpikeRecord
from .errors import AnalysisError, ConfigError

DEFAULT_MAX_ISI = 100.0  # ms
DEFAULT_MIN_SPIKES = 3


@dataclass(frozen=True)
class RateSeries:
    t: np.ndarray  # bin centres, ms
    rate: np.ndarray  # Hz per neuron, smoothed
    bin: float
    raw: np.ndarray  # unsmoothed rate
    n: int

    def to_csv(self) -> str:
        lines = ["t_ms,rate_hz"]
        lines += [f"{t:.6f},{r!r}" for t, r in zip(self.t.tolist(), self.rate.tolist())]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Burst:
    t_start: float
    t_end: float
    n_spikes: int

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class OscillationMetrics:
    freq: float  # Hz
    cycle_onsets: dict  # label -> onsets (ms) of that phase in each complete cycle
    offsets: tuple  # medians of onset(Pk) - onset(P1), k = 2.., ms
    jitter_std: float  # ms
    n_cycles: int  # complete cycles
    n_excluded: int = 0  # P1 cycles missing a later phase
    n_unordered: int = 0  # complete cycles whose onsets are not P1 < P2 < ...
    period: float = 0.0  # median inter-onset interval, ms

    def to_dict(self) -> dict:
        d = asdict(self)
        d["offsets"] = list(self.offsets)
        d["cycle_onsets"] = {k: list(v) for k, v in self.cycle_onsets.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "OscillationMetrics":
        d = dict(d)
        d["offsets"] = tuple(d["offsets"])
        return cls(**d)


def population_rate(
    record: SpikeRecord,
    pop: str,
    bin: float,
    smooth_width: float = 0.0,
    t_start: float = 0.0,
    t_stop: Optional[float] = None,
    n: Optional[int] = None,
) -> RateSeries:
    """Per-neuron population rate in Hz on a uniform grid.

    ``smooth_width`` is the full base width (ms) of a normalised triangular
    kernel; widths under two bins leave the series unsmoothed.
    """
    if not bin > 0:
        raise ConfigError(f"bin must be > 0, got {bin}")
    if not smooth_width >= 0:
        raise ConfigError(f"smooth_width must be >= 0, got {smooth_width}")
    times = record.times(pop)
    n = n or record.size_of(pop)
    if t_stop is None:
        t_stop = max(record.duration, float(times[-1]) if times.size else 0.0)
    n_bins = max(1, int(math.ceil((t_stop - t_start) / bin - 1e-9)))
    edges = t_start + bin * np.arange(n_bins + 1)
    counts, _ = np.histogram(times, bins=edges)
    raw = counts / (n * bin / 1000.0)

    half = int(round(smooth_width / (2.0 * bin)))
    if half >= 1:
        kernel = np.concatenate([np.arange(1, half + 1), np.arange(half + 1, 0, -1)]).astype(np.float64)
        kernel /= kernel.sum()
        rate = np.convolve(raw, kernel, mode="same")
    else:
        rate = raw.astype(np.float64)
    return RateSeries(t=edges[:-1] + bin / 2.0, rate=rate, bin=float(bin), raw=raw, n=int(n))


def partition_spikes(
    spike_times: Sequence[float], max_isi: float, min_spikes: int
) -> tuple[list[np.ndarray], np.ndarray]:
    """Split sorted spike times into burst groups and rejected spikes."""
    if not max_isi > 0:
        raise ConfigError(f"max_isi must be > 0, got {max_isi}")
    if min_spikes < 2:
        raise ConfigError(f"min_spikes must be >= 2, got {min_spikes}")
    t = np.sort(np.asarray(spike_times, dtype=np.float64))
    if t.size == 0:
        return [], t
    breaks = np.flatnonzero(np.diff(t) > max_isi) + 1
    groups = np.split(t, breaks)
    bursts = [g for g in groups if g.size >= min_spikes]
    rejected = [g for g in groups if g.size < min_spikes]
    return bursts, (np.concatenate(rejected) if rejected else np.zeros(0))


def detect_bursts(spike_times: Sequence[float], max_isi: float, min_spikes: int) -> list[Burst]:
    groups, _ = partition_spikes(spike_times, max_isi, min_spikes)
    return [Burst(float(g[0]), float(g[-1]), int(g.size)) for g in groups]


def burst_statistics(bursts: Sequence[Burst]) -> dict:
    """Median burst duration and median silent interval between bursts (ms)."""
    if not bursts:
        return {"n_bursts": 0, "duration": float("nan"), "interval": float("nan")}
    dur = [b.duration for b in bursts]
    gaps = [b2.t_start - b1.t_end for b1, b2 in zip(bursts, bursts[1:])]
    return {
        "n_bursts": len(bursts),
        "duration": float(np.median(dur)),
        "interval": float(np.median(gaps)) if gaps else float("nan"),
    }


def phase_bursts(
    record: SpikeRecord, label: str, max_isi: float, min_spikes: int, t_min: float = 0.0
) -> list[Burst]:
    """Bursts of one population that start at or after ``t_min``.

    Detection runs on the whole record, so a burst straddling ``t_min`` is
    dropped rather than clipped into a spurious late onset.
    """
    return [b for b in detect_bursts(record.times(label), max_isi, min_spikes) if b.t_start >= t_min]


def oscillation_metrics(
    record: SpikeRecord,
    phase_pops: Sequence[str],
    max_isi: float = DEFAULT_MAX_ISI,
    min_spikes: int = DEFAULT_MIN_SPIKES,
    t_min: float = 0.0,
) -> OscillationMetrics:
    """Frequency, phase offsets and period jitter of a multi-phase rhythm.

    ``t_min`` discards spikes before that time (start-up transient).
    Raises :class:`AnalysisError` with fewer than two first-phase bursts.
    """
    if len(phase_pops) < 1:
        raise ConfigError("need at least one phase population")
    onsets = [
        np.array([b.t_start for b in phase_bursts(record, lab, max_isi, min_spikes, t_min)])
        for lab in phase_pops
    ]
    p1 = onsets[0]
    if p1.size < 2:
        raise AnalysisError(
            f"insufficient cycles: {p1.size} burst(s) of {phase_pops[0]!r}, need at least 2"
        )
    periods = np.diff(p1)
    period = float(np.median(periods))
    jitter = float(np.std(periods, ddof=1)) if periods.size >= 2 else 0.0

    cycles = {lab: [] for lab in phase_pops}
    excluded = unordered = 0
    for start, stop in zip(p1[:-1], p1[1:]):
        found = [start]
        for ons in onsets[1:]:
            inside = ons[(ons >= start) & (ons < stop)]
            if inside.size == 0:
                break
            found.append(float(inside[0]))
        if len(found) < len(phase_pops):
            excluded += 1
            continue
        if any(b <= a for a, b in zip(found, found[1:])):
            unordered += 1
        for lab, t in zip(phase_pops, found):
            cycles[lab].append(float(t))

    n_cycles = len(cycles[phase_pops[0]])
    if n_cycles:
        base = np.array(cycles[phase_pops[0]])
        offsets = tuple(float(np.median(np.array(cycles[lab]) - base)) for lab in phase_pops[1:])
    else:
        offsets = tuple(float("nan") for _ in phase_pops[1:])
    return OscillationMetrics(
        freq=1000.0 / period,
        cycle_onsets=cycles,
        offsets=offsets,
        jitter_std=jitter,
        n_cycles=n_cycles,
        n_excluded=excluded,
        n_unordered=unordered,
        period=period,
    )


@dataclass(frozen=True)
class PhasePortrait:
    loops: tuple  # two (n_points, 2) arrays of (E-rate, I-rate)
    score: float  # mean pointwise distance / diameter
    diameter: float  # bounding-box diagonal of both loops, Hz

    def to_csv(self) -> str:
        lines = ["cycle,point,rate_E_hz,rate_I_hz"]
        for c, loop in enumerate(self.loops, start=1):
            lines += [f"{c},{k},{e!r},{i!r}" for k, (e, i) in enumerate(loop.tolist())]
        return "\n".join(lines) + "\n"


def phase_portrait(
    rateE: RateSeries, rateI: RateSeries, cycle_bounds: Sequence[float], n_points: int = 200
) -> PhasePortrait:
    """(E-rate, I-rate) loops of two adjacent cycles ``[t0, t1)`` and ``[t1, t2)``.

    Each cycle is resampled on ``n_points`` equally spaced phases so the two
    loops can be compared pointwise; the similarity score is their mean
    pointwise distance divided by the loops' common diameter.
    """
    if rateE.bin != rateI.bin or rateE.t.shape != rateI.t.shape or not np.array_equal(rateE.t, rateI.t):
        raise AnalysisError("E and I rate series must share the same binning")
    t0, t1, t2 = (float(x) for x in cycle_bounds)
    if not t0 < t1 < t2:
        raise AnalysisError(f"cycle bounds must be increasing, got {(t0, t1, t2)}")
    phase = np.linspace(0.0, 1.0, n_points, endpoint=False)
    loops = []
    for a, b in ((t0, t1), (t1, t2)):
        ts = a + (b - a) * phase
        loops.append(np.column_stack([np.interp(ts, rateE.t, rateE.rate), np.interp(ts, rateI.t, rateI.rate)]))
    both = np.vstack(loops)
    diameter = float(np.hypot(*(both.max(axis=0) - both.min(axis=0))))
    dist = float(np.mean(np.hypot(*(loops[0] - loops[1]).T)))
    score = dist / diameter if diameter > 0 else 0.0
    return PhasePortrait(loops=tuple(loops), score=score, diameter=diameter)
