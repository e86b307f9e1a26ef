"""Compiled vs pure-Python simulation kernel.

Runs the same networks through both backends, checks the spike records are
identical and reports wall time per simulated second::

    python3 benchmarks/bench_kernel.py [--duration MS] [--repeat N]
"""

import argparse
import time

import numpy as np

from neurorhythm import SimulationConfig, build_network, engine, run
from neurorhythm.primitives import get_preset

CASES = {
    "burst-neuron (1 neuron)": "burst-neuron",
    "half-center (8 neurons)": "cpg-escape-0.5hz",
    "oscillator ring (60 neurons)": "symmetric-1hz",
}


def timed(instance, config, backend, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        record, _ = run(instance, config, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, record


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--duration", type=float, default=2000.0, help="simulated ms per case")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if "compiled" not in engine.BACKENDS:
        print("compiled kernel not built; only the Python backend is available")
        return
    config = SimulationConfig(dt=0.1, duration=args.duration)
    print(f"{'case':32s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s} {'identical':>9s}")
    for title, name in CASES.items():
        instance = build_network(get_preset(name).build())
        t_py, rec_py = timed(instance, config, "python", args.repeat)
        t_c, rec_c = timed(instance, config, "compiled", args.repeat)
        same = np.array_equal(rec_py.t, rec_c.t) and np.array_equal(rec_py.neuron, rec_c.neuron)
        print(f"{title:32s} {t_py:10.3f} {t_c:11.3f} {t_py / t_c:7.1f}x {str(same):>9s}")


if __name__ == "__main__":
    main()
