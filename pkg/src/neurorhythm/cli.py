"""Command-line front end.

Subcommands::

    neurorhythm run <config.toml | demo/NAME>
    neurorhythm sweep <config> --param KEY [--param KEY2 ...] --values LIST
    neurorhythm analyze <spikes.csv> [--config <config.toml>]
    neurorhythm demo <NAME>

Global flags ``--seed``, ``--out`` and ``--dt`` may appear before or after the
subcommand. On failure a single line ``error: <ErrorClass>: <message>`` goes
to stderr, the exit status is nonzero and nothing is written.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (
    burst_statistics,
    oscillation_metrics,
    phase_bursts,
    phase_portrait,
    population_rate,
)
from .engine import BACKEND, SimulationConfig, SpikeRecord, StateTrace, simulate
from .errors import AnalysisError, ConfigError, FormatError, NeuroRhythmError, SimulationError
from .network import NetworkSpec, spec_from_dict, spec_to_dict
from .primitives import PRESETS, cardiac_schedule, get_preset

EXIT_CODES = {ConfigError: 2, FormatError: 2, SimulationError: 3, AnalysisError: 4}

DEMOS = ("burst-neuron", "three-phase-cpg", "three-phase-oscillator", "cardiac-pacing")


# --------------------------------------------------------------------------
# Experiment config
# --------------------------------------------------------------------------

_SECTIONS = {"name", "network", "simulation", "analysis", "outputs"}
_NETWORK_KEYS = {"preset", "params", "file", "spec"}
_SIM_KEYS = {"dt", "duration", "trial_seed", "trace"}
_ANALYSIS_KEYS = {
    "enabled", "phases", "max_isi", "min_spikes", "warmup",
    "rate_bin", "rate_smooth", "portrait", "schedule", "schedule_mapping",
}
_OUTPUT_KEYS = {"dir", "spikes", "metrics", "rates", "portrait", "schedule", "trace"}


def _strict(table: Any, allowed: set, where: str) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")
    return table


def _typed(table: dict, key: str, kind, where: str, default=None):
    value = table.get(key, default)
    if value is None:
        return None
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(f"[{where}] {key} must be of type {kind.__name__}, got {value!r}")
    return value


@dataclass(frozen=True)
class AnalysisConfig:
    enabled: bool = True
    phases: tuple = ()
    max_isi: float = 100.0
    min_spikes: int = 3
    warmup: float = 0.0
    rate_bin: float = 5.0
    rate_smooth: float = 50.0
    portrait: bool = True
    schedule: bool = False
    schedule_mapping: tuple = (("P1", "RA"), ("P2", "LA"), ("P3", "V"))


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    spikes: bool = True
    metrics: bool = True
    rates: bool = False
    portrait: bool = True
    schedule: bool = True
    trace: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment. ``raw`` is the normalised source table."""

    name: str
    network: NetworkSpec
    simulation: SimulationConfig
    analysis: AnalysisConfig
    outputs: OutputConfig
    raw: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Self-contained form with the network inlined; reruns reproduce the experiment."""
        d = copy.deepcopy(self.raw)
        d["network"] = {"spec": spec_to_dict(self.network)}
        d.setdefault("simulation", {}).update(
            dt=self.simulation.dt, duration=self.simulation.duration, trial_seed=self.simulation.trial_seed
        )
        a = self.analysis
        d["analysis"] = {
            "enabled": a.enabled, "phases": list(a.phases), "max_isi": a.max_isi,
            "min_spikes": a.min_spikes, "warmup": a.warmup, "rate_bin": a.rate_bin,
            "rate_smooth": a.rate_smooth, "portrait": a.portrait, "schedule": a.schedule,
            "schedule_mapping": dict(a.schedule_mapping),
        }
        return d

    def digest(self) -> str:
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _build_network(net: dict, base: Optional[Path]) -> tuple[NetworkSpec, Optional[Any]]:
    _strict(net, _NETWORK_KEYS, "network")
    sources = [k for k in ("preset", "file", "spec") if k in net]
    if len(sources) != 1:
        raise ConfigError("[network] needs exactly one of preset, file or spec")
    if "params" in net and "preset" not in net:
        raise ConfigError("[network] params only apply to a preset")
    if "preset" in net:
        preset = get_preset(_typed(net, "preset", str, "network"))
        params = net.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("[network.params] must be a table")
        return preset.build(**params), preset
    if "file" in net:
        path = Path(_typed(net, "file", str, "network"))
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            data = tomllib.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read network file {str(path)!r}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {str(path)!r}: {exc}") from None
        return spec_from_dict(data), None
    return spec_from_dict(net["spec"]), None


def parse_config(data: dict, base: Optional[Path] = None, seed: Optional[int] = None,
                 dt: Optional[float] = None, out: Optional[str] = None) -> ExperimentConfig:
    """Validate a config table. Raises :class:`ConfigError` on any problem.

    ``seed`` replaces both the network seed (device instance) and the
    trial seed (noise); ``dt`` and ``out`` override their config values.
    """
    data = copy.deepcopy(data)
    _strict(data, _SECTIONS, "top level")
    if "network" not in data:
        raise ConfigError("missing [network] section")
    name = _typed(data, "name", str, "top level", "experiment")
    spec, preset = _build_network(data["network"], base)

    sim = _strict(data.get("simulation", {}), _SIM_KEYS, "simulation")
    trace = sim.get("trace", [])
    if not isinstance(trace, list) or not all(
        isinstance(x, list) and len(x) == 2 and isinstance(x[0], str) and isinstance(x[1], int) for x in trace
    ):
        raise ConfigError('[simulation] trace must be a list of ["population", index] pairs')
    trial_seed = _typed(sim, "trial_seed", int, "simulation", 0)
    if seed is not None:
        spec = spec.replace(seed=seed)
        trial_seed = seed
    sim_cfg = SimulationConfig(
        dt=dt if dt is not None else _typed(sim, "dt", float, "simulation", 0.1),
        duration=_typed(sim, "duration", float, "simulation", preset.duration if preset else 1000.0),
        trace_neurons=tuple((p, i) for p, i in trace),
        trial_seed=trial_seed,
    )
    for label, index in sim_cfg.trace_neurons:
        if not 0 <= index < spec.population(label).n:
            raise ConfigError(f"trace neuron ({label!r}, {index}) is out of range")

    an = _strict(data.get("analysis", {}), _ANALYSIS_KEYS, "analysis")
    default_phases = list(preset.phases) if preset else sorted(
        lab for lab in spec.labels if lab.startswith("P") and lab.endswith("_E")
    ) or spec.labels[:1]
    phases = an.get("phases", default_phases)
    if not isinstance(phases, list) or not phases or not all(isinstance(p, str) for p in phases):
        raise ConfigError("[analysis] phases must be a non-empty list of population labels")
    for p in phases:
        spec.population(p)
    mapping = an.get("schedule_mapping", dict(AnalysisConfig.schedule_mapping))
    if not isinstance(mapping, dict) or not all(isinstance(v, str) for v in mapping.values()):
        raise ConfigError("[analysis] schedule_mapping must map phase labels to channel names")
    analysis = AnalysisConfig(
        enabled=_typed(an, "enabled", bool, "analysis", True),
        phases=tuple(phases),
        max_isi=float(_typed(an, "max_isi", float, "analysis", preset.max_isi if preset else 100.0)),
        min_spikes=_typed(an, "min_spikes", int, "analysis", preset.min_spikes if preset else 3),
        warmup=float(_typed(an, "warmup", float, "analysis", preset.warmup if preset else 0.0)),
        rate_bin=float(_typed(an, "rate_bin", float, "analysis", 5.0)),
        rate_smooth=float(_typed(an, "rate_smooth", float, "analysis", 50.0)),
        portrait=_typed(an, "portrait", bool, "analysis", True),
        schedule=_typed(an, "schedule", bool, "analysis", False),
        schedule_mapping=tuple(mapping.items()),
    )
    if not analysis.max_isi > 0 or analysis.min_spikes < 2 or analysis.warmup < 0 or not analysis.rate_bin > 0:
        raise ConfigError("[analysis] needs max_isi > 0, min_spikes >= 2, warmup >= 0 and rate_bin > 0")
    if analysis.warmup >= sim_cfg.duration:
        raise ConfigError("[analysis] warmup must be shorter than the simulation")

    o = _strict(data.get("outputs", {}), _OUTPUT_KEYS, "outputs")
    outputs = OutputConfig(**{k: _typed(o, k, str if k == "dir" else bool, "outputs", getattr(OutputConfig, k))
                              for k in _OUTPUT_KEYS})
    if out is not None:
        outputs = replace(outputs, dir=out)
    return ExperimentConfig(name, spec, sim_cfg, analysis, outputs, raw=data)


def _demo_text(name: str) -> Optional[str]:
    res = resources.files("neurorhythm").joinpath("demos", f"{name}.toml")
    return res.read_text() if res.is_file() else None


def read_config_table(ref: str) -> tuple[dict, Optional[Path]]:
    """Load a config from a path, ``demo/NAME`` or a bare demo or preset name."""
    path = Path(ref)
    if path.is_file():
        text, base = path.read_text(), path.parent
    else:
        name = ref[len("demo/"):] if ref.startswith("demo/") else ref
        text, base = _demo_text(name), None
        if text is None:
            if name in PRESETS:
                return {"name": name, "network": {"preset": name}}, None
            raise ConfigError(
                f"no config file {ref!r} and no demo or preset of that name "
                f"(demos: {', '.join(DEMOS)}; presets: {', '.join(sorted(PRESETS))})"
            )
    try:
        return tomllib.loads(text), base
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {ref!r}: {exc}") from None


def load_config(ref: str, **overrides) -> ExperimentConfig:
    data, base = read_config_table(ref)
    return parse_config(data, base, **overrides)


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class AnalysisResult:
    metrics: dict
    files: dict  # file name -> text


def analyze_record(record: SpikeRecord, cfg: AnalysisConfig, duration: float) -> AnalysisResult:
    """The analysis stage shared by ``run`` and ``analyze``."""
    record = replace(record, duration=float(duration))
    if not cfg.phases or not len(record):
        raise AnalysisError("insufficient cycles: the record holds no spikes")
    missing = [p for p in cfg.phases if p not in record.labels]
    if missing:
        raise AnalysisError(f"insufficient cycles: no spikes from phase population(s) {missing}")
    osc = oscillation_metrics(record, cfg.phases, cfg.max_isi, cfg.min_spikes, t_min=cfg.warmup)
    metrics: dict = {"n_spikes": len(record), "oscillation": osc.to_dict()}
    metrics["oscillation"]["offset_fractions"] = [o / osc.period for o in osc.offsets]
    metrics["bursts"] = {
        lab: burst_statistics(phase_bursts(record, lab, cfg.max_isi, cfg.min_spikes, cfg.warmup))
        for lab in cfg.phases
    }
    files = {}

    rates = {}
    for lab in record.labels:
        rates[lab] = population_rate(record, lab, cfg.rate_bin, cfg.rate_smooth, t_stop=duration)
    if rates:
        header = "t_ms," + ",".join(f"{lab}_hz" for lab in rates)
        cols = np.column_stack([next(iter(rates.values())).t] + [r.rate for r in rates.values()])
        files["rates.csv"] = header + "\n" + "".join(",".join(repr(float(v)) for v in row) + "\n" for row in cols)

    first = cfg.phases[0]
    partner = first[:-2] + "_I" if first.endswith("_E") else None
    onsets = [t for t in osc.cycle_onsets[first] if t >= cfg.warmup]
    if cfg.portrait and partner in record.labels and len(onsets) >= 3:
        pp = phase_portrait(rates[first], rates[partner], onsets[:3])
        metrics["portrait"] = {"score": pp.score, "diameter": pp.diameter, "cycle_bounds": onsets[:3],
                               "populations": [first, partner]}
        files["portrait.csv"] = pp.to_csv()

    if cfg.schedule:
        sched = cardiac_schedule(record, dict(cfg.schedule_mapping), cfg.max_isi, cfg.min_spikes, cfg.warmup)
        metrics["schedule"] = sched.summary()
        files["schedule.csv"] = sched.to_csv()
    return AnalysisResult(metrics, files)


@dataclass
class RunResult:
    config: ExperimentConfig
    record: SpikeRecord
    trace: Optional[StateTrace]
    analysis: Optional[AnalysisResult]

    def files(self) -> dict:
        out = {}
        o = self.config.outputs
        if o.spikes:
            out["spikes.csv"] = self.record.to_csv()
        if self.trace is not None and o.trace:
            out["trace.csv"] = self.trace.to_csv()
        if self.analysis is not None:
            if o.metrics:
                out["metrics.json"] = dump_json(self.analysis.metrics)
            for name, text in self.analysis.files.items():
                stem = name.split(".")[0]
                if getattr(o, stem):
                    out[name] = text
        return out


def execute(cfg: ExperimentConfig) -> RunResult:
    record, trace = simulate(cfg.network, cfg.simulation)
    analysis = analyze_record(record, cfg.analysis, cfg.simulation.duration) if cfg.analysis.enabled else None
    return RunResult(cfg, record, trace, analysis)


def manifest(cfg: Optional[ExperimentConfig], command: list, files: dict, extra: Optional[dict] = None) -> dict:
    doc = {
        "tool": "neurorhythm",
        "version": __version__,
        "backend": BACKEND,
        "command": command,
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
    }
    if cfg is not None:
        doc.update(
            name=cfg.name,
            config_sha256=cfg.digest(),
            seed=cfg.network.seed,
            trial_seed=cfg.simulation.trial_seed,
            config=cfg.resolved(),
        )
    doc.update(extra or {})
    return doc


def write_outputs(directory, files: dict) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        target = out / name
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", newline="") as fh:
            fh.write(text)


def _with_manifest(cfg, command, files, extra=None) -> dict:
    files = dict(files)
    files["manifest.json"] = dump_json(manifest(cfg, command, files, extra))
    if cfg is not None:
        files["config.resolved.toml"] = tomli_w.dumps(_clean(cfg.resolved()))
    return files


# --------------------------------------------------------------------------
# Sweep
# --------------------------------------------------------------------------


def _parse_value(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        value = float(token)
    except ValueError:
        raise ConfigError(f"sweep value {token!r} is not a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"sweep value {token!r} is not finite")
    return value


def parse_values(text: str, n_params: int) -> list[tuple]:
    rows = []
    for item in text.split(","):
        if not item.strip():
            continue
        parts = item.split(":")
        if len(parts) != n_params:
            raise ConfigError(f"sweep value {item!r} has {len(parts)} field(s), expected {n_params}")
        rows.append(tuple(_parse_value(p) for p in parts))
    if not rows:
        raise ConfigError("--values is empty")
    return rows


def _set_path(data: dict, key: str, value) -> None:
    """Assign ``value`` at dotted ``key``; the target must be an existing numeric field."""
    parts = key.split(".")
    node = data
    for i, part in enumerate(parts[:-1]):
        node = _child(node, part, ".".join(parts[: i + 1]), key)
    last = parts[-1]
    current = None
    exists = False
    if isinstance(node, list) and last.isdigit() and int(last) < len(node):
        current, exists = node[int(last)], True
        last = int(last)
    elif isinstance(node, dict) and last in node:
        current, exists = node[last], True
    if exists and (isinstance(current, bool) or not isinstance(current, (int, float))):
        raise ConfigError(f"sweep parameter {key!r} is not numeric (current value {current!r})")
    if not exists and not _preset_param(data, parts):
        raise ConfigError(f"sweep parameter {key!r} does not resolve to a numeric config field")
    node[last] = value


def _child(node, part: str, prefix: str, key: str):
    if isinstance(node, list) and part.isdigit() and int(part) < len(node):
        return node[int(part)]
    if isinstance(node, dict):
        if part not in node and prefix == "network.params":
            node[part] = {}
        if part in node:
            return node[part]
        if prefix in ("simulation", "analysis"):
            node[part] = {}
            return node[part]
    raise ConfigError(f"sweep parameter {key!r} does not resolve ({prefix!r} not found)")


_NUMERIC_SECTION_KEYS = {
    "simulation": {"dt", "duration", "trial_seed"},
    "analysis": {"max_isi", "min_spikes", "warmup", "rate_bin", "rate_smooth"},
}


def _preset_param(data: dict, parts: list) -> bool:
    if len(parts) == 3 and parts[:2] == ["network", "params"]:
        name = data.get("network", {}).get("preset")
        return name in PRESETS and parts[2] in PRESETS[name].parameters
    return len(parts) == 2 and parts[1] in _NUMERIC_SECTION_KEYS.get(parts[0], ())


def _sweep_row(args):
    data, base, params, values, overrides = args
    row = dict(zip(params, values))
    try:
        for key, value in row.items():
            _set_path(data, key, value)
        cfg = parse_config(data, base, **overrides)
        res = execute(replace(cfg, analysis=replace(cfg.analysis, enabled=True)))
        osc = res.analysis.metrics["oscillation"]
        row.update(freq_hz=osc["freq"], jitter_std_ms=osc["jitter_std"], n_cycles=osc["n_cycles"], status="ok")
        return row, res.files(), cfg
    except AnalysisError:
        row.update(freq_hz=None, jitter_std_ms=None, n_cycles=0, status="no oscillation")
    except NeuroRhythmError as exc:
        row.update(freq_hz=None, jitter_std_ms=None, n_cycles=0, status=f"error: {type(exc).__name__}")
    return row, {}, None


def sweep_table(rows: list[dict], params: list) -> str:
    cols = list(params) + ["freq_hz", "jitter_std_ms", "n_cycles", "status"]
    lines = [",".join(cols)]
    for row in rows:
        cells = []
        for c in cols:
            v = row[c]
            cells.append("" if v is None else (repr(float(v)) if isinstance(v, float) else str(v)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _overrides(args) -> dict:
    return {"seed": args.seed, "dt": args.dt, "out": args.out}


def cmd_run(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    res = execute(cfg)
    files = _with_manifest(cfg, ["run", args.config], res.files())
    write_outputs(cfg.outputs.dir, files)
    _report(cfg, res.analysis.metrics if res.analysis else None)
    return 0


def cmd_demo(args) -> int:
    if args.name not in DEMOS and args.name not in PRESETS:
        raise ConfigError(f"unknown demo {args.name!r}; available: {', '.join(DEMOS)}")
    args.config = f"demo/{args.name}"
    return cmd_run(args)


def cmd_sweep(args) -> int:
    data, base = read_config_table(args.config)
    ov = _overrides(args)
    cfg0 = parse_config(data, base, **ov)
    params = list(args.param)
    rows = sorted(parse_values(args.values, len(params)))
    probe = copy.deepcopy(data)  # an unresolvable key is a config error, not a failed row
    for key, value in zip(params, rows[0]):
        _set_path(probe, key, value)
    jobs = [(copy.deepcopy(data), base, params, values, {**ov, "out": None}) for values in rows]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_row, jobs))
    else:
        results = [_sweep_row(job) for job in jobs]

    files = {}
    for k, (row, row_files, cfg) in enumerate(results):
        if cfg is not None:
            for name, text in _with_manifest(cfg, ["sweep-row", args.config], row_files).items():
                files[f"row_{k:03d}/{name}"] = text
    table = sweep_table([r for r, _, _ in results], params)
    files["sweep.csv"] = table
    files = _with_manifest(None, ["sweep", args.config, *sum((["--param", p] for p in params), []),
                                  "--values", args.values], files,
                           {"name": cfg0.name, "config_sha256": cfg0.digest(), "config": cfg0.resolved(),
                            "params": params})
    write_outputs(cfg0.outputs.dir, files)
    sys.stdout.write(table)
    return 0


def cmd_analyze(args) -> int:
    if args.config:
        cfg = load_config(args.config, **_overrides(args))
        spec = cfg.network
        record = SpikeRecord.read_csv(args.spikes, labels=spec.labels, sizes=[p.n for p in spec.populations]) \
            if Path(args.spikes).is_file() else _missing(args.spikes)
        acfg, duration, out = cfg.analysis, cfg.simulation.duration, cfg.outputs
    else:
        if not Path(args.spikes).is_file():
            _missing(args.spikes)
        record = SpikeRecord.read_csv(args.spikes)
        phases = tuple(sorted(lab for lab in record.labels if lab.startswith("P") and lab.endswith("_E")))
        acfg = AnalysisConfig(phases=phases or tuple(record.labels[:1]))
        duration = record.duration
        out = OutputConfig(dir=args.out or "out")
        cfg = None
    res = analyze_record(record, acfg, duration)
    files = {"metrics.json": dump_json(res.metrics)} if out.metrics else {}
    files.update({k: v for k, v in res.files.items() if getattr(out, k.split(".")[0])})
    files = _with_manifest(cfg, ["analyze", args.spikes], files)
    if cfg is None:
        files.pop("config.resolved.toml", None)
    write_outputs(out.dir, files)
    _report(cfg, res.metrics)
    return 0


def _missing(path):
    raise FormatError(f"cannot read spike file {path!r}")


def _report(cfg, metrics) -> None:
    name = cfg.name if cfg else "analysis"
    where = cfg.outputs.dir if cfg else ""
    if metrics is None:
        print(f"{name}: simulated, analysis disabled -> {where}")
        return
    osc = metrics["oscillation"]
    offs = ", ".join(f"{o:.1f}" for o in osc["offsets"])
    print(f"{name}: freq {osc['freq']:.3f} Hz, jitter {osc['jitter_std']:.2f} ms, "
          f"{osc['n_cycles']} cycles, offsets [{offs}] ms" + (f" -> {where}" if where else ""))


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=argparse.SUPPRESS, help="network and trial seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--dt", type=float, default=argparse.SUPPRESS, help="integration step, ms")

    parser = argparse.ArgumentParser(prog="neurorhythm", parents=[common], description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate and analyse one experiment")
    p.add_argument("config", help="config TOML, demo/NAME or a preset name")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="run a config over a list of parameter values")
    p.add_argument("config")
    p.add_argument("--param", action="append", required=True,
                   help="dotted config key, e.g. network.params.drive; repeat for zipped sweeps")
    p.add_argument("--values", required=True, help="comma list; a:b per entry when several --param are given")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", parents=[common], help="re-run the analysis on a stored spikes CSV")
    p.add_argument("spikes")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("demo", parents=[common], help=f"run a bundled demo ({', '.join(DEMOS)})")
    p.add_argument("name")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("seed", "out", "dt"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        return args.func(args)
    except NeuroRhythmError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        for cls, code in EXIT_CODES.items():
            if isinstance(exc, cls):
                return code
        return 1
    except OSError as exc:
        print(f"error: OSError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
