"""Command-line front end: ``izhifit <command> [options]``.

Every command validates its inputs before writing anything, and all files go
through a write-then-rename so an error never leaves partial output.

Exit codes: 0 success, 2 validation error, 3 numerical divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import io as fio
from .bench import step_throughput
from .catalog import PatternId, Region, load_catalog, parameter_rows, region_matrix
from .ga import GaConfig, run_fit
from .metrics import isi_histogram, resample, spikes_from_trace
from .model import (IntegrationDivergence, NeuronParams, SimConfig, StimulusProtocol,
                    VoltageTrace, simulate)
from .patterns import ClassifierConfig, classify_run
from .report import compare_report
from .sorting import read_recording, sort_recording, write_recording
from .synth import noisy_target, synth_recording

CONFIG_VERSION = 1
CONFIG_SECTIONS = ("sim", "ga", "classifier", "sort")
SORT_KEYS = {"k", "low", "high", "threshold", "k_sigma", "refractory"}

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGENCE, EXIT_IO = 0, 2, 3, 4


class CliError(ValueError):
    pass


# --- configuration ----------------------------------------------------------

def load_config(path: str | None) -> dict:
    """Read and check a run-configuration JSON (see ``configs/``)."""
    if path is None:
        return {s: {} for s in CONFIG_SECTIONS}
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: invalid JSON ({exc})") from None
    if doc.get("version") != CONFIG_VERSION:
        raise CliError(f"{path}: config version must be {CONFIG_VERSION}")
    extra = set(doc) - set(CONFIG_SECTIONS) - {"version", "description", "catalog"}
    if extra:
        raise CliError(f"{path}: unknown config sections {sorted(extra)}")
    cfg = {s: dict(doc.get(s) or {}) for s in CONFIG_SECTIONS}
    cfg["catalog"] = doc.get("catalog")
    _check_keys("sim", cfg["sim"], {f.name for f in fields(SimConfig)})
    _check_keys("classifier", cfg["classifier"], {f.name for f in fields(ClassifierConfig)})
    _check_keys("sort", cfg["sort"], SORT_KEYS)
    GaConfig.from_dict(cfg["ga"])  # raises on bad fields
    return cfg


def _check_keys(section, data, allowed):
    extra = set(data) - allowed
    if extra:
        raise CliError(f"config section {section!r}: unknown keys {sorted(extra)}")


# --- helpers ----------------------------------------------------------------

class Outputs:
    """Collects rendered files and commits them only once everything succeeded."""

    def __init__(self, out_dir: str | None):
        self.dir = Path(out_dir or ".")
        self.files: dict[Path, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[self.dir / name] = text

    def commit(self) -> list[Path]:
        for path, text in self.files.items():
            fio.atomic_write(path, text)
        return list(self.files)


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _catalog(args, cfg):
    return load_catalog(cfg.get("catalog"))


def _sim_config(cfg, args, duration: float) -> SimConfig:
    data = {"duration": duration, **cfg["sim"]}
    if getattr(args, "dt", None) is not None:
        data["dt"] = args.dt
    if getattr(args, "duration", None) is not None:
        data["duration"] = args.duration
    return SimConfig(**data)


def _resolve_params(args, catalog) -> NeuronParams:
    if args.params is not None:
        return NeuronParams.from_sequence(args.params)
    if args.pattern is None:
        raise CliError("give --pattern or --params A B C D")
    spec = catalog[args.pattern]
    params = spec.optimized if args.set == "optimized" else spec.original
    if params is None:
        covered = ", ".join(p.value for p in catalog.covered())
        raise CliError(f"pattern {spec.id.value!r} has no parameter set; choose one of: {covered}")
    return params


def _resolve_protocol(args, catalog) -> StimulusProtocol:
    if args.protocol is not None:
        with open(args.protocol) as fh:
            return StimulusProtocol.from_dict(json.load(fh))
    if args.step is not None:
        amp, onset, duration = args.step
        return StimulusProtocol.steps([(onset, amp)], duration)
    if args.pattern is None:
        raise CliError("give a protocol (--protocol FILE, --step AMP ONSET DURATION or --pattern)")
    return catalog[args.pattern].protocol


def _pattern(name: str) -> PatternId:
    try:
        return PatternId(name)
    except ValueError:
        raise CliError(f"unknown pattern {name!r}; known: {', '.join(p.value for p in PatternId)}") \
            from None


def _load_trace_or_train(path: str, duration: float | None = None):
    p = Path(path)
    if p.suffix.lower() == ".json":
        kind = json.loads(p.read_text()).get("kind")
    else:
        with open(p) as fh:
            kind = "spike_train" if fh.readline().strip().startswith("spike_time_ms") else "voltage_trace"
    if kind == "spike_train":
        return None, fio.read_train(p, duration)
    trace = fio.read_trace(p)
    return trace, spikes_from_trace(trace)


# --- commands ---------------------------------------------------------------

def cmd_simulate(args, cfg) -> int:
    catalog = _catalog(args, cfg)
    params = _resolve_params(args, catalog)
    protocol = _resolve_protocol(args, catalog)
    sim = _sim_config(cfg, args, protocol.duration)
    trace, train = simulate(params, protocol, sim)
    out = Outputs(args.out)
    meta = {"params": params.to_dict(), "protocol": protocol.to_dict(), "dt": sim.dt}
    out.add(f"{args.prefix}trace.csv", fio.trace_to_csv(trace))
    out.add(f"{args.prefix}spikes.csv", fio.train_to_csv(train))
    if args.json:
        out.add(f"{args.prefix}trace.json", fio.trace_to_json(trace, meta))
        out.add(f"{args.prefix}spikes.json", fio.train_to_json(train, meta))
    out.commit()
    _say(args, f"{len(trace)} samples, {len(train)} spikes -> {out.dir}")
    return EXIT_OK


def cmd_catalog(args, cfg) -> int:
    catalog = _catalog(args, cfg)
    if args.action == "list":
        lines = ["pattern,has_params,BLA,HIP,descriptor"]
        for p in PatternId:
            spec = catalog[p]
            flags = ["+" if p in catalog.regions[r] else "-" for r in Region]
            lines.append(f"{p.value},{spec.original is not None},{flags[0]},{flags[1]},"
                         f"\"{spec.descriptor}\"")
        text = "\n".join(lines) + "\n"
    elif args.action == "params":
        text = fio._csv(["pattern", "set", "a", "b", "c", "d"], parameter_rows(catalog))
    elif args.action == "regions":
        matrix = region_matrix(catalog)
        lines = ["pattern," + ",".join(r.value for r in Region)]
        for p in PatternId:
            lines.append(p.value + "," + ",".join("+" if matrix[r][p] else "-" for r in Region))
        lines.append("possible_count," + ",".join(str(sum(matrix[r].values())) for r in Region))
        text = "\n".join(lines) + "\n"
    else:
        text = catalog.dumps()
    if args.out:
        ext = "json" if args.action == "dump" else "csv"
        out = Outputs(args.out)
        out.add(f"catalog_{args.action}.{ext}", text)
        out.commit()
    if not args.quiet or not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_classify(args, cfg) -> int:
    catalog = _catalog(args, cfg)
    ccfg = ClassifierConfig(**cfg["classifier"])
    if args.pattern is not None:
        protocol = catalog[_pattern(args.pattern)].protocol
    elif args.protocol is not None:
        with open(args.protocol) as fh:
            protocol = StimulusProtocol.from_dict(json.load(fh))
    else:
        raise CliError("classify needs the eliciting protocol (--protocol FILE or --pattern)")
    trace, train = _load_trace_or_train(args.input, protocol.duration)
    if trace is None:
        # spike train only: a flat placeholder trace keeps the feature code uniform
        dt = cfg["sim"].get("dt", 0.25)
        n = int(np.floor(protocol.duration / dt + 1e-9)) + 1
        trace = VoltageTrace(0.0, dt, np.full(n, -70.0))
    label, feats = classify_run(train, trace, protocol, ccfg)
    result = {"pattern": str(label), "features": feats.to_dict()}
    text = json.dumps(result, indent=2) + "\n"
    if args.out:
        out = Outputs(args.out)
        out.add("classification.json", text)
        out.commit()
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_fit(args, cfg) -> int:
    catalog = _catalog(args, cfg)
    target = fio.read_trace(args.target)
    pid = _pattern(args.pattern) if args.pattern else None
    if args.protocol is not None:
        with open(args.protocol) as fh:
            protocol = StimulusProtocol.from_dict(json.load(fh))
    elif pid is not None:
        protocol = catalog[pid].protocol
    else:
        raise CliError("fit needs the stimulus protocol (--protocol FILE or --pattern)")
    ga_data = dict(cfg["ga"])
    ga_data["seed"] = args.seed
    if args.generations is not None:
        ga_data["max_generations"] = args.generations
    if args.population is not None:
        ga_data["population_size"] = args.population
    ga = GaConfig.from_dict(ga_data)
    duration = min(protocol.duration, target.t_end)
    sim = _sim_config(cfg, args, duration)
    if target.t0 != 0.0 or not np.isclose(target.dt, sim.dt) or len(target) < sim.n_steps + 1:
        target = resample(target, sim.dt, 0.0, sim.n_steps * sim.dt)
    else:
        target = fio.VoltageTrace(0.0, sim.dt, target.samples[:sim.n_steps + 1])

    def progress(gen, best, mean):
        if not args.quiet and (gen == 1 or gen % 10 == 0):
            print(f"gen {gen:4d}  best {best:.6g}  mean {mean:.6g}", file=sys.stderr)

    result = run_fit(target, protocol, ga, sim, on_generation=progress)
    best_trace, best_train = simulate(result.best_params, protocol, sim)
    out = Outputs(args.out)
    doc = result.to_dict()
    doc["ga_config"] = ga.to_dict()
    doc["sim"] = asdict(sim)
    out.add("fit_result.json", json.dumps(doc, indent=2) + "\n")
    out.add("fit_history.csv", result.history_csv())
    out.add("fit_trace.csv", fio.trace_to_csv(best_trace))
    out.add("fit_spikes.csv", fio.train_to_csv(best_train))
    out.commit()
    p = result.best_params
    _say(args, f"best a={p.a:.6g} b={p.b:.6g} c={p.c:.6g} d={p.d:.6g} "
               f"mse={result.best.fitness:.6g} ({result.termination}, "
               f"{result.generations_run} generations)")
    return EXIT_OK


def cmd_sort(args, cfg) -> int:
    rec = read_recording(args.recording, args.sample_rate)
    opts = dict(cfg["sort"])
    if args.k is not None:
        opts["k"] = args.k
    result = sort_recording(rec, seed=args.seed, **opts)
    out = Outputs(args.out)
    summary = result.summary()
    summary["cross_correlograms"] = [
        {"units": list(key), "bin_width": h.bin_width, "start": h.start,
         "counts": [int(c) for c in h.counts]}
        for key, h in result.cross_correlograms.items()
    ]
    out.add("sort_summary.json", json.dumps(summary, indent=2) + "\n")
    for u in result.units:
        out.add(f"unit{u.unit_id}_spikes.csv", fio.train_to_csv(u.train))
        out.add(f"unit{u.unit_id}_isi.csv", fio.histogram_to_csv(isi_histogram(u.train, 1.0)))
    out.commit()
    for u in result.units:
        _say(args, f"unit {u.unit_id}: {len(u.train)} spikes, ISI violations "
                   f"{100 * u.isi_violation_rate:.2f}%, {'valid' if u.valid else 'INVALID'}"
                   + (f" [{', '.join(u.flags)}]" if u.flags else ""))
    return EXIT_OK


def cmd_compare(args, cfg) -> int:
    catalog = _catalog(args, cfg)
    pid = _pattern(args.pattern)
    target = fio.read_trace(args.target)
    report = compare_report(target, pid, catalog, dt=args.dt)
    out = Outputs(args.out)
    stem = f"compare_{pid.value}"
    out.add(f"{stem}.csv", report.to_csv())
    out.add(f"{stem}.json", report.to_json())
    if args.svg:
        out.add(f"{stem}.svg", report.to_svg())
    out.commit()
    m = report.mse
    _say(args, f"MSE target/original {m['target_vs_original']:.6g}  "
               f"target/improved {m['target_vs_improved']:.6g}")
    return EXIT_OK


def cmd_synth(args, cfg) -> int:
    out = Outputs(args.out)
    if args.kind == "recording":
        syn = synth_recording(duration_s=args.duration_s, sample_rate=args.sample_rate,
                              rates_hz=tuple(args.rates), snr=args.snr,
                              noise_sigma=args.noise_sigma, hum_amplitude=args.hum,
                              region=args.region, seed=args.seed)
        times, labels = syn.ground_truth()
        truth = fio._csv(["spike_time_ms", "unit"], zip(times, labels))
        path = out.dir / (args.name or "recording.f32")
        out.add("ground_truth.csv", truth)
        out.commit()
        write_recording(syn.recording, path)
        _say(args, f"{len(times)} spikes from {len(args.rates)} units -> {path}")
    else:
        catalog = _catalog(args, cfg)
        pid = _pattern(args.pattern)
        spec = catalog[pid]
        params = spec.optimized if args.set == "optimized" else spec.original
        if params is None:
            raise CliError(f"pattern {pid.value!r} has no parameter set")
        sim = _sim_config(cfg, args, spec.protocol.duration)
        trace, _ = simulate(params, spec.protocol, sim)
        target = noisy_target(trace, args.noise_mv, args.seed)
        out.add(args.name or f"target_{pid.value}.csv", fio.trace_to_csv(target))
        out.commit()
        _say(args, f"target for {pid.value} ({args.set} params, {args.noise_mv} mV noise)")
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    res = step_throughput(n_steps=args.steps, repeats=args.repeats)
    res["soft_threshold"] = 1e6
    res["target"] = 1e7
    text = json.dumps(res, indent=2) + "\n"
    if args.out:
        out = Outputs(args.out)
        out.add("bench.json", text)
        out.commit()
    _say(args, f"{res['steps_per_second']:.3g} steps/s "
               f"({res['n_steps']} steps in {res['seconds']:.3f} s)")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the flags with suppressed defaults so that a value
    # given before the command name is not overwritten
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, help="random seed (default 0)", **(kw or {"default": 0}))
    p.add_argument("--config", help="run-configuration JSON", **kw)
    p.add_argument("--out", help="output directory (default: current directory)", **kw)
    p.add_argument("--quiet", action="store_true", help="suppress progress output", **kw)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="izhifit", description=__doc__.splitlines()[0],
                                     parents=[_global_flags(False)])
    common = _global_flags(True)
    sub = parser.add_subparsers(dest="command", required=True)
    patterns = [p.value for p in PatternId]

    def add_param_source(p):
        p.add_argument("--pattern", choices=patterns, metavar="PATTERN",
                       help="catalog pattern id: " + ", ".join(patterns))
        p.add_argument("--set", choices=["original", "optimized"], default="original")

    p = sub.add_parser("simulate", parents=[common], help="simulate one neuron")
    add_param_source(p)
    p.add_argument("--params", type=float, nargs=4, metavar=("A", "B", "C", "D"))
    p.add_argument("--protocol", help="StimulusProtocol JSON")
    p.add_argument("--step", type=float, nargs=3, metavar=("AMP", "ONSET", "DURATION"))
    p.add_argument("--dt", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--json", action="store_true", help="also write JSON envelopes")
    p.add_argument("--prefix", default="", help="file name prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("catalog", parents=[common], help="list or dump the pattern catalog")
    p.add_argument("action", choices=["list", "params", "regions", "dump"], nargs="?",
                   default="list")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("classify", parents=[common], help="name the firing pattern of a run")
    p.add_argument("input", help="trace (time_ms,v_mV) or spike train (spike_time_ms) CSV/JSON")
    p.add_argument("--pattern", help="use this catalog pattern's protocol")
    p.add_argument("--protocol", help="StimulusProtocol JSON")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fit", parents=[common], help="fit a, b, c, d to a target trace")
    p.add_argument("target", help="target trace CSV/JSON")
    p.add_argument("--pattern", help="use this catalog pattern's protocol")
    p.add_argument("--protocol", help="StimulusProtocol JSON")
    p.add_argument("--generations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sort", parents=[common], help="spike-sort a raw recording")
    p.add_argument("recording", help="binary (with .json sidecar) or CSV recording")
    p.add_argument("--k", type=int, help="clusters (default 3)")
    p.add_argument("--sample-rate", type=float, help="Hz, when there is no sidecar")
    p.set_defaults(func=cmd_sort)

    p = sub.add_parser("compare", parents=[common],
                       help="target vs original vs improved model comparison")
    p.add_argument("target", help="target trace CSV/JSON")
    p.add_argument("--pattern", required=True)
    p.add_argument("--dt", type=float)
    p.add_argument("--svg", action="store_true", help="also write an SVG line plot")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic data")
    p.add_argument("kind", choices=["recording", "target"])
    p.add_argument("--name", help="output file name")
    p.add_argument("--duration-s", type=float, default=60.0)
    p.add_argument("--sample-rate", type=float, default=50000.0)
    p.add_argument("--rates", type=float, nargs="+", default=[5.0, 5.0, 5.0])
    p.add_argument("--snr", type=float, default=5.0)
    p.add_argument("--noise-sigma", type=float, default=10.0)
    p.add_argument("--hum", type=float, default=0.0, help="50 Hz hum amplitude")
    p.add_argument("--region", choices=[r.value for r in Region])
    add_param_source(p)
    p.add_argument("--noise-mv", type=float, default=0.5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", parents=[common], help="measure single-neuron step throughput")
    p.add_argument("--steps", type=int, default=10_000_000)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except IntegrationDivergence as exc:
        print(f"error: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
