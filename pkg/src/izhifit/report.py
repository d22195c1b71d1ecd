"""Target vs. original vs. improved model comparison (data, JSON and SVG)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog, PatternId, default_catalog
from .io import _csv
from .metrics import resample, spikes_from_trace, trace_mse
from .model import SimConfig, SpikeTrain, VoltageTrace, simulate

LABELS = ("target", "original", "improved")
# target solid red, original dashed black, improved dash-dot blue
STYLES = {
    "target": ("#d62728", None),
    "original": ("#000000", "6,4"),
    "improved": ("#1f4fd6", "8,3,2,3"),
}


@dataclass
class CompareReport:
    pattern: PatternId
    traces: dict[str, VoltageTrace]
    trains: dict[str, SpikeTrain]
    mse: dict[str, float]
    spike_deltas: dict[str, np.ndarray]

    @property
    def dt(self) -> float:
        return self.traces["target"].dt

    def to_csv(self) -> str:
        t = self.traces["target"].times
        cols = [self.traces[k].samples for k in LABELS]
        return _csv(["time_ms", "target_mV", "original_mV", "improved_mV"], zip(t, *cols))

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern.value,
            "dt": self.dt,
            "n_samples": len(self.traces["target"]),
            "mse": self.mse,
            "spike_counts": {k: len(v) for k, v in self.trains.items()},
            "spike_times": {k: [float(t) for t in v.times] for k, v in self.trains.items()},
            "spike_deltas": {k: [float(x) for x in v] for k, v in self.spike_deltas.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_svg(self, width: int = 800, height: int = 320) -> str:
        return svg_line_plot(
            self.traces["target"].times,
            {k: self.traces[k].samples for k in LABELS},
            title=f"{self.pattern.value}: target vs original vs improved",
            width=width, height=height,
        )


def _nearest_deltas(ref: SpikeTrain, other: SpikeTrain) -> np.ndarray:
    """For each spike in ``ref``, signed offset to the nearest spike of ``other``."""
    if len(other) == 0 or len(ref) == 0:
        return np.zeros(0)
    last = len(other) - 1
    idx = np.searchsorted(other.times, ref.times)
    left = other.times[np.clip(idx - 1, 0, last)] - ref.times
    right = other.times[np.clip(idx, 0, last)] - ref.times
    return np.where(np.abs(left) <= np.abs(right), left, right)


def compare_report(target: VoltageTrace, pattern, catalog: Catalog | None = None,
                   dt: float | None = None, spike_threshold: float = 0.0) -> CompareReport:
    """Simulate the pattern's original and optimized parameters and compare with ``target``.

    All three traces are put on the coarser of the target and simulation grids
    over their common span.
    """
    cat = catalog or default_catalog()
    pid = PatternId(pattern)
    spec = cat[pid]
    if spec.original is None:
        covered = ", ".join(p.value for p in cat.covered())
        raise ValueError(f"pattern {pid.value!r} has no parameter set; choose one of: {covered}")
    sim_dt = dt if dt is not None else min(0.25, max(target.dt, 1e-3))
    sim = SimConfig(dt=sim_dt, duration=spec.protocol.duration)
    orig, _ = simulate(spec.original, spec.protocol, sim)
    impr, _ = simulate(spec.optimized, spec.protocol, sim)
    grid_dt = max(target.dt, sim_dt)
    lo = max(target.t0, 0.0)
    hi = min(target.t_end, orig.t_end)
    if hi < lo:
        raise ValueError("target does not overlap the simulated protocol window")
    traces = {k: resample(tr, grid_dt, lo, hi) for k, tr in
              (("target", target), ("original", orig), ("improved", impr))}
    n = min(len(t) for t in traces.values())
    traces = {k: VoltageTrace(t.t0, t.dt, t.samples[:n]) for k, t in traces.items()}
    trains = {k: spikes_from_trace(t, spike_threshold) for k, t in traces.items()}
    mse = {
        "target_vs_original": trace_mse(traces["target"], traces["original"]),
        "target_vs_improved": trace_mse(traces["target"], traces["improved"]),
        "original_vs_improved": trace_mse(traces["original"], traces["improved"]),
    }
    deltas = {
        "original": _nearest_deltas(trains["target"], trains["original"]),
        "improved": _nearest_deltas(trains["target"], trains["improved"]),
    }
    return CompareReport(pid, traces, trains, mse, deltas)


def svg_line_plot(x: np.ndarray, series: dict[str, np.ndarray], title: str = "",
                  width: int = 800, height: int = 320, max_points: int = 4000) -> str:
    """Minimal standalone SVG with one polyline per series."""
    pad_l, pad_r, pad_t, pad_b = 55, 15, 30, 40
    x = np.asarray(x, dtype=float)
    step = max(1, int(np.ceil(len(x) / max_points)))
    xs = x[::step]
    ys_all = np.concatenate([np.asarray(v, float) for v in series.values()])
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = float(xs[0]), float(xs[-1]) if xs[-1] > xs[0] else float(xs[0]) + 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(v):
        return pad_l + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return pad_t + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
    ]
    for frac in np.linspace(0, 1, 5):
        yv = y_lo + frac * (y_hi - y_lo)
        out.append(f'<text x="{pad_l - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.0f}</text>')
        xv = x_lo + frac * (x_hi - x_lo)
        out.append(f'<text x="{px(xv):.1f}" y="{height - pad_b + 15}" text-anchor="middle">{xv:.0f}</text>')
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">time (ms)</text>')
    out.append(f'<text x="14" y="{pad_t + ph / 2:.1f}" transform="rotate(-90 14 {pad_t + ph / 2:.1f})" '
               'text-anchor="middle">v (mV)</text>')
    for i, (name, ys) in enumerate(series.items()):
        color, dash = STYLES.get(name, ("#444444", None))
        ys = np.asarray(ys, float)[::step]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash_attr} points="{pts}"/>')
        ly = pad_t + 14 + 14 * i
        out.append(f'<line x1="{pad_l + pw - 110}" y1="{ly - 4}" x2="{pad_l + pw - 85}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.5"{dash_attr}/>')
        out.append(f'<text x="{pad_l + pw - 80}" y="{ly}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
