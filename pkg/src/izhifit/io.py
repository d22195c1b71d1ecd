"""CSV / JSON readers and writers for traces, spike trains and histograms.

All writers go through :func:`atomic_write` so a failed run never leaves a
half-written file behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .metrics import Histogram
from .model import SpikeTrain, VoltageTrace

FORMAT_VERSION = 1


def atomic_write(path: str | Path, data: str | bytes) -> None:
    """Write ``data`` to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        if isinstance(data, bytes):
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
        else:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def trace_to_csv(trace: VoltageTrace) -> str:
    return _csv(["time_ms", "v_mV"], zip(trace.times, trace.samples))


def trace_to_json(trace: VoltageTrace, meta: dict | None = None) -> str:
    return json.dumps({
        "kind": "voltage_trace",
        "version": FORMAT_VERSION,
        "t0": trace.t0,
        "dt": trace.dt,
        "duration": trace.t_end - trace.t0,
        "samples": [float(x) for x in trace.samples],
        "meta": meta or {},
    }) + "\n"


def train_to_csv(train: SpikeTrain) -> str:
    return _csv(["spike_time_ms"], ([t] for t in train.times))


def train_to_json(train: SpikeTrain, meta: dict | None = None) -> str:
    return json.dumps({
        "kind": "spike_train",
        "version": FORMAT_VERSION,
        "duration": train.duration,
        "times": [float(t) for t in train.times],
        "meta": meta or {},
    }) + "\n"


def histogram_to_csv(hist: Histogram) -> str:
    return _csv(["bin_start_ms", "count"], zip(hist.edges[:-1], (int(c) for c in hist.counts)))


def histogram_to_json(hist: Histogram, meta: dict | None = None) -> str:
    return json.dumps({
        "kind": "histogram",
        "version": FORMAT_VERSION,
        "bin_width": hist.bin_width,
        "start": hist.start,
        "counts": [int(c) for c in hist.counts],
        "meta": meta or {},
    }) + "\n"


def _read_csv_columns(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    return header, data.reshape(-1, len(header))


def read_trace(path: str | Path) -> VoltageTrace:
    """Load a trace from CSV (``time_ms,v_mV``) or the JSON envelope."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        if doc.get("kind") != "voltage_trace":
            raise ValueError(f"{path}: not a voltage_trace document")
        return VoltageTrace(float(doc["t0"]), float(doc["dt"]), np.asarray(doc["samples"], float))
    header, data = _read_csv_columns(path)
    if header[:2] != ["time_ms", "v_mV"]:
        raise ValueError(f"{path}: expected columns time_ms,v_mV, got {header}")
    t, v = data[:, 0], data[:, 1]
    if len(t) < 2:
        raise ValueError(f"{path}: need at least two samples")
    steps = np.diff(t)
    dt = float(steps.mean())
    if not np.allclose(steps, dt, rtol=1e-6, atol=1e-9):
        raise ValueError(f"{path}: samples are not uniformly spaced")
    return VoltageTrace(float(t[0]), dt, v)


def read_train(path: str | Path, duration: float | None = None) -> SpikeTrain:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        if doc.get("kind") != "spike_train":
            raise ValueError(f"{path}: not a spike_train document")
        return SpikeTrain(np.asarray(doc["times"], float), float(doc["duration"]))
    header, data = _read_csv_columns(path)
    if header[:1] != ["spike_time_ms"]:
        raise ValueError(f"{path}: expected column spike_time_ms, got {header}")
    times = data[:, 0]
    if duration is None:
        duration = float(times.max()) if times.size else 0.0
    return SpikeTrain(times, duration)


def read_histogram(path: str | Path) -> Histogram:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        return Histogram(float(doc["bin_width"]), float(doc["start"]), doc["counts"])
    header, data = _read_csv_columns(path)
    if header != ["bin_start_ms", "count"]:
        raise ValueError(f"{path}: expected columns bin_start_ms,count")
    starts = data[:, 0]
    width = float(starts[1] - starts[0]) if len(starts) > 1 else 1.0
    return Histogram(width, float(starts[0]) if len(starts) else 0.0, data[:, 1].astype(int))
