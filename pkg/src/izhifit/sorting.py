"""Offline spike sorting for single-channel extracellular recordings.

Pipeline: band-pass filter -> amplitude-threshold detection -> trough-aligned
snippets -> PCA plus peak/valley features -> k-means -> per-unit ISI checks.

Spikes are assumed negative-going. Times are in ms, signal units are whatever
the recording carries (typically uV).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from .metrics import Histogram, correlogram
from .model import SpikeTrain

MAD_TO_SIGMA = 0.6745


@dataclass(frozen=True)
class RawRecording:
    sample_rate: float
    samples: np.ndarray = field(repr=False)
    region: str | None = None
    units: str = "uV"

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float).reshape(-1)
        object.__setattr__(self, "samples", x)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise ValueError("recording contains non-finite samples")

    @property
    def duration(self) -> float:
        """Length in ms."""
        return 1000.0 * len(self.samples) / self.sample_rate

    def ms_to_index(self, t_ms) -> np.ndarray:
        return np.rint(np.asarray(t_ms) * self.sample_rate / 1000.0).astype(np.int64)

    def index_to_ms(self, idx) -> np.ndarray:
        return np.asarray(idx, dtype=float) * 1000.0 / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "RawRecording":
        return RawRecording(self.sample_rate, samples, self.region, self.units)


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    align_index: int
    time: float


@dataclass(frozen=True)
class WaveformSet:
    """Equal-length snippets stacked row-wise, trough at ``align_index``."""

    snippets: np.ndarray
    times: np.ndarray
    align_index: int
    skipped: int = 0

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for row, t in zip(self.snippets, self.times):
            yield Waveform(row, self.align_index, float(t))


@dataclass(frozen=True)
class FeatureVector:
    pc1: float
    pc2: float
    pc3: float
    peak: float
    valley: float


@dataclass(frozen=True)
class PcaFeatures:
    features: np.ndarray           # (n, 5): pc1, pc2, pc3, peak, valley
    components: np.ndarray         # (n_components, snippet_len), orthonormal rows
    explained_variance: np.ndarray
    mean: np.ndarray

    def vectors(self) -> list[FeatureVector]:
        return [FeatureVector(*map(float, row)) for row in self.features]

    def reconstruct(self, projections: np.ndarray) -> np.ndarray:
        return projections @ self.components + self.mean


@dataclass(frozen=True)
class SortedUnit:
    unit_id: int
    train: SpikeTrain
    mean_waveform: np.ndarray | None
    isi_violation_rate: float
    valid: bool
    flags: tuple[str, ...] = ()


@dataclass
class SortResult:
    units: list[SortedUnit]
    empty_clusters: list[int]
    cross_correlograms: dict[tuple[int, int], Histogram]
    threshold: float | None = None
    skipped_events: int = 0

    def summary(self) -> dict:
        return {
            "threshold": self.threshold,
            "skipped_events": self.skipped_events,
            "empty_clusters": self.empty_clusters,
            "units": [
                {
                    "unit_id": u.unit_id,
                    "spike_count": len(u.train),
                    "isi_violation_rate": u.isi_violation_rate,
                    "valid": u.valid,
                    "flags": list(u.flags),
                    "mean_waveform": None if u.mean_waveform is None
                    else [float(x) for x in u.mean_waveform],
                }
                for u in self.units
            ],
        }


def bandpass(rec: RawRecording, low: float = 300.0, high: float = 10000.0,
             order: int = 2) -> RawRecording:
    """Zero-phase Butterworth band-pass (forward-backward second-order sections).

    ``order`` is per band edge, so the default yields a fourth-order band-pass
    whose magnitude response is squared by the forward-backward pass.
    """
    nyq = rec.sample_rate / 2.0
    if not 0.0 < low < high < nyq:
        raise ValueError(f"need 0 < low < high < {nyq} Hz, got ({low}, {high})")
    sos = signal.butter(order, [low, high], btype="bandpass", fs=rec.sample_rate, output="sos")
    if len(rec.samples) <= 3 * (2 * len(sos) + 1):
        raise ValueError("recording too short to filter")
    return rec.with_samples(signal.sosfiltfilt(sos, rec.samples))


def noise_sigma(x: np.ndarray) -> float:
    """Robust noise estimate, median(|x|) / 0.6745."""
    return float(np.median(np.abs(x)) / MAD_TO_SIGMA)


def detection_threshold(rec: RawRecording, k: float = 4.5) -> float:
    return -k * noise_sigma(rec.samples)


def detect(rec: RawRecording, threshold: float | None = None, k: float = 4.5,
           dead_time: float = 1.0) -> np.ndarray:
    """Event times (ms) of negative threshold crossings, one per excursion.

    ``threshold`` is a manual level in signal units (its sign is ignored;
    crossings go below ``-|threshold|``). Without it the level is
    ``-k * sigma`` with the MAD noise estimate. Each event is placed at the
    trough within ``dead_time`` ms of the crossing, and crossings within
    ``dead_time`` of an accepted event are merged into it.
    """
    x = rec.samples
    level = detection_threshold(rec, k) if threshold is None else -abs(threshold)
    below = x <= level
    onsets = np.flatnonzero(below[1:] & ~below[:-1]) + 1
    if below.size and below[0]:
        onsets = np.concatenate([[0], onsets])
    dead = max(1, int(round(dead_time * rec.sample_rate / 1000.0)))
    events = []
    last_onset = -dead - 1
    last_trough = -dead - 1
    for on in onsets:
        if on - last_onset < dead or on - last_trough < dead:
            continue
        stop = min(len(x), on + dead)
        trough = on + int(np.argmin(x[on:stop]))
        events.append(trough)
        last_onset, last_trough = on, trough
    return rec.index_to_ms(np.asarray(events, dtype=np.int64))


def extract_waveforms(rec: RawRecording, events, pre: float = 0.4, post: float = 1.0,
                      realign: float = 0.2) -> WaveformSet:
    """Cut ``pre``/``post`` ms around each event, aligned on the local trough.

    Events whose window would leave the recording are skipped and counted.
    """
    fs = rec.sample_rate
    n_pre = int(round(pre * fs / 1000.0))
    n_post = int(round(post * fs / 1000.0))
    n_re = int(round(realign * fs / 1000.0))
    x = rec.samples
    rows, times = [], []
    skipped = 0
    for idx in rec.ms_to_index(np.asarray(events, dtype=float)):
        lo_s, hi_s = max(0, idx - n_re), min(len(x), idx + n_re + 1)
        trough = lo_s + int(np.argmin(x[lo_s:hi_s])) if hi_s > lo_s else idx
        if trough - n_pre < 0 or trough + n_post >= len(x):
            skipped += 1
            continue
        rows.append(x[trough - n_pre: trough + n_post + 1])
        times.append(trough)
    snippets = np.array(rows, dtype=float).reshape(len(rows), n_pre + n_post + 1)
    return WaveformSet(snippets, rec.index_to_ms(np.asarray(times, dtype=np.int64)), n_pre, skipped)


def pca_features(waveforms: WaveformSet, n_components: int = 3) -> PcaFeatures:
    """Project mean-centred snippets on their principal components.

    ``components`` holds every right singular vector so the projection is
    invertible; ``features`` keeps the first three plus per-snippet peak and
    valley.
    """
    X = np.asarray(waveforms.snippets if isinstance(waveforms, WaveformSet) else waveforms,
                   dtype=float)
    if X.shape[0] < 4:
        raise ValueError(f"need at least 4 waveforms for PCA, got {X.shape[0]}")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    # deterministic sign: largest-magnitude loading positive
    signs = np.sign(vt[np.arange(len(vt)), np.argmax(np.abs(vt), axis=1)])
    signs[signs == 0] = 1.0
    vt = vt * signs[:, None]
    proj = Xc @ vt[:n_components].T
    if proj.shape[1] < n_components:
        proj = np.pad(proj, ((0, 0), (0, n_components - proj.shape[1])))
    feats = np.column_stack([proj[:, :3], X.max(axis=1), X.min(axis=1)])
    return PcaFeatures(feats, vt, s**2 / max(X.shape[0] - 1, 1), mean)


def cluster(features, k: int = 3, seed: int = 0, n_init: int = 20) -> np.ndarray:
    """k-means (k-means++ seeding, ``n_init`` restarts, lowest inertia kept)."""
    F = np.asarray(features.features if isinstance(features, PcaFeatures) else features,
                   dtype=float)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(F):
        raise ValueError(f"k={k} exceeds the number of feature vectors ({len(F)})")
    if k == 1:
        return np.zeros(len(F), dtype=np.int64)
    km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed)
    return km.fit_predict(F).astype(np.int64)


def isi_violation_rate(times: np.ndarray, refractory: float) -> float:
    isis = np.diff(np.asarray(times))
    return float(np.mean(isis < refractory)) if isis.size else 0.0


def validate_units(assignments, events, refractory: float = 1.0,
                   waveforms: WaveformSet | None = None, duration: float | None = None,
                   max_violation: float = 0.01, n_clusters: int | None = None,
                   ccg_bin: float = 1.0, ccg_window: float = 50.0) -> SortResult:
    """Split events by cluster label and check refractory compliance.

    A unit is flagged invalid when more than ``max_violation`` of its ISIs are
    shorter than ``refractory`` ms. Cross-correlograms between all unit pairs
    are returned for duplicate/drift inspection.
    """
    if refractory <= 0:
        raise ValueError("refractory must be positive")
    labels = np.asarray(assignments, dtype=np.int64)
    times = np.asarray(events, dtype=float)
    if labels.shape != times.shape:
        raise ValueError("assignments and events must have the same length")
    if duration is None:
        duration = float(times.max()) if times.size else 0.0
    n_clusters = n_clusters if n_clusters is not None else (int(labels.max()) + 1 if labels.size else 0)
    units, empty = [], []
    for lab in range(n_clusters):
        sel = labels == lab
        if not sel.any():
            empty.append(lab)
            continue
        t = np.sort(times[sel])
        t = t[np.concatenate([[True], np.diff(t) > 0])]
        rate = isi_violation_rate(t, refractory)
        flags = []
        if rate > max_violation:
            flags.append("refractory-violations")
        mean_wf = waveforms.snippets[sel].mean(axis=0) if waveforms is not None else None
        units.append(SortedUnit(lab, SpikeTrain(t, duration), mean_wf, rate,
                                rate <= max_violation, tuple(flags)))
    ccgs = {}
    for i, ua in enumerate(units):
        for ub in units[i + 1:]:
            ccgs[(ua.unit_id, ub.unit_id)] = correlogram(ua.train, ub.train, ccg_bin,
                                                         ccg_window, auto=False)
    return SortResult(units, empty, ccgs)


def sort_recording(rec: RawRecording, k: int = 3, seed: int = 0, low: float = 300.0,
                   high: float = 10000.0, threshold: float | None = None,
                   k_sigma: float = 4.5, refractory: float = 1.0,
                   prefiltered: bool = False) -> SortResult:
    """Run the whole chain on one recording."""
    filt = rec if prefiltered else bandpass(rec, low, high)
    level = detection_threshold(filt, k_sigma) if threshold is None else -abs(threshold)
    events = detect(filt, threshold=level)
    wfs = extract_waveforms(filt, events)
    if len(wfs) < max(4, k):
        raise ValueError(f"only {len(wfs)} usable spikes detected; cannot sort into {k} units")
    feats = pca_features(wfs)
    labels = cluster(feats, k=k, seed=seed)
    result = validate_units(labels, wfs.times, refractory, waveforms=wfs,
                            duration=rec.duration, n_clusters=k)
    result.threshold = level
    result.skipped_events = wfs.skipped
    return result


# --- file formats -----------------------------------------------------------

def read_recording(path: str | Path, sample_rate: float | None = None) -> RawRecording:
    """Load a flat binary (with ``<file>.json`` sidecar) or a CSV recording.

    Binary files are little-endian ``int16`` or ``float32`` as named by the
    sidecar ``dtype`` key. CSV files hold one sample per row (a second column,
    if present, is taken as the signal and the first as time in s).
    """
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    meta = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    fs = float(meta.get("sample_rate", sample_rate or 50000.0))
    if path.suffix.lower() == ".csv":
        data = np.loadtxt(path, delimiter=",", ndmin=2,
                          skiprows=1 if _has_header(path) else 0)
        x = data[:, -1]
    else:
        dtype = {"int16": "<i2", "float32": "<f4"}[meta.get("dtype", "float32")]
        x = np.fromfile(path, dtype=dtype).astype(float) * float(meta.get("scale", 1.0))
    return RawRecording(fs, x, meta.get("region"), meta.get("units", "uV"))


def _has_header(path: Path) -> bool:
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.strip().split(",")]
        return False
    except ValueError:
        return True


def write_recording(rec: RawRecording, path: str | Path, dtype: str = "float32") -> None:
    """Flat little-endian binary plus a ``<file>.json`` sidecar, both written atomically."""
    from .io import atomic_write

    path = Path(path)
    if dtype == "int16":
        scale = max(np.abs(rec.samples).max() / 32000.0, 1e-12)
        data = (rec.samples / scale).round().astype("<i2").tobytes()
    elif dtype == "float32":
        scale = 1.0
        data = rec.samples.astype("<f4").tobytes()
    else:
        raise ValueError("dtype must be int16 or float32")
    meta = {"sample_rate": rec.sample_rate, "units": rec.units, "region": rec.region,
            "dtype": dtype, "scale": scale}
    atomic_write(path, data)
    atomic_write(path.with_name(path.name + ".json"), json.dumps(meta, indent=2) + "\n")


def matched_accuracy(true_labels, pred_labels) -> float:
    """Fraction correct under the best one-to-one relabelling of ``pred_labels``."""
    t = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    tu, pu = np.unique(t), np.unique(p)
    conf = np.array([[np.sum((t == a) & (p == b)) for b in pu] for a in tu])
    r, c = linear_sum_assignment(-conf)
    return float(conf[r, c].sum() / max(len(t), 1)) if len(t) else math.nan
