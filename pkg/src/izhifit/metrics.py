"""Trace comparison and spike-train statistics.

Times are in ms throughout. Histograms carry their own bin geometry so they
can be written out without the train they came from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import SpikeTrain, VoltageTrace


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    start: float
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def edges(self) -> np.ndarray:
        return self.start + self.bin_width * np.arange(len(self.counts) + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.start + self.bin_width * (np.arange(len(self.counts)) + 0.5)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return (self.bin_width == other.bin_width and self.start == other.start
                and np.array_equal(self.counts, other.counts))

    __hash__ = None


def _n_samples(span: float, dt: float) -> int:
    return int(math.floor(span / dt + 1e-9)) + 1


def resample(trace: VoltageTrace, target_dt: float, start: float | None = None,
             stop: float | None = None) -> VoltageTrace:
    """Linearly interpolate ``trace`` onto a grid of spacing ``target_dt``.

    The grid starts at ``start`` (default: trace start) and does not extend
    past ``stop`` or the end of the trace.
    """
    if target_dt <= 0:
        raise ValueError("target_dt must be positive")
    if len(trace) == 0:
        raise ValueError("cannot resample an empty trace")
    lo = trace.t0 if start is None else max(start, trace.t0)
    hi = trace.t_end if stop is None else min(stop, trace.t_end)
    if hi < lo:
        raise ValueError(f"no overlap: requested [{start}, {stop}], trace spans "
                         f"[{trace.t0}, {trace.t_end}]")
    if lo == trace.t0 and target_dt == trace.dt:
        n = _n_samples(hi - lo, target_dt)
        return VoltageTrace(lo, target_dt, trace.samples[:n])
    t_new = lo + target_dt * np.arange(_n_samples(hi - lo, target_dt))
    return VoltageTrace(lo, target_dt, np.interp(t_new, trace.times, trace.samples))


def align(a: VoltageTrace, b: VoltageTrace) -> tuple[VoltageTrace, VoltageTrace]:
    """Bring two traces onto the coarser of their grids over their common span."""
    dt = max(a.dt, b.dt)
    lo, hi = max(a.t0, b.t0), min(a.t_end, b.t_end)
    if hi < lo:
        raise ValueError("traces do not overlap in time")
    ra, rb = resample(a, dt, lo, hi), resample(b, dt, lo, hi)
    n = min(len(ra), len(rb))
    return (VoltageTrace(ra.t0, dt, ra.samples[:n]), VoltageTrace(rb.t0, dt, rb.samples[:n]))


def trace_mse(a: VoltageTrace, b: VoltageTrace) -> float:
    """Mean squared sample difference (mV^2) of two traces on the same grid."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not math.isclose(a.dt, b.dt, rel_tol=1e-12):
        raise ValueError(f"sample period mismatch: {a.dt} vs {b.dt}")
    diff = a.samples - b.samples
    return float(np.mean(diff * diff))


def spikes_from_trace(trace: VoltageTrace, threshold: float = 0.0) -> SpikeTrain:
    """One spike per maximal run of samples at or above ``threshold``, timed at onset."""
    above = trace.samples >= threshold
    onsets = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    if above.size and above[0]:
        onsets = np.concatenate([[0], onsets])
    duration = trace.t_end
    return SpikeTrain(trace.t0 + trace.dt * onsets, max(duration, 0.0))


def isi_histogram(train: SpikeTrain, bin_width: float) -> Histogram:
    """Histogram of successive inter-spike intervals, bins starting at 0 ms."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    isis = np.diff(train.times)
    if isis.size == 0:
        return Histogram(bin_width, 0.0, np.zeros(0, dtype=np.int64))
    idx = np.floor(isis / bin_width).astype(np.int64)
    return Histogram(bin_width, 0.0, np.bincount(idx, minlength=idx.max() + 1))


def correlogram(a: SpikeTrain, b: SpikeTrain, bin_width: float, window: float,
                auto: bool | None = None) -> Histogram:
    """Histogram of lags ``t_b - t_a`` with ``|lag| <= window``.

    Bins are centred on integer multiples of ``bin_width``, so lag 0 sits in the
    middle bin. A lag exactly on a bin boundary goes to the bin farther from
    zero, which keeps auto-correlograms mirror-symmetric. With ``auto``
    (default: ``a is b`` or equal trains) self-pairs are dropped.
    """
    if bin_width <= 0 or window <= 0:
        raise ValueError("bin_width and window must be positive")
    if auto is None:
        auto = a is b or a == b
    half = int(math.floor(window / bin_width + 1e-9))
    n_bins = 2 * half + 1
    ta, tb = a.times, b.times
    # search a slightly wider range, then cut on the lag itself: ta + window
    # rounds differently from tb - ta and would break mirror symmetry
    slack = 1e-9 * (1.0 + window)
    lo = np.searchsorted(tb, ta - window - slack, side="left")
    hi = np.searchsorted(tb, ta + window + slack, side="right")
    counts = np.zeros(n_bins, dtype=np.int64)
    for i in range(len(ta)):
        lags = tb[lo[i]:hi[i]] - ta[i]
        if auto:
            lags = np.delete(lags, i - lo[i]) if lo[i] <= i < hi[i] else lags
        lags = lags[np.abs(lags) <= window]
        idx = (np.sign(lags) * np.floor(np.abs(lags) / bin_width + 0.5)).astype(np.int64) + half
        idx = idx[(idx >= 0) & (idx < n_bins)]
        counts += np.bincount(idx, minlength=n_bins)
    return Histogram(bin_width, -(half + 0.5) * bin_width, counts)


def firing_rate_histogram(train: SpikeTrain, bin_width: float) -> Histogram:
    """Spike counts per consecutive bin over ``[0, duration]``.

    Divide ``counts`` by ``bin_width`` for a rate; a spike at exactly
    ``duration`` falls in the last bin.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    n_bins = max(1, int(math.ceil(train.duration / bin_width - 1e-9)))
    idx = np.minimum(np.floor(train.times / bin_width).astype(np.int64), n_bins - 1)
    return Histogram(bin_width, 0.0, np.bincount(idx, minlength=n_bins))


def spike_time_deltas(a: SpikeTrain, b: SpikeTrain) -> np.ndarray | None:
    """Pairwise ``b - a`` spike-time differences, or ``None`` if counts differ."""
    if len(a) != len(b):
        return None
    return b.times - a.times
