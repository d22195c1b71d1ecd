"""Synthetic data: extracellular recordings with known units, and noisy voltage targets.

Recordings are the sum of unit templates placed at Poisson spike times (with
a hard refractory period), white Gaussian background noise and an optional
50 Hz hum. ``snr`` is trough depth over the standard deviation of the raw
background noise, before any acquisition filtering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SpikeTrain, VoltageTrace
from .sorting import RawRecording


def template_shapes(sample_rate: float = 50000.0, width_ms: float = 3.0) -> np.ndarray:
    """Three distinct negative-going spike shapes, each with trough depth 1.

    Returns an array ``(3, n)``; the trough of every template sits at the
    centre sample.
    """
    n = int(round(width_ms * sample_rate / 1000.0)) | 1
    t = (np.arange(n) - n // 2) * 1000.0 / sample_rate  # ms, 0 at centre

    def g(mu, sigma):
        return np.exp(-0.5 * ((t - mu) / sigma) ** 2)

    shapes = np.array([
        -g(0.0, 0.10) + 0.25 * g(0.40, 0.25),                     # narrow, small AHP
        -g(0.0, 0.22) + 0.65 * g(0.65, 0.35),                     # broad, large AHP
        0.55 * g(-0.30, 0.12) - g(0.0, 0.14) + 0.15 * g(0.5, 0.3),  # pre-peak biphasic
    ])
    # put each trough exactly at the centre with depth 1
    for k in range(len(shapes)):
        shapes[k] = np.roll(shapes[k], n // 2 - int(np.argmin(shapes[k])))
        shapes[k] /= -shapes[k].min()
    return shapes


def poisson_train(rate_hz: float, duration_ms: float, rng: np.random.Generator,
                  refractory_ms: float = 2.0, start_ms: float = 0.0) -> np.ndarray:
    """Homogeneous Poisson spike times with a dead time after each spike."""
    if rate_hz <= 0:
        return np.zeros(0)
    mean_isi = 1000.0 / rate_hz
    times = []
    t = start_ms
    while True:
        t += refractory_ms + rng.exponential(max(mean_isi - refractory_ms, 1e-9))
        if t >= duration_ms:
            break
        times.append(t)
    return np.asarray(times)


def inhomogeneous_poisson(rate_fn, duration_ms: float, max_rate_hz: float,
                          rng: np.random.Generator) -> np.ndarray:
    """Thinning sampler; ``rate_fn`` maps ms to Hz and must stay below ``max_rate_hz``."""
    n = rng.poisson(max_rate_hz * duration_ms / 1000.0)
    t = np.sort(rng.uniform(0.0, duration_ms, size=n))
    keep = rng.uniform(0.0, max_rate_hz, size=n) < rate_fn(t)
    return t[keep]


@dataclass
class SyntheticRecording:
    recording: RawRecording
    spike_times: list[np.ndarray]      # per unit, ms (trough times)
    templates: np.ndarray
    noise_sigma: float

    def ground_truth(self) -> tuple[np.ndarray, np.ndarray]:
        """All spike times (sorted) with their unit labels."""
        times = np.concatenate(self.spike_times)
        labels = np.concatenate([np.full(len(t), k) for k, t in enumerate(self.spike_times)])
        order = np.argsort(times, kind="stable")
        return times[order], labels[order]


def synth_recording(duration_s: float = 60.0, sample_rate: float = 50000.0,
                    rates_hz=(5.0, 5.0, 5.0), snr: float | tuple = 5.0,
                    noise_sigma: float = 10.0, hum_amplitude: float = 0.0,
                    refractory_ms: float = 2.0, region: str | None = None,
                    seed: int = 0) -> SyntheticRecording:
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    shapes = template_shapes(sample_rate)
    n_units = len(rates_hz)
    if n_units > len(shapes):
        raise ValueError(f"at most {len(shapes)} units supported")
    snrs = np.broadcast_to(np.asarray(snr, dtype=float), (n_units,))
    x = rng.normal(0.0, noise_sigma, size=n)
    if hum_amplitude:
        t_s = np.arange(n) / sample_rate
        x += hum_amplitude * np.sin(2 * np.pi * 50.0 * t_s + rng.uniform(0, 2 * np.pi))
    half = shapes.shape[1] // 2
    duration_ms = 1000.0 * n / sample_rate
    margin = 1000.0 * (half + 1) / sample_rate
    trains = []
    for k in range(n_units):
        t = poisson_train(rates_hz[k], duration_ms - margin, rng, refractory_ms, start_ms=margin)
        idx = np.rint(t * sample_rate / 1000.0).astype(np.int64)
        tmpl = snrs[k] * noise_sigma * shapes[k]
        for i in idx:
            x[i - half: i + half + 1] += tmpl
        trains.append(idx * 1000.0 / sample_rate)
    rec = RawRecording(sample_rate, x, region)
    return SyntheticRecording(rec, trains, shapes[:n_units], noise_sigma)


def match_events(true_times: np.ndarray, detected: np.ndarray, tol_ms: float = 0.5
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Greedy one-to-one matching of sorted time arrays within ``tol_ms``.

    Returns index arrays ``(true_idx, det_idx)`` of matched pairs.
    """
    ti, di = [], []
    j = 0
    for i, t in enumerate(true_times):
        while j < len(detected) and detected[j] < t - tol_ms:
            j += 1
        if j < len(detected) and abs(detected[j] - t) <= tol_ms:
            ti.append(i)
            di.append(j)
            j += 1
    return np.asarray(ti, dtype=np.int64), np.asarray(di, dtype=np.int64)


def noisy_target(trace: VoltageTrace, noise_mv: float, seed: int = 0) -> VoltageTrace:
    """A surrogate "recorded" trace: simulation plus white Gaussian noise (mV)."""
    rng = np.random.default_rng(seed)
    return VoltageTrace(trace.t0, trace.dt, trace.samples + rng.normal(0.0, noise_mv, len(trace)))


def surrogate_train(rate_hz: float, duration_ms: float, seed: int = 0,
                    refractory_ms: float = 0.0) -> SpikeTrain:
    rng = np.random.default_rng(seed)
    return SpikeTrain(poisson_train(rate_hz, duration_ms, rng, refractory_ms), duration_ms)
