"""Firing-pattern features and a rule-cascade classifier.

The classifier only names the eight patterns that carry parameter sets in the
catalog; anything else is :data:`UNCLASSIFIED`. Rules are tried in this order,
first match wins:

1. no spikes                                   -> unclassified
2. spikes during reduced drive only            -> inhibition-induced spiking
3. first spike after release of inhibition     -> rebound spike
4. equal pulses, only the one after inhibition
   fires                                       -> threshold variability
5. equal pulses, only closely spaced ones fire -> integrator
6. one spike, transient stimulus, DAP bump     -> DAP
7. one spike, sustained stimulus               -> phasic spiking
8. leading burst then regular tail             -> mixed mode
9. >= 5 regular spikes                         -> tonic spiking

Numeric thresholds live in :class:`ClassifierConfig`. They operationalize
qualitative pattern descriptions and are not measured quantities.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .catalog import PatternId
from .model import SpikeTrain, StimulusProtocol, VoltageTrace

UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class ClassifierConfig:
    transient_window: float = 5.0    # ms excluded at the start of a run
    min_tonic_spikes: int = 5
    max_tonic_cv: float = 0.2
    burst_isi: float = 10.0          # ms; shorter ISIs count as in-burst
    min_burst_isis: int = 2
    dap_min_bump: float = 2.0        # mV above the post-reset trough
    dap_window: float = 10.0         # ms after the spike
    release_window: float = 10.0     # ms after inhibition ends still counted as "during"
    amplitude_rtol: float = 1e-6


@dataclass(frozen=True)
class PulseResponse:
    start: float
    end: float
    amplitude: float
    gap: float                # onset-to-onset from the previous pulse, inf for the first
    after_inhibition: bool
    spikes: int


@dataclass(frozen=True)
class PatternFeatures:
    spike_count: int
    first_spike_latency: float | None = None
    mean_isi: float | None = None
    isi_cv: float | None = None
    adaptation_index: float | None = None
    burst_fraction: float = 0.0
    initial_burst_isis: int = 0
    tail_cv: float | None = None
    rebound: bool = False
    inhibition_induced: bool = False
    sustained: bool = False
    dap_bump: float = 0.0
    pulses: tuple[PulseResponse, ...] = field(default=())

    def to_dict(self) -> dict:
        data = asdict(self)
        data["pulses"] = [
            {**asdict(p), "gap": None if math.isinf(p.gap) else p.gap} for p in self.pulses
        ]
        return data


def _cv(x: np.ndarray) -> float | None:
    if x.size == 0:
        return None
    m = x.mean()
    return float(x.std() / m) if m > 0 else None


def _excursions(cur: np.ndarray, times: np.ndarray, baseline: float, sign: int,
                tol: float = 1e-9) -> list[tuple[float, float, float]]:
    """Maximal runs where the current departs from baseline in direction ``sign``.

    Returns ``(start, end, peak_amplitude)``; ``end`` is the first sample back
    at baseline (or the last sample time).
    """
    mask = sign * (cur - baseline) > tol
    out = []
    k = 0
    n = mask.size
    while k < n:
        if not mask[k]:
            k += 1
            continue
        j = k
        while j < n and mask[j]:
            j += 1
        seg = cur[k:j]
        peak = float(seg.max() if sign > 0 else seg.min())
        out.append((float(times[k]), float(times[j]) if j < n else float(times[-1]), peak))
        k = j
    return out


def extract_features(train: SpikeTrain, trace: VoltageTrace, protocol: StimulusProtocol,
                     config: ClassifierConfig = ClassifierConfig()) -> PatternFeatures:
    times = trace.times
    spikes = train.times[train.times >= trace.t0 + config.transient_window]
    n = int(spikes.size)
    cur = protocol.current(np.minimum(times, protocol.duration))
    baseline = float(cur[0])
    pos = _excursions(cur, times, baseline, +1)
    neg = _excursions(cur, times, baseline, -1)
    end_t = float(times[-1])
    sustained = bool(pos) and pos[-1][1] >= end_t

    pulses = []
    for k, (s, e, amp) in enumerate(pos):
        nxt = pos[k + 1][0] if k + 1 < len(pos) else math.inf
        prev_end = pos[k - 1][1] if k else -math.inf
        pulses.append(PulseResponse(
            start=s, end=e, amplitude=amp,
            gap=s - pos[k - 1][0] if k else math.inf,
            after_inhibition=any(prev_end <= ns and ne <= s for ns, ne, _ in neg),
            spikes=int(np.count_nonzero((spikes >= s) & (spikes < nxt))),
        ))

    if n == 0:
        return PatternFeatures(spike_count=0, sustained=sustained, pulses=tuple(pulses))

    onset = min([p[0] for p in pos + neg], default=0.0)
    isis = np.diff(spikes)
    # regularity measures skip the first spike, whose interval carries the onset
    # transient, as long as at least two intervals remain
    steady = np.diff(spikes[1:]) if n >= 4 else isis
    lead = 0
    while lead < isis.size and isis[lead] < config.burst_isi:
        lead += 1

    inside_neg = np.zeros(n, dtype=bool)
    near_neg = np.zeros(n, dtype=bool)
    for s, e, _ in neg:
        inside_neg |= (spikes >= s) & (spikes < e)
        near_neg |= (spikes >= s) & (spikes < e + config.release_window)
    inhibition_induced = bool(neg) and inside_neg.any() and near_neg.all()

    rebound = False
    first = spikes[0]
    released = [(s, e) for s, e, _ in neg if e <= first]
    if released and not inside_neg.any():
        last_release = max(e for _, e in released)
        rebound = not any(last_release <= s < first for s, _, _ in pos) and \
            not any(s <= first < e for s, e, _ in pos)

    dap_bump = 0.0
    k0 = int(round((first - trace.t0) / trace.dt))
    k1 = min(len(trace), k0 + 1 + int(round(config.dap_window / trace.dt)))
    after = trace.samples[k0 + 1:k1]
    if after.size:
        dap_bump = float(np.max(after - np.minimum.accumulate(after)))

    return PatternFeatures(
        spike_count=n,
        first_spike_latency=float(first - onset),
        mean_isi=float(isis.mean()) if isis.size else None,
        isi_cv=_cv(steady),
        adaptation_index=float(steady[-1] / steady[0]) if steady.size else None,
        burst_fraction=float(np.mean(isis < config.burst_isi)) if isis.size else 0.0,
        initial_burst_isis=lead,
        tail_cv=_cv(isis[lead:]),
        rebound=rebound,
        inhibition_induced=inhibition_induced,
        sustained=sustained,
        dap_bump=dap_bump,
        pulses=tuple(pulses),
    )


def _equal_amplitudes(pulses, rtol) -> bool:
    amps = [p.amplitude for p in pulses]
    return all(math.isclose(a, amps[0], rel_tol=rtol) for a in amps)


def _threshold_variability(pulses, cfg) -> bool:
    if len(pulses) < 2 or not _equal_amplitudes(pulses, cfg.amplitude_rtol):
        return False
    fired_after_inh = any(p.spikes and p.after_inhibition for p in pulses)
    silent_plain = any(not p.spikes and not p.after_inhibition for p in pulses)
    return fired_after_inh and silent_plain


def _integrator(pulses, cfg) -> bool:
    if len(pulses) < 3 or not _equal_amplitudes(pulses, cfg.amplitude_rtol):
        return False
    if any(p.after_inhibition for p in pulses) or pulses[0].spikes:
        return False
    fired = [p.gap for p in pulses if p.spikes]
    silent = [p.gap for p in pulses[1:] if not p.spikes]
    return bool(fired) and bool(silent) and max(fired) < min(silent)


def classify(features: PatternFeatures, config: ClassifierConfig = ClassifierConfig()):
    """Map features to a :class:`PatternId` or ``UNCLASSIFIED``."""
    f = features
    if f.spike_count == 0:
        return UNCLASSIFIED
    if f.inhibition_induced:
        return PatternId.INHIBITION_INDUCED_SPIKING
    if f.rebound:
        return PatternId.REBOUND_SPIKE
    if _threshold_variability(f.pulses, config):
        return PatternId.THRESHOLD_VARIABILITY
    if _integrator(f.pulses, config):
        return PatternId.INTEGRATOR
    if f.spike_count == 1 and not f.sustained and f.dap_bump >= config.dap_min_bump:
        return PatternId.DAP
    if f.spike_count == 1 and f.sustained:
        return PatternId.PHASIC_SPIKING
    tail_isis = f.spike_count - 1 - f.initial_burst_isis
    if (f.initial_burst_isis >= config.min_burst_isis and tail_isis >= 2
            and f.tail_cv is not None and f.tail_cv < config.max_tonic_cv):
        return PatternId.MIXED_MODE
    if (f.spike_count >= config.min_tonic_spikes and f.isi_cv is not None
            and f.isi_cv < config.max_tonic_cv):
        return PatternId.TONIC_SPIKING
    return UNCLASSIFIED


def classify_run(train: SpikeTrain, trace: VoltageTrace, protocol: StimulusProtocol,
                 config: ClassifierConfig = ClassifierConfig()):
    """Features and label in one call."""
    feats = extract_features(train, trace, protocol, config)
    return classify(feats, config), feats
