"""Izhikevich neuron: parameters, stimulus protocols and fixed-step integration.

Model equations::

    dv/dt = 0.04*v**2 + 5*v + 140 - u + I
    du/dt = a*(b*v - u)

    if v >= +30 mV:  v <- c,  u <- u + d

Integration is forward Euler with one full step for both variables (``u`` is
advanced from the pre-step ``v``). When ``v`` crosses the cutoff the stored
sample is clamped to the cutoff and the spike is timed at the step of
crossing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

SPIKE_CUTOFF = 30.0
DIVERGENCE_LIMIT = 1000.0
DEFAULT_DT = 0.25
FALLBACK_V0 = -70.0


class IntegrationDivergence(ArithmeticError):
    """Raised when the membrane state becomes non-finite or leaves +/-1000 mV."""

    def __init__(self, step: int, t: float, v: float, u: float):
        self.step = step
        self.t = t
        self.v = v
        self.u = u
        super().__init__(
            f"integration diverged at step {step} (t={t:g} ms): v={v!r}, u={u!r}"
        )


@dataclass(frozen=True)
class NeuronParams:
    """The (a, b, c, d) quadruple.

    a : recovery rate of ``u``
    b : sensitivity of ``u`` to subthreshold ``v``
    c : after-spike reset voltage (mV)
    d : after-spike increment of ``u``
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"parameter {name} must be finite, got {value!r}")
        if not -90.0 <= self.c <= -30.0:
            raise ValueError(f"reset voltage c={self.c} outside [-90, -30] mV")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "NeuronParams":
        a, b, c, d = (float(x) for x in values)
        return cls(a, b, c, d)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}


@dataclass(frozen=True)
class NeuronState:
    v: float
    u: float


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    amp_start: float
    amp_end: float

    def value(self, t):
        if self.end == self.start:
            return np.full_like(np.asarray(t, dtype=float), self.amp_start)
        frac = (np.asarray(t, dtype=float) - self.start) / (self.end - self.start)
        return self.amp_start + frac * (self.amp_end - self.amp_start)


@dataclass(frozen=True)
class StimulusProtocol:
    """Piecewise-linear input current over ``[0, duration]`` ms.

    Segments are half-open ``[start, end)`` except the last, which also owns
    ``t == duration``. Use :meth:`steps` for the common piecewise-constant case.
    """

    segments: tuple[Segment, ...]
    duration: float

    def __post_init__(self):
        segs = tuple(
            s if isinstance(s, Segment) else Segment(*map(float, s)) for s in self.segments
        )
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("protocol needs at least one segment")
        if segs[0].start != 0.0:
            raise ValueError("first segment must start at t=0")
        for prev, nxt in zip(segs, segs[1:]):
            if nxt.start != prev.end:
                raise ValueError(f"segments must be contiguous: {prev.end} != {nxt.start}")
        for s in segs:
            if s.end < s.start:
                raise ValueError(f"segment ends before it starts: {s}")
            if not (math.isfinite(s.amp_start) and math.isfinite(s.amp_end)):
                raise ValueError("segment amplitudes must be finite")
        if segs[-1].end != self.duration:
            raise ValueError(
                f"segments cover [0, {segs[-1].end}] but duration is {self.duration}"
            )

    @classmethod
    def steps(cls, levels: Sequence[tuple[float, float]], duration: float,
              baseline: float = 0.0) -> "StimulusProtocol":
        """Build a piecewise-constant protocol.

        ``levels`` is a list of ``(start_ms, amplitude)`` change points; the
        current is ``baseline`` before the first one.
        """
        points = sorted((float(t), float(amp)) for t, amp in levels)
        segs = []
        t_prev, amp_prev = 0.0, float(baseline)
        for t, amp in points:
            if t > t_prev:
                segs.append(Segment(t_prev, t, amp_prev, amp_prev))
            t_prev, amp_prev = t, amp
        segs.append(Segment(t_prev, float(duration), amp_prev, amp_prev))
        return cls(tuple(segs), float(duration))

    @classmethod
    def constant(cls, amplitude: float, duration: float) -> "StimulusProtocol":
        return cls((Segment(0.0, float(duration), amplitude, amplitude),), float(duration))

    def extended(self, duration: float) -> "StimulusProtocol":
        """Same protocol, with the final current level held until ``duration``."""
        if duration <= self.duration:
            return self
        last = self.segments[-1]
        tail = Segment(last.end, float(duration), last.amp_end, last.amp_end)
        return StimulusProtocol(self.segments + (tail,), float(duration))

    def current(self, t):
        """Evaluate I(t) for a scalar or array of times (ms)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        ends = np.array([s.end for s in self.segments])
        idx = np.searchsorted(ends, t_arr, side="right")
        idx = np.clip(idx, 0, len(self.segments) - 1)
        out = np.empty_like(t_arr)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if mask.any():
                out[mask] = seg.value(t_arr[mask])
        if np.ndim(t) == 0:
            return float(out[0])
        return out

    def change_points(self) -> list[float]:
        """Times where the current is discontinuous or changes slope."""
        pts = []
        for prev, nxt in zip(self.segments, self.segments[1:]):
            if prev.amp_end != nxt.amp_start or (
                (prev.amp_end - prev.amp_start) / max(prev.end - prev.start, 1e-300)
                != (nxt.amp_end - nxt.amp_start) / max(nxt.end - nxt.start, 1e-300)
            ):
                pts.append(nxt.start)
        return pts

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "segments": [[s.start, s.end, s.amp_start, s.amp_end] for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StimulusProtocol":
        return cls(tuple(Segment(*map(float, s)) for s in data["segments"]), float(data["duration"]))


@dataclass(frozen=True)
class SimConfig:
    """Integration settings. ``v0``/``u0`` of ``None`` select the rest state."""

    dt: float = DEFAULT_DT
    duration: float = 400.0
    v0: float | None = None
    u0: float | None = None
    spike_cutoff: float = SPIKE_CUTOFF

    def __post_init__(self):
        if not 0.0 < self.dt <= 1.0:
            raise ValueError(f"dt must be in (0, 1] ms, got {self.dt}")
        if self.duration < self.dt:
            raise ValueError("duration must be at least one step")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9))


@dataclass(frozen=True)
class VoltageTrace:
    t0: float
    dt: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if samples.ndim != 1 or not np.all(np.isfinite(samples)):
            raise ValueError("samples must be a finite 1-D array")

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self.samples) - 1)

    def __eq__(self, other):
        if not isinstance(other, VoltageTrace):
            return NotImplemented
        return (self.t0 == other.t0 and self.dt == other.dt
                and np.array_equal(self.samples, other.samples))

    __hash__ = None


@dataclass(frozen=True)
class SpikeTrain:
    times: np.ndarray = field(repr=False)
    duration: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise ValueError("spike times must be strictly increasing")
            if times[0] < 0 or times[-1] > self.duration:
                raise ValueError("spike times must lie within [0, duration]")

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return self.duration == other.duration and np.array_equal(self.times, other.times)

    __hash__ = None


def step(state: NeuronState, params: NeuronParams, i_now: float, dt: float,
         spike_cutoff: float = SPIKE_CUTOFF) -> tuple[NeuronState, bool]:
    """Advance one Euler step.

    A state that already sits at or above the cutoff (e.g. set by hand) is
    reset immediately without integrating, so the reset rule is never skipped.

    Raises
    ------
    IntegrationDivergence
        If the integrated state is non-finite or ``|v| > 1000`` mV.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, u = state.v, state.u
    if not (math.isfinite(v) and math.isfinite(u)):
        raise IntegrationDivergence(0, 0.0, v, u)
    if v >= spike_cutoff:
        return NeuronState(params.c, u + params.d), True
    v_new = v + dt * (0.04 * v * v + 5.0 * v + 140.0 - u + i_now)
    u_new = u + dt * (params.a * (params.b * v - u))
    if not (math.isfinite(v_new) and math.isfinite(u_new)) or abs(v_new) > DIVERGENCE_LIMIT:
        raise IntegrationDivergence(1, dt, v_new, u_new)
    if v_new >= spike_cutoff:
        return NeuronState(params.c, u_new + params.d), True
    return NeuronState(v_new, u_new), False


@njit(cache=True)
def _integrate(a, b, c, d, current, dt, v0, u0, cutoff, out_v, out_spk):
    # mirrors step(); returns (failing step or -1, v, u)
    v = v0
    u = u0
    out_v[0] = v
    out_spk[0] = False
    for k in range(current.shape[0]):
        i_now = current[k]
        if v >= cutoff:
            v = c
            u = u + d
            out_v[k + 1] = cutoff
            out_spk[k + 1] = True
            continue
        v_new = v + dt * (0.04 * v * v + 5.0 * v + 140.0 - u + i_now)
        u_new = u + dt * (a * (b * v - u))
        if not (math.isfinite(v_new) and math.isfinite(u_new)) or abs(v_new) > 1000.0:
            return k + 1, v_new, u_new
        if v_new >= cutoff:
            v = c
            u = u_new + d
            out_v[k + 1] = cutoff
            out_spk[k + 1] = True
        else:
            v = v_new
            u = u_new
            out_v[k + 1] = v
            out_spk[k + 1] = False
    return -1, v, u


def fixed_points(params: NeuronParams, i_const: float) -> list[NeuronState]:
    """Equilibria of the continuous dynamics under constant current.

    Real roots of ``0.04 v^2 + (5 - b) v + 140 + I = 0`` with ``u = b v``,
    sorted by ascending ``v``. A tangency yields a single state.
    """
    qa, qb, qc = 0.04, 5.0 - params.b, 140.0 + i_const
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        return []
    if disc == 0:
        v = -qb / (2.0 * qa)
        return [NeuronState(v, params.b * v)]
    sq = math.sqrt(disc)
    # numerically stable pair of roots
    q = -0.5 * (qb + math.copysign(sq, qb))
    roots = sorted({q / qa, qc / q})
    return [NeuronState(v, params.b * v) for v in roots]


def is_stable(params: NeuronParams, state: NeuronState) -> bool:
    """Linear stability of an equilibrium (both Jacobian eigenvalues in Re < 0)."""
    j11 = 0.08 * state.v + 5.0
    trace = j11 - params.a
    det = -j11 * params.a + params.a * params.b
    return trace < 0 and det > 0


def rest_state(params: NeuronParams, i_const: float) -> NeuronState:
    """Stable equilibrium at ``i_const`` if any, otherwise ``v = -70`` mV, ``u = b v``."""
    for fp in fixed_points(params, i_const):
        if is_stable(params, fp):
            return fp
    return NeuronState(FALLBACK_V0, params.b * FALLBACK_V0)


def initial_state(params: NeuronParams, protocol: StimulusProtocol,
                  config: SimConfig) -> NeuronState:
    if config.v0 is None:
        rest = rest_state(params, protocol.current(0.0))
        v0, u0 = rest.v, rest.u
    else:
        v0 = float(config.v0)
        u0 = params.b * v0
    if config.u0 is not None:
        u0 = float(config.u0)
    return NeuronState(v0, u0)


def sample_current(protocol: StimulusProtocol, config: SimConfig) -> np.ndarray:
    """Current applied during each of the ``n_steps`` steps (left endpoint)."""
    if protocol.duration + 1e-9 < config.n_steps * config.dt:
        raise ValueError(
            f"protocol covers {protocol.duration} ms but simulation needs "
            f"{config.n_steps * config.dt} ms"
        )
    t = config.dt * np.arange(config.n_steps)
    return np.ascontiguousarray(protocol.current(t), dtype=float)


def integrate_array(params: NeuronParams, current: np.ndarray, dt: float,
                    v0: float, u0: float, spike_cutoff: float = SPIKE_CUTOFF
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Low-level run over a pre-sampled current. Returns ``(v, spike_flags)``."""
    n = current.shape[0]
    out_v = np.empty(n + 1)
    out_spk = np.empty(n + 1, dtype=np.bool_)
    fail, v_bad, u_bad = _integrate(
        params.a, params.b, params.c, params.d, current, float(dt),
        float(v0), float(u0), float(spike_cutoff), out_v, out_spk,
    )
    if fail >= 0:
        raise IntegrationDivergence(int(fail), fail * dt, float(v_bad), float(u_bad))
    return out_v, out_spk


def simulate(params: NeuronParams, protocol: StimulusProtocol,
             config: SimConfig | None = None) -> tuple[VoltageTrace, SpikeTrain]:
    """Integrate ``params`` under ``protocol``.

    The trace has ``floor(duration/dt) + 1`` samples starting at t=0; spike
    samples are clamped to the cutoff.
    """
    if config is None:
        config = SimConfig(duration=protocol.duration)
    current = sample_current(protocol, config)
    s0 = initial_state(params, protocol, config)
    v, spk = integrate_array(params, current, config.dt, s0.v, s0.u, config.spike_cutoff)
    times = config.dt * np.flatnonzero(spk)
    duration = config.n_steps * config.dt
    return VoltageTrace(0.0, config.dt, v), SpikeTrain(times, duration)
