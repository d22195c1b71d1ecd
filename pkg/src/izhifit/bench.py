"""Step-throughput measurement for the compiled integration loop."""

from __future__ import annotations

import time

import numpy as np

from .model import NeuronParams, integrate_array


def step_throughput(n_steps: int = 10_000_000, repeats: int = 3,
                    params: NeuronParams | None = None, current: float = 10.0,
                    dt: float = 0.25) -> dict:
    """Best-of-``repeats`` single-neuron steps per second (compile time excluded)."""
    params = params or NeuronParams(0.02, 0.2, -65.0, 6.0)
    drive = np.full(n_steps, float(current))
    integrate_array(params, drive[:16], dt, -70.0, params.b * -70.0)  # warm-up / JIT
    best = float("inf")
    spikes = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        _, flags = integrate_array(params, drive, dt, -70.0, params.b * -70.0)
        best = min(best, time.perf_counter() - t0)
        spikes = int(flags.sum())
    return {
        "n_steps": n_steps,
        "seconds": best,
        "steps_per_second": n_steps / best,
        "simulated_ms_per_second": n_steps * dt / best,
        "spikes": spikes,
    }
