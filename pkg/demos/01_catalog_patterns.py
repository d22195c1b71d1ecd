"""
Firing patterns of the parameter catalog
========================================

Simulate every catalog pattern that has parameters, once with the original
set and once with the optimized set, and name what comes out. The tonic case
is also written as a three-way comparison plot.

    python demos/01_catalog_patterns.py [output_dir]
"""

import sys
from pathlib import Path

from izhifit import (compare_report, default_catalog, optimized_params, protocol_for,
                     canonical_params, simulate)
from izhifit.io import atomic_write
from izhifit.patterns import classify_run
from izhifit.synth import noisy_target

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_output")

print(f"{'pattern':28s} {'set':10s} {'spikes':>6s}  classified as")
for pid in default_catalog().covered():
    proto = protocol_for(pid)
    for name, params in (("original", canonical_params(pid)), ("optimized", optimized_params(pid))):
        trace, train = simulate(params, proto)
        label, _ = classify_run(train, trace, proto)
        print(f"{pid.value:28s} {name:10s} {len(train):6d}  {label}")

# a surrogate "recorded" tonic neuron: optimized set plus 0.5 mV noise
pid = "tonic_spiking"
target = noisy_target(simulate(optimized_params(pid), protocol_for(pid))[0], 0.5, seed=0)
report = compare_report(target, pid)
for key, value in report.mse.items():
    print(f"MSE {key:22s} {value:10.3f} mV^2")
atomic_write(out / "tonic_compare.svg", report.to_svg())
atomic_write(out / "tonic_compare.csv", report.to_csv())
print(f"plot and data in {out}/")
