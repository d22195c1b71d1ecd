"""Firing-pattern catalog: golden parameter sets, protocols and region sets.

The catalog ships as ``data/catalog.json``. Eight patterns carry an original
and an optimized (a, b, c, d) quadruple; the other twelve carry only an
eliciting protocol and a one-line descriptor. Stimulus amplitudes and timings
are catalog data chosen so that the original quadruples pass the classifier
at the default step of 0.25 ms; edit the JSON to change them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .model import NeuronParams, StimulusProtocol

CATALOG_VERSION = 1


class PatternId(str, Enum):
    TONIC_SPIKING = "tonic_spiking"
    PHASIC_SPIKING = "phasic_spiking"
    TONIC_BURSTING = "tonic_bursting"
    PHASIC_BURSTING = "phasic_bursting"
    MIXED_MODE = "mixed_mode"
    SPIKE_FREQUENCY_ADAPTATION = "spike_frequency_adaptation"
    CLASS_1_EXCITABLE = "class_1_excitable"
    CLASS_2_EXCITABLE = "class_2_excitable"
    SPIKE_LATENCY = "spike_latency"
    SUBTHRESHOLD_OSCILLATION = "subthreshold_oscillation"
    RESONATOR = "resonator"
    INTEGRATOR = "integrator"
    REBOUND_SPIKE = "rebound_spike"
    REBOUND_BURST = "rebound_burst"
    THRESHOLD_VARIABILITY = "threshold_variability"
    BISTABILITY = "bistability"
    DAP = "dap"
    ACCOMMODATION = "accommodation"
    INHIBITION_INDUCED_SPIKING = "inhibition_induced_spiking"
    INHIBITION_INDUCED_BURSTING = "inhibition_induced_bursting"

    def __str__(self):
        return self.value


class Region(str, Enum):
    BLA = "BLA"
    HIP = "HIP"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class PatternSpec:
    id: PatternId
    original: NeuronParams | None
    optimized: NeuronParams | None
    protocol: StimulusProtocol
    descriptor: str


@dataclass(frozen=True)
class Catalog:
    patterns: dict[PatternId, PatternSpec]
    regions: dict[Region, frozenset[PatternId]]
    version: int = CATALOG_VERSION

    def __post_init__(self):
        missing = set(PatternId) - set(self.patterns)
        if missing:
            raise ValueError(f"catalog lacks patterns: {sorted(m.value for m in missing)}")
        for spec in self.patterns.values():
            if (spec.original is None) != (spec.optimized is None):
                raise ValueError(f"{spec.id}: original and optimized must be given together")

    def __getitem__(self, pid) -> PatternSpec:
        return self.patterns[PatternId(pid)]

    def covered(self) -> list[PatternId]:
        """Patterns that carry parameter quadruples, in enumeration order."""
        return [p for p in PatternId if self.patterns[p].original is not None]

    def to_dict(self) -> dict:
        def quad(p):
            return None if p is None else list(p.as_tuple())
        return {
            "version": self.version,
            "patterns": {
                p.value: {
                    "original": quad(spec.original),
                    "optimized": quad(spec.optimized),
                    "protocol": spec.protocol.to_dict(),
                    "descriptor": spec.descriptor,
                }
                for p, spec in ((p, self.patterns[p]) for p in PatternId)
            },
            "regions": {
                r.value: [p.value for p in PatternId if p in self.regions[r]] for r in Region
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Catalog":
        if data.get("version") != CATALOG_VERSION:
            raise ValueError(f"unsupported catalog version {data.get('version')!r}")
        patterns = {}
        for key, entry in data["patterns"].items():
            pid = PatternId(key)
            orig, opt = entry.get("original"), entry.get("optimized")
            patterns[pid] = PatternSpec(
                id=pid,
                original=None if orig is None else NeuronParams.from_sequence(orig),
                optimized=None if opt is None else NeuronParams.from_sequence(opt),
                protocol=StimulusProtocol.from_dict(entry["protocol"]),
                descriptor=entry.get("descriptor", ""),
            )
        regions = {Region(r): frozenset(PatternId(p) for p in ids)
                   for r, ids in data["regions"].items()}
        for r in Region:
            regions.setdefault(r, frozenset())
        return cls(patterns, regions, data["version"])

    def dumps(self) -> str:
        return dumps_compact(self.to_dict())


def dumps_compact(obj) -> str:
    """JSON with two-space indent but flat numeric lists kept on one line."""
    text = json.dumps(obj, indent=2)
    flat = re.compile(r"\[\s*((?:-?[\d.eE+-]+|null)(?:,\s*(?:-?[\d.eE+-]+|null))*)\s*\]")
    return flat.sub(lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]",
                    text) + "\n"


def load_catalog(path: str | Path | None = None) -> Catalog:
    """Load a catalog JSON; ``None`` loads the bundled one."""
    if path is None:
        return default_catalog()
    with open(path) as fh:
        return Catalog.from_dict(json.load(fh))


@lru_cache(maxsize=1)
def default_catalog() -> Catalog:
    text = resources.files("izhifit").joinpath("data/catalog.json").read_text()
    return Catalog.from_dict(json.loads(text))


def canonical_params(pid, catalog: Catalog | None = None) -> NeuronParams | None:
    return (catalog or default_catalog())[pid].original


def optimized_params(pid, catalog: Catalog | None = None) -> NeuronParams | None:
    return (catalog or default_catalog())[pid].optimized


def protocol_for(pid, catalog: Catalog | None = None) -> StimulusProtocol:
    return (catalog or default_catalog())[pid].protocol


def region_allows(region, pid, catalog: Catalog | None = None) -> bool:
    cat = catalog or default_catalog()
    return PatternId(pid) in cat.regions[Region(region)]


def parameter_rows(catalog: Catalog | None = None) -> list[tuple[str, str, float, float, float, float]]:
    """``(pattern, set, a, b, c, d)`` for every covered pattern, original row first."""
    cat = catalog or default_catalog()
    rows = []
    for pid in cat.covered():
        spec = cat[pid]
        rows.append((pid.value, "original", *spec.original.as_tuple()))
        rows.append((pid.value, "optimized", *spec.optimized.as_tuple()))
    return rows


def region_matrix(catalog: Catalog | None = None) -> dict[Region, dict[PatternId, bool]]:
    """Region-by-pattern possibility matrix over all catalog patterns."""
    cat = catalog or default_catalog()
    return {r: {p: p in cat.regions[r] for p in PatternId} for r in Region}
