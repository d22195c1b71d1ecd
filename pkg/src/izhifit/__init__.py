"""Izhikevich neuron simulation, genetic-algorithm parameter fitting,
firing-pattern classification and spike sorting."""

from .catalog import (Catalog, PatternId, Region, canonical_params, default_catalog,
                      load_catalog, optimized_params, protocol_for, region_allows)
from .ga import FitResult, GaConfig, run_fit
from .metrics import (Histogram, correlogram, firing_rate_histogram, isi_histogram,
                      resample, spikes_from_trace, trace_mse)
from .model import (IntegrationDivergence, NeuronParams, NeuronState, SimConfig, SpikeTrain,
                    StimulusProtocol, VoltageTrace, fixed_points, simulate, step)
from .patterns import ClassifierConfig, PatternFeatures, classify, classify_run, extract_features
from .report import CompareReport, compare_report
from .sorting import RawRecording, SortedUnit, SortResult, sort_recording

__version__ = "0.1.0"

__all__ = [
    "Catalog", "ClassifierConfig", "CompareReport", "FitResult", "GaConfig", "Histogram",
    "IntegrationDivergence", "NeuronParams", "NeuronState", "PatternFeatures", "PatternId",
    "RawRecording", "Region", "SimConfig", "SortResult", "SortedUnit", "SpikeTrain",
    "StimulusProtocol", "VoltageTrace", "canonical_params", "classify", "classify_run",
    "compare_report", "correlogram", "default_catalog", "extract_features",
    "firing_rate_histogram", "fixed_points", "isi_histogram", "load_catalog",
    "optimized_params", "protocol_for", "region_allows", "resample", "run_fit",
    "simulate", "sort_recording", "spikes_from_trace", "step", "trace_mse",
]
