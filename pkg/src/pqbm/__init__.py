"""Supervised Boltzmann-machine classification with annealer-style samplers,
parallel hardware embeddings, and a small CNN baseline."""

from .model import (
    BMParameters,
    EncodedDataPoint,
    IsingProblem,
    QuboProblem,
    ReducedBatch,
    ReducedProblem,
    UnitLayout,
    clamp_inputs,
    clamp_inputs_and_label,
    energy,
    init_params,
    load_params,
    parameter_count,
    qubo_to_ising,
    save_params,
    to_qubo,
)
from .samplers import (
    SampleSet,
    SamplerConfig,
    exact_distribution,
    exact_sample,
    gibbs_sample,
    moments,
    sa_sample,
)

__all__ = [
    "BMParameters",
    "EncodedDataPoint",
    "IsingProblem",
    "QuboProblem",
    "ReducedBatch",
    "ReducedProblem",
    "SampleSet",
    "SamplerConfig",
    "UnitLayout",
    "clamp_inputs",
    "clamp_inputs_and_label",
    "energy",
    "exact_distribution",
    "exact_sample",
    "gibbs_sample",
    "init_params",
    "load_params",
    "moments",
    "parameter_count",
    "qubo_to_ising",
    "sa_sample",
    "save_params",
    "to_qubo",
]

__version__ = "0.1.0"
