"""Mixture proportion estimation with regrouping.

Library plus CLI: an exact oracle over finite discrete measures, a
from-scratch posterior network, sample-level regrouping, three MPE
estimator families, synthetic data generators, and a benchmark harness.
"""

from .measure import (
    BoundInputs,
    DiscreteDistribution,
    RegroupResult,
    SurrogateGap,
    bias_identity,
    finite_sample_bound,
    kappa_max,
    latent_residual,
    mix,
    regroup,
    regroup_ordering,
    split_measure,
    surrogate_component,
    surrogate_gap,
)

__all__ = [
    "BoundInputs",
    "DiscreteDistribution",
    "RegroupResult",
    "SurrogateGap",
    "bias_identity",
    "finite_sample_bound",
    "kappa_max",
    "latent_residual",
    "mix",
    "regroup",
    "regroup_ordering",
    "split_measure",
    "surrogate_component",
    "surrogate_gap",
]

__version__ = "0.1.0"
