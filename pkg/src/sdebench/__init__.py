"""sdebench: a benchmark workbench for scalar SDE integration schemes.

Eleven single-step integrators (Euler-Maruyama, the Heun
predictor-corrector family, Milstein-based and Stratonovich-based
variants, and Taylor schemes through second order) plus three
measurement protocols: strong-convergence order fitting against a
shared Brownian path, stability-region scanning over a (D, h) grid,
and stationary-distribution accuracy against a closed-form density.
"""

__version__ = "0.1.0"

from .increments import (GaussianTriple, NoiseIncrement, Z3Representation,
                         compose, compose_pairs, integral_moments,
                         make_increment, representation_moments,
                         sample_path_increments, sample_triple)
from .model import (CalculusConvention, EquilibriumSpec, SdeProblem,
                    benchmark_problem, convert_drift, equilibrium_density,
                    sample_equilibrium, validation_problem)
from .schemes import SchemeId, Stepper, dispatch
from .streams import RandomStream

__all__ = [
    "__version__",
    "RandomStream",
    "GaussianTriple",
    "NoiseIncrement",
    "Z3Representation",
    "sample_triple",
    "make_increment",
    "compose",
    "compose_pairs",
    "sample_path_increments",
    "representation_moments",
    "integral_moments",
    "CalculusConvention",
    "SdeProblem",
    "EquilibriumSpec",
    "benchmark_problem",
    "validation_problem",
    "equilibrium_density",
    "sample_equilibrium",
    "convert_drift",
    "SchemeId",
    "Stepper",
    "dispatch",
]
