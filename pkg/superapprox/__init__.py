"""superapprox: a computational lab for super-approximation experiments."""

__version__ = "0.1.0"

from .approxsub import SubsetView, bounded_gen_check, commutator_fill, pq_predicate

# Re-export CLI entry points
from .cli import app as cli_app
from .contracts import ExperimentConfig, load_experiment_config, load_generator_set
from .groupgen import GeneratorSet, Quotient, enumerate_quotient
from .modring import Modulus, RationalMatrix, ResidueMatrix
from .padic import AnalyticMap, hensel_solve, sumset_coverage
from .pipeline import ExperimentRunner
from .spectral import expander_survey, spectral_gap
from .treereg import LeafSet, block_regularize, parents_regularize, regularize

__all__ = [
    "AnalyticMap",
    "ExperimentConfig",
    "ExperimentRunner",
    "GeneratorSet",
    "LeafSet",
    "Modulus",
    "Quotient",
    "RationalMatrix",
    "ResidueMatrix",
    "SubsetView",
    "block_regularize",
    "bounded_gen_check",
    "cli_app",
    "commutator_fill",
    "enumerate_quotient",
    "expander_survey",
    "hensel_solve",
    "load_experiment_config",
    "load_generator_set",
    "parents_regularize",
    "pq_predicate",
    "regularize",
    "spectral_gap",
    "sumset_coverage",
    "__version__",
]
