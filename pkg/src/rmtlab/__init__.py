"""Random-matrix verification laboratory: spectral functionals, arithmetic
structure (LCD), small-ball estimators and reproducible Monte Carlo studies."""
from .ensembles import Distribution, DiscreteLaw, ZeroedMatrixParams
from .experiments import ExperimentConfig, ExperimentReport, run

__version__ = "0.1.0"
__all__ = ["Distribution", "DiscreteLaw", "ZeroedMatrixParams", "ExperimentConfig",
           "ExperimentReport", "run", "__version__"]
