"""Fully Bayesian penalized regression under a generalized bridge prior."""
from .model import ChainOutput, ChainState, Dataset, Hyperparams
from .sampler import SamplerConfig, run_chain

__version__ = "0.1.0"

__all__ = ["ChainOutput", "ChainState", "Dataset", "Hyperparams", "SamplerConfig", "run_chain", "__version__"]
