"""Causal bridges learned from proxy variables.

Modules: :mod:`autodiff` (reverse-mode tensors, MLPs, AdamW), :mod:`sem`
(linear-Gaussian SEM algebra and error/MI analysis), :mod:`datagen`
(Demand, SEM and survival generators), :mod:`sampler` (``p(W | x, z)``),
:mod:`bridge` (bridge learner), :mod:`survival` (Cox tools) and
:mod:`harness` (experiments, configs, reports).
"""
from .bridge import BridgeModel, TrainConfig, dose_response, oos_mse, train
from .datagen import (ProximalDataset, SurvivalConfig, generate_demand, generate_sem,
                      generate_survival, split)
from .errors import (CausalBridgeError, ConfigError, ContractError, DegenerateError,
                     DimensionError, NumericalError, ParameterError, SampleSizeError,
                     StateError, TrainingDivergence)
from .sampler import ExactSemSampler, GaussianSampler, SamplerConfig, fit_sampler
from .sem import SemParams, condition, sem_covariance

__version__ = "0.1.0"

__all__ = [
    "BridgeModel", "TrainConfig", "dose_response", "oos_mse", "train",
    "ProximalDataset", "SurvivalConfig", "generate_demand", "generate_sem", "generate_survival",
    "split", "CausalBridgeError", "ConfigError", "ContractError", "DegenerateError",
    "DimensionError", "NumericalError", "ParameterError", "SampleSizeError", "StateError",
    "TrainingDivergence", "ExactSemSampler", "GaussianSampler", "SamplerConfig", "fit_sampler",
    "SemParams", "condition", "sem_covariance",
]
