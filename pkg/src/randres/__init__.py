"""Random ReLU feature networks and shift-reservoir echo state networks with importance-sampled readouts."""

__version__ = "0.1.0"

from .errors import (
                     ConfigError,
                     InsufficientWarmupError,
                     NonConvergenceError,
                     RandresError,
                     SingularSystemError,
                     SupportMismatchError,
)
from .feedback import JordanEsn, RiskSpec, build_jordan, esp_event_probability, risk_gap, run_jordan
from .ranfeat import (
                     RandomFeatureNet,
                     SparseSampler,
                     UniformBallSampler,
                     cstar_R,
                     cstar_uniform,
                     mse_vs_N,
                     oracle_readout,
                     ridge_readout,
                     sample_hidden,
                     universal_workflow,
)
from .representation import ReprDensity, build_repr, check_representation
from .reservoir import EsnSystem, ShiftReservoir, build_esn, build_shift, gaussian_esn_experiment, run_esn, run_linear
from .targets import (
                     ContractionTarget,
                     FourierTarget,
                     GaussianFunctionalTarget,
                     make_contraction_target,
                     make_gaussian_bump,
                     make_scaled_gaussian_bump,
                     make_zero_target,
)

__all__ = [
    "ConfigError", "ContractionTarget", "EsnSystem", "FourierTarget", "GaussianFunctionalTarget",
    "InsufficientWarmupError", "JordanEsn", "NonConvergenceError", "RandomFeatureNet", "RandresError",
    "ReprDensity", "RiskSpec", "ShiftReservoir", "SingularSystemError", "SparseSampler", "SupportMismatchError",
    "UniformBallSampler", "build_esn", "build_jordan", "build_repr", "build_shift", "check_representation",
    "cstar_R", "cstar_uniform", "esp_event_probability", "gaussian_esn_experiment", "make_contraction_target",
    "make_gaussian_bump", "make_scaled_gaussian_bump", "make_zero_target", "mse_vs_N", "oracle_readout",
    "ridge_readout", "risk_gap", "run_esn", "run_jordan", "run_linear", "sample_hidden", "universal_workflow",
]
