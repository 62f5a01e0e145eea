"""Numerical laboratory for stochastic cross-diffusion population systems.

Entropy-variable, positivity-preserving SPDE integration for
Shigesada-Kawasaki-Teramoto systems with spectrally truncated Wiener
noise, plus the estimators that monitor the model's structural
inequalities at desk scale.
"""

from .errors import (
    AsymmetricSupport,
    ConfigError,
    CycleInconsistent,
    DetailedBalanceViolated,
    LinearSolveFailed,
    NewtonDiverged,
    NonPositiveDensity,
    PositivityLost,
    SKTError,
    StepFailed,
)
from .grid import Grid, GridField, divergence_mobility, laplacian_form_rhs, neumann_laplacian
from .model import (
    SKTParameters,
    diffusion_matrix,
    dissipation_lower_bound,
    entropy_density,
    entropy_variable,
    find_reversible_measure,
    inverse_entropy_variable,
    mobility_matrix,
)
from .noise import (
    NoiseModel,
    NormalStream,
    build_noise_model,
    entropy_interaction_report,
    lipschitz_growth_report,
)
from .regularization import EntropyRegularizer
from .simulator import (
    EnsembleStats,
    InitialCondition,
    PathRecord,
    SimConfig,
    entropy_balance_report,
    run_ensemble,
    run_path,
)
from .spectral import SpectralBasis, build_eigenbasis
from .estimators import (
    NormSpec,
    ensemble_moment,
    mixed_norm,
    regularization_consistency_study,
    slobodeckij_seminorm,
)
from .config import parse_config

__version__ = "0.1.0"
