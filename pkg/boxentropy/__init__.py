"""Generalized Schürmann entropy estimators, their exact oracles and Monte Carlo harness."""

__version__ = "0.1.0"

from boxentropy.errors import (  # noqa: E402
    BoxEntropyError,
    BudgetExceededError,
    ConfigError,
    DatasetFormatError,
    DomainError,
    GOverflowError,
    NumericalError,
    OutputIOError,
)
from boxentropy.estimators import (  # noqa: E402
    CountVector,
    EntropyEstimate,
    EstimatorConfig,
    EstimatorId,
    LeadingTerm,
    ParamVector,
    Regime,
    grassberger_entropy,
    naive_entropy,
    phi_entropy,
    schuermann_entropy,
)
from boxentropy.exact_oracle import (  # noqa: E402
    Distribution,
    enumerate_moments,
    exact_entropy,
    exact_estimator_bias,
    optimal_a,
)
from boxentropy.experiments import mc_estimate, safety_check, sweep_a  # noqa: E402
from boxentropy.sampling import SeedSpec, sample_counts  # noqa: E402

__all__ = [
    "__version__",
    "BoxEntropyError",
    "BudgetExceededError",
    "ConfigError",
    "CountVector",
    "DatasetFormatError",
    "Distribution",
    "DomainError",
    "EntropyEstimate",
    "EstimatorConfig",
    "EstimatorId",
    "GOverflowError",
    "LeadingTerm",
    "NumericalError",
    "OutputIOError",
    "ParamVector",
    "Regime",
    "SeedSpec",
    "enumerate_moments",
    "exact_entropy",
    "exact_estimator_bias",
    "grassberger_entropy",
    "mc_estimate",
    "naive_entropy",
    "optimal_a",
    "phi_entropy",
    "safety_check",
    "sample_counts",
    "schuermann_entropy",
    "sweep_a",
]
