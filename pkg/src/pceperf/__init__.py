"""Polynomial-chaos surrogates and robustness analysis for performance models."""

from .errors import (
    ConfigError,
    DatasetFormatError,
    DatasetLookupError,
    DegenerateMeanError,
    DegenerateVarianceError,
    DomainError,
    EvaluationError,
    InstabilityError,
    InsufficientSamplesError,
    ModelFileError,
    NumericalError,
    PcePerfError,
    RankDeficiencyError,
    SizeLimitError,
    UnderdeterminedError,
    UnsupportedDegreeError,
)
from .inputspace import (
    Beta,
    Discrete,
    Exponential,
    Gamma,
    InputParameter,
    Normal,
    ProblemSpec,
    Triangular,
    Uniform,
    sample_germ,
    sample_physical,
)
from .montecarlo import McConfig, McResult, run_mc
from .orthopoly import (
    PolyFamily,
    evaluate_orthonormal,
    gauss_rule,
    generalized_laguerre,
    hermite,
    jacobi,
    laguerre,
    legendre,
)
from .pce import (
    BasisSet,
    MomentReport,
    PceModel,
    SelectionReport,
    fit_projection,
    fit_regression,
    load_model,
    moments,
    predict,
    save_model,
    select_degree,
    total_degree_basis,
)
from .quadrature import QuadratureRuleND, integrate, smolyak_grid, tensor_grid
from .robustness import (
    LooReport,
    NoiseRow,
    RobustnessReport,
    add_noise,
    cov,
    kde_grid,
    kde_pdf,
    loo_error,
    noise_sweep,
    robustness_report,
)
from .sysmodel import (
    ClosedNetworkSpec,
    MvaResult,
    Station,
    mm1_metrics,
    mva_solve,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "PcePerfError",
    "ConfigError",
    "DatasetFormatError",
    "ModelFileError",
    "NumericalError",
    "UnsupportedDegreeError",
    "SizeLimitError",
    "DomainError",
    "UnderdeterminedError",
    "RankDeficiencyError",
    "InsufficientSamplesError",
    "DegenerateMeanError",
    "DegenerateVarianceError",
    "EvaluationError",
    "InstabilityError",
    "DatasetLookupError",
    # input space
    "Normal",
    "Uniform",
    "Beta",
    "Exponential",
    "Gamma",
    "Triangular",
    "Discrete",
    "InputParameter",
    "ProblemSpec",
    "sample_germ",
    "sample_physical",
    # polynomials and quadrature
    "PolyFamily",
    "hermite",
    "legendre",
    "jacobi",
    "laguerre",
    "generalized_laguerre",
    "evaluate_orthonormal",
    "gauss_rule",
    "QuadratureRuleND",
    "tensor_grid",
    "smolyak_grid",
    "integrate",
    # surrogate
    "BasisSet",
    "PceModel",
    "MomentReport",
    "SelectionReport",
    "total_degree_basis",
    "fit_regression",
    "fit_projection",
    "predict",
    "moments",
    "select_degree",
    "save_model",
    "load_model",
    # monte carlo
    "McConfig",
    "McResult",
    "run_mc",
    # robustness
    "RobustnessReport",
    "LooReport",
    "NoiseRow",
    "cov",
    "robustness_report",
    "loo_error",
    "add_noise",
    "noise_sweep",
    "kde_grid",
    "kde_pdf",
    # system models
    "mm1_metrics",
    "Station",
    "ClosedNetworkSpec",
    "MvaResult",
    "mva_solve",
]
