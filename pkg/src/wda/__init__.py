"""Wasserstein discriminant analysis.

Supervised linear dimensionality reduction that maximizes the ratio of
entropic-transport dispersion between classes over dispersion within
classes, optimized by projected gradient ascent over matrices with
orthonormal rows. Gradients flow through the transport plans by exact
differentiation of a fixed number of Sinkhorn scaling iterations.
"""

__version__ = "0.1.0"

from .autodiff import (
    KernelJacobian,
    ScalingJacobians,
    kernel_jacobian,
    plan_jacobian_apply,
    plan_jacobian_full,
    scaling_jacobians,
)
from .baselines import FdaModel, fda_fit, uniform_coupling_covariances
from .datasets import (
    LabeledDataset,
    append_noise,
    gen_toy,
    load_csv,
    save_csv,
    split_dataset,
)
from .errors import (
    CapacityError,
    DegenerateInputError,
    InvalidInputError,
    NumericalRangeError,
    ParseError,
    WdaError,
)
from .evaluation import (
    CsvDataSpec,
    ExperimentResult,
    ToyDataSpec,
    error_rate,
    experiment_to_csv,
    knn_predict,
    run_protocol,
)
from .iftgrad import ift_jacobian
from .objective import (
    ObjectiveState,
    WdaConfig,
    adaptive_lambdas,
    cross_covariance,
    evaluate,
    gradient,
    pair_keys,
    pair_lambda,
)
from .otcore import (
    SinkhornTrace,
    TransportPlan,
    cost_matrix,
    plan_to_csv,
    plan_to_json,
    regularized_distance,
    sinkhorn_plan,
    symmetric_scaling,
    trace_to_json,
)
from .stiefel import (
    FitReport,
    pca_init,
    project_stiefel,
    riemannian_gradient,
    wda_fit,
)

__all__ = [
    "CapacityError",
    "CsvDataSpec",
    "DegenerateInputError",
    "ExperimentResult",
    "FdaModel",
    "FitReport",
    "InvalidInputError",
    "KernelJacobian",
    "LabeledDataset",
    "NumericalRangeError",
    "ObjectiveState",
    "ParseError",
    "ScalingJacobians",
    "SinkhornTrace",
    "ToyDataSpec",
    "TransportPlan",
    "WdaConfig",
    "WdaError",
    "adaptive_lambdas",
    "append_noise",
    "cost_matrix",
    "cross_covariance",
    "error_rate",
    "evaluate",
    "experiment_to_csv",
    "fda_fit",
    "gen_toy",
    "gradient",
    "ift_jacobian",
    "kernel_jacobian",
    "knn_predict",
    "load_csv",
    "pair_keys",
    "pair_lambda",
    "pca_init",
    "plan_jacobian_apply",
    "plan_jacobian_full",
    "plan_to_csv",
    "plan_to_json",
    "project_stiefel",
    "regularized_distance",
    "riemannian_gradient",
    "run_protocol",
    "save_csv",
    "scaling_jacobians",
    "sinkhorn_plan",
    "split_dataset",
    "symmetric_scaling",
    "trace_to_json",
    "uniform_coupling_covariances",
    "wda_fit",
]
