"""collapse-lab: two engines for class-imbalanced CE feature learning.

An analytic engine constructs the closed-form global minimizer of the
regularized cross-entropy factorization with entrywise-nonnegative features,
and a projected first-order solver minimizes the same objective numerically;
five collapse metrics quantify the agreement between the two.
"""

from ._kernels import active_backend
from .analysis import (
    CollapseReport,
    SeliComparison,
    TwoGroupSpec,
    classifier_angles,
    classifier_gram,
    collapse_report,
    m_ratio_limit,
    norm_ratios,
    seli_compare,
)
from .geometry import (
    ClosedFormGeometry,
    ProblemSpec,
    closed_form_geometry,
    closed_form_loss,
    margin_constant,
    margin_constants,
)
from .metrics import ClassStatistics, MetricsReport, class_statistics, report
from .solver import (
    DivergenceError,
    SolverConfig,
    SolverState,
    Trajectory,
    gradients,
    init,
    objective,
    projected_residual,
    run,
    run_best_of,
)

__version__ = "0.1.0"

__all__ = [
    "ClassStatistics",
    "ClosedFormGeometry",
    "CollapseReport",
    "DivergenceError",
    "MetricsReport",
    "ProblemSpec",
    "SeliComparison",
    "SolverConfig",
    "SolverState",
    "Trajectory",
    "TwoGroupSpec",
    "active_backend",
    "class_statistics",
    "classifier_angles",
    "classifier_gram",
    "closed_form_geometry",
    "closed_form_loss",
    "collapse_report",
    "gradients",
    "init",
    "m_ratio_limit",
    "margin_constant",
    "margin_constants",
    "norm_ratios",
    "objective",
    "projected_residual",
    "report",
    "run",
    "run_best_of",
    "seli_compare",
]
