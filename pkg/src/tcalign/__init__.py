"""tcalign: test-time correlation alignment for embedding classifiers.

Given test-domain embeddings and a linear softmax head, the toolkit selects
a high-certainty pseudo-source, solves for the linear transform that aligns
second-order statistics, and re-predicts through the aligned embeddings.
Synthetic shift generators and theory-validation experiments support
desk-scale verification of the mechanism.
"""

from .errors import (
    DegenerateLabels,
    DivergenceError,
    InsufficientSamples,
    InvalidConfig,
    InvalidInput,
    NumericalFailure,
    ParseError,
    SingularMatrix,
    TcaError,
)
from .head import PredictionBatch, SoftmaxHead, accuracy, load_head, predict, save_head, train_head
from .linalg import (
    CovarianceAccumulator,
    EigPair,
    correlation_distance,
    covariance,
    shrink,
    spd_power,
    sym_eig,
)
from .metrics import LinearFit, linear_fit_r2, spearman
from .pipeline import (
    AdaptConfig,
    AdaptReport,
    GroupRow,
    TraceResult,
    TraceRow,
    adapt_online,
    adapt_transductive,
    validate_alignment_trace,
    validate_uncertainty_groups,
)
from .pseudo_source import (
    BalancedSelection,
    BankEntry,
    PseudoSourceBank,
    batch_uncertainties,
    class_balanced_select,
    one_hot,
    prediction_uncertainty,
    pseudo_stats,
)
from .synth import LabeledBatch, NormalStream, ShiftDataset, gen_linear_shift, gen_nonlinear_shift
from .transform import (
    AlignmentTransform,
    SolverTrace,
    apply_transform,
    objective,
    objective_gradient,
    solve_closed_form,
    solve_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AdaptReport",
    "AlignmentTransform",
    "BalancedSelection",
    "BankEntry",
    "CovarianceAccumulator",
    "DegenerateLabels",
    "DivergenceError",
    "EigPair",
    "GroupRow",
    "InsufficientSamples",
    "InvalidConfig",
    "InvalidInput",
    "LabeledBatch",
    "LinearFit",
    "NormalStream",
    "NumericalFailure",
    "ParseError",
    "PredictionBatch",
    "PseudoSourceBank",
    "ShiftDataset",
    "SingularMatrix",
    "SoftmaxHead",
    "SolverTrace",
    "TcaError",
    "TraceResult",
    "TraceRow",
    "accuracy",
    "adapt_online",
    "adapt_transductive",
    "apply_transform",
    "batch_uncertainties",
    "class_balanced_select",
    "correlation_distance",
    "covariance",
    "gen_linear_shift",
    "gen_nonlinear_shift",
    "linear_fit_r2",
    "load_head",
    "objective",
    "objective_gradient",
    "one_hot",
    "predict",
    "prediction_uncertainty",
    "pseudo_stats",
    "save_head",
    "shrink",
    "solve_closed_form",
    "solve_gradient",
    "spd_power",
    "spearman",
    "sym_eig",
    "train_head",
    "validate_alignment_trace",
    "validate_uncertainty_groups",
]
