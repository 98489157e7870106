"""Forward-error bounds for feature-sketched logistic regression and GLMs,
an exact LP for the classification complexity measure, and supporting tools."""

from .bounds import (
    BoundReport,
    CrossEntropyReport,
    NonConvergenceError,
    coreset_size_estimate,
    cross_entropy_report,
    forward_error_report,
    glm_forward_error_report,
    lowrank_loss_gap,
    phi,
    report_from_fits,
    segment_constant_check,
)
from .datagen import (
    GenerativeConfig,
    generate_generative,
    load_csv,
    load_libsvm,
    random_instance,
    save_csv,
    save_libsvm,
    to_standard_form,
)
from .glm import DataSet, FitResult, GlmSpec, linear_glm, logistic_glm
from .linalg import ConvergenceError, least_squares, range_projector, spectral_norm, top_k_right_singular_vectors
from .lp import LinearProgram, simplex_solve
from .mu import MuResult, compute_mu, compute_mu_direct
from .sketch import (
    SketchMatrix,
    coordinate_sketch,
    low_rank_approx,
    pca_sketch,
    random_orthonormal_sketch,
    tightness_instance,
    top_coefficient_sketch,
)
from .solver import SeparableDataError, SolveConfig, fit_full, fit_glm, fit_glm_sketched, fit_sketched

__version__ = "0.1.0"
