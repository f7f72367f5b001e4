"""Numerical library: model, shape, closed-form MLE, Firth correction, probabilities."""
from .firth import (
    design_moments, firth_correction, firth_correction_trace, firth_solve,
    modified_score, q_matrices, score,
)
from .mle import interpolation_check, mle, mle_direct, mle_tilde
from .model import (
    d_optimal_design, d_optimal_x2, eta, eta_gradient, fisher_information,
    from_tilde, theta2_for_dopt_x2, to_tilde,
)
from .prob import augmentation_point, power_function, shape_probabilities, x2_for_alpha
from .shape import classify, limiting_fit, reduce

__all__ = [
    "augmentation_point", "classify", "d_optimal_design", "d_optimal_x2",
    "design_moments", "eta", "eta_gradient", "firth_correction", "firth_correction_trace",
    "firth_solve", "fisher_information", "from_tilde", "interpolation_check",
    "limiting_fit", "mle", "mle_direct", "mle_tilde", "modified_score",
    "power_function", "q_matrices", "reduce", "score", "shape_probabilities",
    "theta2_for_dopt_x2", "to_tilde", "x2_for_alpha",
]
