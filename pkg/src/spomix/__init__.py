"""Synthetic potential outcomes for average and mixture treatment effects."""

__version__ = "0.1.0"

from .domain import (  # noqa: E402
    Dataset,
    MixtureOfEffects,
    MomentBundle,
    MomentSequence,
    SpoCoefficients,
    read_csv,
    split_by_treatment,
    validate_dataset,
    write_csv,
)
from .moments import condition_diagnostic, cross_moment, estimate_bundle, mean_vector  # noqa: E402
from .moment_problem import hankel, matrix_pencil, project_to_simplex, prony  # noqa: E402
from .spo import (  # noqa: E402
    ate,
    ate_via_pseudoinverse,
    first_moment_coeffs,
    next_moment_coeffs,
    recover_mte,
    response_moment_sequence,
)
from .synthetic import (  # noqa: E402
    ModelSpec,
    appendix_model,
    exact_bundle,
    exact_ground_truth,
    paper_model,
    sample,
)
