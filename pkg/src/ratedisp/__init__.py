"""Rate-distortion dispersion toolkit."""
from .codebook_lab import (
    Codebook,
    CoverageResult,
    converse_rate_bound,
    coverage,
    exact_min_code,
    greedy_cover_code,
    type_union_code,
    union_recipe_redundancy,
)
from .dispersion import (
    DispersionReport,
    dispersion_report,
    dispersion_via_derivatives,
    dispersion_via_exponent,
    dispersion_via_tilted,
    estimate_d0,
    fit_exponent_curvature,
    hamming_dispersion,
    jump_suspected,
    lossless_dispersion,
)
from .errors import *  # noqa: F401,F403
from .exponent import ExponentSolution, exponent, exponent_curve, max_rdf
from .finite_blocklength import (
    berry_esseen_halfwidth,
    berry_esseen_probability_halfwidth,
    lemma2_check,
    normal_approx_rate,
    q_function,
    q_inverse,
    rate_curve,
    rate_redundancy_oracle,
)
from .gaussian import (
    GaussianSpec,
    chi2_tail,
    chi2_tail_inverse,
    gaussian_achievable_rate,
    gaussian_converse_rate,
    gaussian_curve_csv,
    gaussian_dispersion,
    gaussian_exponent,
    gaussian_normal_approx,
    gaussian_rdf,
    geometric_blocklengths,
    sphere_excess,
)
from .rd_solver import (
    RdfEvaluator,
    RdSolution,
    mutual_information,
    rd_at_distortion,
    rd_at_slope,
    rdf_value,
)
from .source_model import (
    DiscreteSource,
    DistortionSpec,
    TypeAtlas,
    divergence,
    entropy,
    enumerate_types,
    load_problem,
    parse_problem,
    validate_source,
)

__version__ = "0.1.0"
