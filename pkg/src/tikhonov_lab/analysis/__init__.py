"""Distance functions, parameter choice rules and rate diagnostics."""

from .bounds import (
    ApproxKappaDiagnostic,
    KappaBoundReport,
    approx_kappa_diagnostic,
    kappa_upper_bound_check,
    richardson_limit,
)
from .choice import (
    AprioriParameterChoice,
    FixedParameterChoice,
    PhiParameterChoice,
    RatePrediction,
    choose_alpha_apriori,
    choose_alpha_phi,
    invert_monotone,
    phi,
    phi_inverse,
    predicted_rate,
    psi,
    psi_inverse,
)
from .distance import (
    DEFAULT_R_GRID,
    AviParams,
    DistanceTable,
    PowerLawDistance,
    asc_distance,
    asc_distance_table,
    avi_distance,
    avi_distance_table,
    concentration_trend,
    level_set_radius,
    preimage_radius,
)
from .rates import (
    RateFit,
    empirical_rate,
    fit_rate,
    holder_kappa,
    holder_mu_bound,
    majorant_rate_exponent,
    rates_lemma_bound,
    rates_lemma_constants,
    vi_to_avi_majorant,
)
