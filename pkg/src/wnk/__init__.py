"""Hermite-coefficient model of tempered distributions.

Characteristic functionals, tightness diagnostics and a Donsker-type
invariance principle for the white noise measure.
"""
from .hermite import (
    BasisConfig,
    TestFunction,
    eval_test_function,
    gh_rule,
    hermite_point,
    l2_norm_sq,
    project,
)
from .hilbert_scale import (
    Ball,
    DistributionVector,
    ball_contains,
    bound_witness,
    embedding_norm,
    exhaustion_index,
    exhaustion_radius,
    norm_dual,
    norm_primal,
    pairing,
)
from .charfun import (
    Dirac,
    Empirical,
    GaussianMixtureDual,
    TightnessReport,
    WhiteNoise,
    dirac_cf,
    empirical_cf,
    equicontinuity_modulus,
    finite_rank_gaussian_sample,
    fubini_check,
    gaussian_mixture_F,
    gram_psd_check,
    m_constant,
    sample_white_noise,
    white_noise_cf,
)
from .donsker import (
    GAUSSIAN,
    RADEMACHER,
    UNIFORM,
    CellAverages,
    ExperimentReport,
    Innovation,
    ProductIID,
    builtin_innovations,
    cell_averages,
    convergence_experiment,
    product_cf,
    rate_estimate,
    sample_pairing,
)

__version__ = "0.1.0"
