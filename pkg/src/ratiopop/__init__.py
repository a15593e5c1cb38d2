"""Population size estimation from zero-truncated frequency counts.

The main estimator regresses the log ratios ``log((x+1) f_{x+1} / f_x)`` on
``x`` by weighted least squares and extrapolates to ``x = 0``. Competing
estimators (hyperbolic model, Chao, Chao-Bunge, zero-truncated negative
binomial ML), standard errors, goodness of fit and simulation tools are
included.
"""

from .datasets import DATASETS, load_dataset, resolve_table
from .estimators import (
    EstimateResult,
    NBParams,
    chao_bunge_estimate,
    chao_estimate,
    default_cutoff,
    hm_estimate,
    implied_nb_params,
    wlrm_estimate,
    ztnb_mle_estimate,
)
from .freq_model import (
    FrequencyTable,
    FrequencyTableError,
    RatioPoints,
    format_frequency_table,
    parse_frequency_table,
    ratio_points,
    read_frequency_table,
    truncate,
)
from .inference import (
    BootstrapResult,
    GofResult,
    chisq_pvalue,
    gof_chisq,
    parametric_bootstrap,
    variance_wlrm,
)
from .simulation import (
    EstimatorConfig,
    StudyReport,
    StudySpec,
    run_bias_study,
    run_se_study,
    sample_nb_population,
    truncation_sweep,
)
from .wls import Design, RegressionFit, WeightScheme, covariance_diagonal, covariance_full, wls_fit

__version__ = "0.1.0"
