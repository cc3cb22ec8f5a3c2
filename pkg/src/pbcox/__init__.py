"""Cox proportional-hazards fitting with an exact Poisson-binomial tie
likelihood, the classical tie corrections, and simulation/analysis
harnesses for comparing them."""

from ._backend import USING_NUMBA, backend_name
from .analysis import (
    DEFAULT_TAUS,
    TauSweepRecord,
    apl_goodness,
    estimation_discrepancy,
    scale_times,
    sum_squared_hazards,
    tau_sweep,
)
from .estimation import (
    FitResult,
    WaldIntervals,
    baseline_breslow,
    baseline_efron,
    baseline_nelson_aalen,
    fit_breslow,
    fit_efron,
    fit_pb,
    update_baseline_pb,
    wald_ci,
)
from .likelihoods import (
    LikelihoodEvaluation,
    breslow_information,
    breslow_score,
    efron_information,
    efron_score,
    event_prob,
    log_apl,
    log_pl_breslow,
    log_pl_cox_correction,
    log_pl_efron,
    log_pl_kp_correction,
)
from .pb_kernel import (
    PBResult,
    lecam_bound,
    pb_log_pmf,
    pb_pmf,
    pb_pmf_conv,
    pb_pmf_dft,
    pb_pmf_enum,
    pb_pmf_poisson,
    pmf_vector,
)
from .simulation import (
    METHODS,
    MethodSummary,
    SimulationConfig,
    SimulationSummary,
    generate_replicate,
    run_simulation,
)
from .survival import (
    RiskStructure,
    StudyDesignWarning,
    SurvivalDataset,
    build_risk_structure,
    group_times,
    load_csv,
    standardize_covariates,
)

__version__ = "0.1.0"
