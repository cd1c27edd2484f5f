"""Bayesian joint modelling of single-inspection count and status data.

A cohort observed once per subject yields a current count of a recurring
event and a current status of a terminal event.  This package fits the
shared-frailty joint model for such data: semiparametric baselines tied
to the distinct monitoring times, log-linear covariate effects on both
processes, and a unit-mean gamma frailty whose variance measures the
dependence.  Posterior computation is adaptive random-walk Metropolis
seeded at the posterior mode; diagnostics cover model comparison (DIC,
LPML), case influence (Kullback-Leibler divergence), and convergence
(PSRF, effective sample size).  A simulation engine reproduces standard
operating-characteristic studies, and a command line wraps the lot.
"""

from .diagnostics import (
    KL_FLAG_THRESHOLD,
    InfluenceReport,
    compute_influence,
    cpo,
    deviance,
    dic,
    ess_and_acf,
    gelman_rubin,
    kl_influence,
    lpml,
)
from .dataio import (
    read_chain,
    read_dataset_csv,
    read_mcmc_json,
    read_prior_json,
    read_scenario_json,
    write_chain,
    write_dataset_csv,
    write_replication_report,
    write_summary,
)
from .estimation import (
    FitSummary,
    baseline_estimates,
    bayes_estimates,
    credible_interval,
    summarize,
)
from .model import (
    BaselineEstimates,
    Dataset,
    NumericError,
    Observation,
    ParamVector,
    delta_increments,
    eval_lambda10,
    eval_lambda20,
    log_likelihood,
    log_likelihood_term,
    log_likelihood_terms,
    marginal_mean,
    marginal_survival,
)
from .priors import PriorSpec, ar1_correlation, log_posterior, log_prior
from .sampler import (
    Chain,
    MCMCConfig,
    find_map,
    observed_information,
    run_adaptive_mh,
    run_fit,
)
from .simulate import (
    DESK_MCMC,
    FIXED_GRID,
    PAPER_MCMC,
    ReplicationReport,
    Scenario,
    default_priors,
    replicate_study,
    simulate_dataset,
)

__version__ = "0.1.0"
