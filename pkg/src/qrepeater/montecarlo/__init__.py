"""Monte Carlo oracle for the analytic rate formulas."""

from .engine import (
    AttemptRecord,
    Estimate,
    EstimatorReport,
    LinkProtocol,
    SimConfig,
    TrialRecord,
    TrialTable,
    run_chains,
    sample_geometric,
    simulate_postselected,
    simulate_two_link,
)
from .validation import (
    beta_grid,
    compare_cutoff_vs_exponential,
    estimate_attempt_statistics,
    estimate_beta,
    estimate_swap_averages,
    validate_tdif_distribution,
)
from .dump import read_trial_dump, write_trial_dump
