"""Agent-based simulation of first-past-the-post district elections and
likelihood-free calibration of the voter models against observed results."""

from .abc import (
    ABCConfig,
    CalibrationResult,
    ParamPrior,
    PriorSpec,
    abc_explore_exploit,
    abc_reject,
    calibrated_params,
    default_prior,
)
from .core import (
    ElectionOutcome,
    ElectorateSpec,
    SamplerState,
    TallyMatrix,
    constrained_sample,
    decide_outcome,
    largest_remainder,
    validate_spec,
)
from .errors import *  # noqa: F401,F403
from .io import ObservedElection, RunRecord, load_observed, read_runs, write_observed, write_runs
from .models import (
    MODELS,
    AgentTrace,
    DMParams,
    DPMParams,
    ECMParams,
    PCMParams,
    SIMParams,
    community_histogram,
    get_model,
    simulate,
    simulate_dm,
    simulate_dpm,
    simulate_ecm,
    simulate_pcm,
    simulate_sim,
)
from .stats import SummaryStats, distance, mean_summary, summarize

__version__ = "0.1.0"
