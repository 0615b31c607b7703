"""Bayesian social relations models for fixed rank nomination network data."""
from .constraints import all_intervals, interval, is_member, validate_membership
from .core import MISSING, DesignData, Family, Interval, ScoreError, ScoreMatrix, SrmParams, canonicalize_scores
from .io import SurveyDataset, build_score_matrix, load_dataset, normal_score_transform
from .posterior import (PosteriorSample, comparison_table, concentration_ratio, effective_sample_size,
                        quantile_intervals)
from .sampler import ChainState, GibbsSampler, SamplerConfig, SamplerError, run_chain
from .simgen import ScenarioSpec, frn_transform, scenario_presets, simulate_network, simulate_srm
from .truncnorm import sample_truncated_normal

__version__ = "0.1.0"

__all__ = [
    "MISSING", "ChainState", "DesignData", "Family", "GibbsSampler", "Interval", "PosteriorSample",
    "SamplerConfig", "SamplerError", "ScenarioSpec", "ScoreError", "ScoreMatrix", "SrmParams", "SurveyDataset",
    "all_intervals", "build_score_matrix", "canonicalize_scores", "comparison_table", "concentration_ratio",
    "effective_sample_size", "frn_transform", "interval", "is_member", "load_dataset", "normal_score_transform",
    "quantile_intervals", "run_chain", "sample_truncated_normal", "scenario_presets", "simulate_network",
    "simulate_srm", "validate_membership",
]
