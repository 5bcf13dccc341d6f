"""Causal discovery and intervention prioritization for survey tables."""

__version__ = "0.1.0"

from .baselines import correlation_screen, neutral_test, neutral_tests
from .effects import EffectConfig, estimate_intervention, hierarchy, partition_variables, rank_interventions
from .ges import GesOptions, run_ges
from .graph import (
    Dag,
    Pdag,
    ancestors,
    consistent_extension,
    cpdag_from_dag,
    d_separated,
    descendants,
    is_acyclic,
    meek_close,
    to_dot,
)
from .ingest import Dataset, VariableSpec, apply_schema, complete_cases, load_table, standardize
from .score import ScoreContext, compute_stats, delta_score, global_bic, local_bic
from .synth import likertize, random_dag, recovery_metrics, sample

__all__ = [name for name in dir() if not name.startswith("_")]
