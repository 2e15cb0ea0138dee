"""Hyperparameter tuning for a graph-augmented retrieval QA pipeline."""

from __future__ import annotations

from .space import PipelineConfig, SearchSpace, baseline_config, default_search_space, validate_config
from .tpe import Study, TPESettings, optimize, suggest
from .runner import StudySettings, run_study, run_trial

__all__ = [
    "PipelineConfig",
    "SearchSpace",
    "Study",
    "StudySettings",
    "TPESettings",
    "baseline_config",
    "default_search_space",
    "optimize",
    "run_study",
    "run_trial",
    "suggest",
    "validate_config",
]
__version__ = "0.1.0"
