"""Subpopulation-aware crowd label aggregation."""

__version__ = "0.1.0"

from .data import (AnnotationSet, CompetenceTable, LabelSpace,
                   PosteriorTable, SubpopulationMap, ValidationError,
                   counts_summary, validate)
from .inference import FitConfig, FitResult, fit
from .imputation import ImputationPolicy, impute
from .baselines import BaselineResult, dawid_skene, mace, majority_vote
from .simulator import SimConfig, SyntheticWorld, generate, sweep_grid
from .metrics import (EvalReport, competence_correlation,
                      divisiveness_estimate, evaluate, jsd, subpop_accuracy)

__all__ = [
    "AnnotationSet", "BaselineResult", "CompetenceTable", "EvalReport",
    "FitConfig", "FitResult", "ImputationPolicy", "LabelSpace",
    "PosteriorTable", "SimConfig", "SubpopulationMap", "SyntheticWorld",
    "ValidationError", "competence_correlation", "counts_summary",
    "dawid_skene", "divisiveness_estimate", "evaluate", "fit", "generate",
    "impute", "jsd", "mace", "majority_vote", "subpop_accuracy",
    "sweep_grid", "validate",
]
