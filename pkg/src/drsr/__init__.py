"""Deep recurrent survival ranking: click simulation, hazard models and debiased training."""

from .data import (
    DocumentSets,
    LabeledQuery,
    SessionLog,
    build_document_sets,
    parse_svmlight,
    truncate_multiclick,
)
from .errors import (
    ConfigError,
    DegenerateSampleError,
    DimensionError,
    DomainError,
    DRSRError,
    InvalidSessionError,
    NumericError,
    ParseError,
)
from .evaluation import MetricReport, average_precision, evaluate_run, ndcg_at_k, position_curve
from .objectives import LossConfig, PairInstance, combined_objective, sample_pairs
from .simulator import SimConfig, analytic_click_rate, simulate_ccm, simulate_pbm
from .survival import HazardModel, HazardSequence, forward, init_model, rerank, score_relevance, survival_curves
from .trainer import TrainConfig, backward, finite_diff_gradient, train

__version__ = "0.1.0"
