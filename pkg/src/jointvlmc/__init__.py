"""Joint estimation of two variable-length Markov chains sharing contexts."""

from .counts import CountTrie, build_count_trie, default_depth
from .estimators import (EstimationResult, ScoreTable, SingleFit, fit_joint, fit_single,
                         oracle_fit_joint, validate_partition)
from .scoring import (JointPartition, PenaltyConfig, criterion, kt_joint_log_prob,
                      kt_log_prob, kt_bound_gap, log_ml_pooled, log_ml_term,
                      pseudo_log_likelihood)
from .evaluation import ExperimentConfig, load_config, run_experiment, sweep_lambda
from .seqio import Alphabet, Sequence, load_sequence
from .vlmc import ProbabilisticContextTree, embed_markov, kl_rate, sample

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "build_count_trie", "CountTrie", "criterion", "default_depth",
    "embed_markov", "EstimationResult", "ExperimentConfig", "fit_joint", "fit_single",
    "JointPartition", "kl_rate", "kt_bound_gap", "kt_joint_log_prob", "kt_log_prob",
    "load_config", "load_sequence", "log_ml_pooled", "log_ml_term", "oracle_fit_joint",
    "PenaltyConfig", "ProbabilisticContextTree", "pseudo_log_likelihood", "run_experiment",
    "sample", "ScoreTable", "Sequence", "SingleFit", "sweep_lambda", "validate_partition",
]
