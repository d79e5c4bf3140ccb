"""Greedy transition-based dependency parsing trained by imitation or
policy gradients, with tooling to dissect where greedy decoding goes wrong."""

from .treebank import (
    DepTree,
    Sentence,
    Token,
    TreebankError,
    is_projective,
    is_punctuation,
    load_conll,
    write_conll,
)
from .transitions import (
    Action,
    ArcEager,
    ArcStandard,
    Configuration,
    IllegalActionError,
    OracleError,
    SwapStandard,
    SYSTEM_IDS,
    TransitionSystem,
    extract_tree,
    initial_config,
    make_system,
    projective_order,
)
from .dynamic_oracle import DynamicOracle, exhaustive_min_loss
from .model import (
    Gradients,
    Model,
    Vocab,
    extract_features,
    load_pretrained_embeddings,
    masked_softmax,
    normalize_word,
)
from .decode import (
    DecodeError,
    EvalReport,
    Step,
    Trajectory,
    evaluate,
    greedy_parse,
    replay,
    sentence_scores,
)
from .training import (
    RLConfig,
    Rollout,
    TrajectoryMemory,
    apg_gradient,
    reinforce_gradient,
    sample_trajectories,
    train_rl,
    train_supervised,
    trajectory_log_prob,
)
from .error_analysis import (
    PropagationReport,
    RepairRecord,
    aggregate,
    alternative_propagation,
    analyze,
    analyze_sentence,
    detect_decision_errors,
    repair_parse,
    trace_costs,
)
from .synthetic import (
    grammar_corpus,
    random_projective_corpus,
    random_tree_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ArcEager",
    "ArcStandard",
    "Configuration",
    "DecodeError",
    "DepTree",
    "DynamicOracle",
    "EvalReport",
    "Gradients",
    "IllegalActionError",
    "Model",
    "OracleError",
    "PropagationReport",
    "RLConfig",
    "RepairRecord",
    "Rollout",
    "SYSTEM_IDS",
    "Sentence",
    "Step",
    "SwapStandard",
    "Token",
    "Trajectory",
    "TrajectoryMemory",
    "TransitionSystem",
    "TreebankError",
    "Vocab",
    "aggregate",
    "alternative_propagation",
    "analyze",
    "analyze_sentence",
    "apg_gradient",
    "detect_decision_errors",
    "evaluate",
    "exhaustive_min_loss",
    "extract_features",
    "extract_tree",
    "grammar_corpus",
    "greedy_parse",
    "initial_config",
    "is_projective",
    "is_punctuation",
    "load_conll",
    "load_pretrained_embeddings",
    "make_system",
    "masked_softmax",
    "normalize_word",
    "projective_order",
    "random_projective_corpus",
    "random_tree_corpus",
    "reinforce_gradient",
    "repair_parse",
    "replay",
    "sample_trajectories",
    "sentence_scores",
    "trace_costs",
    "train_rl",
    "train_supervised",
    "trajectory_log_prob",
    "write_conll",
]
