"""Multilingual polarization detection toolkit.

Corpus loading and statistics, stratified splitting, imbalance-aware
losses, linear binary-relevance classifiers on hashed character n-grams,
weighted probability ensembling, macro-F1 evaluation and post-hoc error
analysis (PR-gaps, label collapse, cross-task consistency and gating).
"""

__version__ = "0.1.0"

from .corpus import (
    LANGUAGES,
    MANIFEST_EXCLUDED,
    Dataset,
    LabelMatrix,
    Post,
    Subtask,
    dataset_stats,
    load_dataset,
    load_label_matrix,
    validate_against_reference,
    write_dataset,
    write_label_matrix,
)
from .ensemble import (
    DEFAULT_GRID,
    EnsembleConfig,
    ProbMatrix,
    WeightedProbabilityEnsemble,
    apply_threshold,
    combine,
    grid_search_alpha,
    load_prob_matrix,
    write_prob_matrix,
)
from .evaluation import (
    EvalReport,
    consistency_audit,
    detect_collapse,
    evaluate,
    gate,
    label_prf,
    macro_f1,
    per_language_report,
    pr_gap,
)
from .features import CharNgramHasher, FeatureSpace, featurize
from .losses import LossConfig, batch_loss, compute_pos_weights, focal, wbce
from .schedule import lr_multiplier
from .stratify import (
    IterativeStratifiedSplit,
    SplitSpec,
    iterative_stratified_split,
    split_dataset,
    stratified_split_binary,
)
from .trainer import (
    BinaryRelevanceClassifier,
    SharedMultiTaskClassifier,
    TrainConfig,
    load_model,
    predict_proba,
    save_model,
    train,
)
