"""Expectation-realization metaphor detection toolkit."""

from .corpus import (
    DatasetStats,
    IngestResult,
    TargetInstance,
    compute_stats,
    ingest,
    lemmatize,
    load_canonical,
    save_canonical,
)
from .encoding import (
    EncodedPair,
    HFTokenizerAdapter,
    SimpleSubwordTokenizer,
    encode_pair,
)
from .errors import ERDetectError
from .estimator import ERClassifier, check_instances
from .evaluation import (
    ConfusionCounts,
    RunReport,
    confusion_counts,
    emit_report,
    ensemble,
    micro_average,
    paired_ttest,
    prf,
)
from .model import (
    EncoderConfig,
    ERNetwork,
    HeadConfig,
    InteractionHead,
    Prediction,
    RSPVNetwork,
    TransformerEncoder,
    forward_er,
    forward_rspv,
    load_checkpoint,
    save_checkpoint,
)
from .splits import (
    FoldPlan,
    LemmaDisjointKFold,
    NovelSubset,
    WithinDistributionKFold,
    build_novel_subset,
    build_ood_folds,
    build_wid_folds,
    novel_eval_guard,
)
from .training import (
    LossConfig,
    LossTerms,
    ScheduleConfig,
    compute_loss,
    lr_at_step,
    train_run,
    tune_hyperparameters,
)

__version__ = "0.1.0"

__all__ = [
    "ConfusionCounts",
    "DatasetStats",
    "EncodedPair",
    "EncoderConfig",
    "ERClassifier",
    "ERDetectError",
    "ERNetwork",
    "FoldPlan",
    "HeadConfig",
    "HFTokenizerAdapter",
    "IngestResult",
    "InteractionHead",
    "LemmaDisjointKFold",
    "LossConfig",
    "LossTerms",
    "NovelSubset",
    "Prediction",
    "RSPVNetwork",
    "RunReport",
    "ScheduleConfig",
    "SimpleSubwordTokenizer",
    "TargetInstance",
    "TransformerEncoder",
    "WithinDistributionKFold",
    "build_novel_subset",
    "build_ood_folds",
    "build_wid_folds",
    "check_instances",
    "compute_loss",
    "compute_stats",
    "confusion_counts",
    "emit_report",
    "encode_pair",
    "ensemble",
    "forward_er",
    "forward_rspv",
    "ingest",
    "lemmatize",
    "load_canonical",
    "load_checkpoint",
    "lr_at_step",
    "micro_average",
    "novel_eval_guard",
    "paired_ttest",
    "prf",
    "save_canonical",
    "save_checkpoint",
    "train_run",
    "tune_hyperparameters",
]
