"""Two-stage one-class novelty detection over per-query minimum spanning trees."""

from .classifier import (
    DECIDED_STAGE1,
    DECIDED_STAGE2_EXCLUSIVE,
    DECIDED_STAGE2_FALLBACK,
    DECIDED_STAGE2_ZETA,
    LABEL_ABNORMAL,
    LABEL_NORMAL,
    LABEL_UNCERTAIN,
    FinalVerdict,
    PipelineResult,
    StageOneVerdict,
    ZetaInputs,
    build_abnormal_pool,
    run_pipeline,
    stage_one_classify,
    stage_one_distance,
    stage_two_resolve,
    write_verdicts_csv,
    zeta_for_class,
)
from .errors import (
    ClassUnavailableError,
    ConfigurationError,
    FeatureDataError,
    FeatureFormatError,
    OcmstError,
    PoolExhaustedError,
    UndefinedAucError,
)
from .evaluation import (
    ClassEvaluation,
    EvalReport,
    RocCurve,
    auc,
    confusion_counts,
    evaluate_split,
    roc_curve,
    sweep_gamma,
)
from .features import (
    ExperimentSplit,
    FeatureMatrix,
    make_one_class_split,
    read_feature_file,
    write_feature_file,
)
from .geometry import SegmentDistanceResult, euclidean_distance, segment_distance
from .mst import (
    ClassPool,
    MinSpanTree,
    ThresholdConfig,
    build_small_mst,
    select_gamma_nearest,
    threshold_from_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "ClassEvaluation",
    "ClassPool",
    "ClassUnavailableError",
    "ConfigurationError",
    "DECIDED_STAGE1",
    "DECIDED_STAGE2_EXCLUSIVE",
    "DECIDED_STAGE2_FALLBACK",
    "DECIDED_STAGE2_ZETA",
    "EvalReport",
    "ExperimentSplit",
    "FeatureDataError",
    "FeatureFormatError",
    "FeatureMatrix",
    "FinalVerdict",
    "LABEL_ABNORMAL",
    "LABEL_NORMAL",
    "LABEL_UNCERTAIN",
    "MinSpanTree",
    "OcmstError",
    "PipelineResult",
    "PoolExhaustedError",
    "RocCurve",
    "SegmentDistanceResult",
    "StageOneVerdict",
    "ThresholdConfig",
    "UndefinedAucError",
    "ZetaInputs",
    "auc",
    "build_abnormal_pool",
    "build_small_mst",
    "confusion_counts",
    "euclidean_distance",
    "evaluate_split",
    "make_one_class_split",
    "read_feature_file",
    "roc_curve",
    "run_pipeline",
    "segment_distance",
    "select_gamma_nearest",
    "stage_one_classify",
    "stage_one_distance",
    "stage_two_resolve",
    "sweep_gamma",
    "threshold_from_quantile",
    "write_feature_file",
    "write_verdicts_csv",
    "zeta_for_class",
]
