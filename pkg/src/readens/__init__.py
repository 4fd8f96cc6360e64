"""Ordinal readability ensembling: head decoding, confidence-weighted fusion,
document aggregation, label re-scaling, and ordinal evaluation."""

from ._accel import BACKEND
from .aggregate import (
    AggregationPolicy,
    DocPrediction,
    aggregate_documents,
    aggregate_max,
    aggregate_mean,
    apply_override,
    skew_report,
)
from .decode import (
    CalibrationStats,
    DecodedPrediction,
    calibrate_regression,
    decode_all,
    decode_classification,
    decode_ordinal,
    decode_regression,
    fit_calibration,
    load_calibration,
)
from .fusion import FusedPrediction, fuse_all, fuse_pair, fuse_weighted
from .levels import (
    BAREC,
    SAMER,
    ClassWeights,
    CollapseMap,
    LevelScale,
    collapse,
    compute_class_weights,
    descale_label,
    scale_label,
    verify_roundtrip,
)
from .metrics import EvalReport, adjacent_accuracy, accuracy_at, avg_distance, full_report, qwk
from .records import GoldRecord, HeadOutput, doc_key, load_gold, load_heads, normalize_text

__version__ = "0.1.0"
