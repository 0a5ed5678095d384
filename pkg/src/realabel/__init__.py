"""Relabeling toolkit: ensemble label proposals, rater task orchestration,
confusion-aware answer aggregation, and set-based evaluation metrics."""

from .aggregation import (
    RaterModel,
    choose_operating_point,
    finalize_labels,
    majority_vote,
    precision_recall_curve,
    run_dawid_skene,
)
from .analysis import (
    AuditOutcome,
    ClassReport,
    aggregate_audit,
    ambiguous_classes,
    class_accuracy_curves,
    cooccurrence,
    make_audit_tasks,
    oracle_accuracy,
)
from .annotation import (
    RaterAnswer,
    SimulatedRaterProfile,
    TaskService,
    noiseless_profiles,
    simulate_raters,
)
from .datamodel import (
    ClassInfo,
    ClassManifest,
    GoldStandard,
    PredictionSet,
    ProposalSet,
    ReaLLabelSet,
    export_labels,
    export_predictions,
    ingest_labels,
    ingest_predictions,
    load_class_manifest,
    load_gold_standard,
    load_original_labels,
)
from .errors import (
    AnswerRejected,
    ContractError,
    IngestError,
    LeakageError,
    RealabelError,
    SubsetSearchError,
    UnknownIdError,
)
from .hierarchy import ClassHierarchy, load_hierarchy
from .metrics import (
    AccuracyReport,
    RegressionResult,
    accuracy_report,
    ensemble_logits,
    original_accuracy,
    preference_rate,
    real_accuracy,
    split_regression,
)
from .proposals import (
    PoolingConfig,
    SubsetSearchResult,
    generate_proposals,
    score_proposals,
    select_subset,
)
from .tasking import (
    AnnotationTask,
    AuditPayload,
    UnanimousSplit,
    filter_unanimous,
    split_tasks,
)
from .trainfix import (
    FoldAssignment,
    LossValue,
    assign_folds,
    clean_dataset,
    sigmoid_bce,
    softmax_ce,
)

__version__ = "0.1.0"
