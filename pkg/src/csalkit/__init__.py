"""Cold-start selection toolkit.

Given a bank of feature embeddings with no labels yet, pick which
samples to annotate first. The package covers the full loop: load and
validate feature banks, run one of eight selection strategies under a
fraction or count budget, and score selections on synthetic benchmarks.
"""

from .bank import (
    FeatureBank,
    Manifest,
    ValidationIssue,
    ValidationReport,
    load_feature_bank,
    normalize,
    save_feature_bank,
    validate,
)
from .geometry import (
    ClusterModel,
    KMeansConfig,
    cross_distances,
    kmeans,
    knn,
    pairwise_distances,
)
from .harness import (
    EvalReport,
    EvalRow,
    SyntheticSpec,
    benchmark_matrix,
    class_balance,
    coverage_metrics,
    default_mixture,
    emit_report,
    foreground_fraction,
    generate_mixture,
    load_report_json,
    proxy_eval,
    train_test_mixture,
)
from .strategies import (
    STRATEGY_NAMES,
    Budget,
    QuerySet,
    StrategyConfig,
    resolve_budget,
    run_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "Budget",
    "ClusterModel",
    "EvalReport",
    "EvalRow",
    "FeatureBank",
    "KMeansConfig",
    "Manifest",
    "QuerySet",
    "STRATEGY_NAMES",
    "StrategyConfig",
    "SyntheticSpec",
    "ValidationIssue",
    "ValidationReport",
    "benchmark_matrix",
    "class_balance",
    "coverage_metrics",
    "cross_distances",
    "default_mixture",
    "emit_report",
    "foreground_fraction",
    "generate_mixture",
    "kmeans",
    "knn",
    "load_feature_bank",
    "load_report_json",
    "normalize",
    "pairwise_distances",
    "proxy_eval",
    "resolve_budget",
    "run_strategy",
    "save_feature_bank",
    "train_test_mixture",
    "validate",
]
