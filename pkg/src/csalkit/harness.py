"""Synthetic benchmark harness for the selection strategies.

Generates labeled Gaussian-mixture banks, scores query sets with a
1-nearest-neighbor label-efficiency proxy plus geometric coverage
diagnostics, runs strategy x budget x seed grids, and renders the result
as CSV, JSON, or markdown tables.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bank import FeatureBank, Manifest
from .errors import BudgetOutOfRange, DimensionMismatch, EmptyQuery, IoFailure
from .geometry import cross_distances
from .rng import mix_seeds
from .strategies import StrategyConfig, run_strategy

REPORT_COLUMNS = (
    "strategy",
    "budget_fraction",
    "M",
    "seed",
    "proxy_accuracy",
    "covering_radius",
    "mean_min_distance",
    "class_coverage",
    "class_entropy",
    "foreground_fraction",
)

_MASK64 = (1 << 64) - 1

_MEAN_CLEARANCE = 1.2
_MEAN_ATTEMPTS = 1000


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a labeled isotropic Gaussian mixture.

    ``class_separation`` is the distance between adjacent class means in
    units of ``within_class_sd``, so separation 4 keeps roughly two
    standard deviations of margin on each side of the midpoint.
    """

    n_classes: int
    samples_per_class: int
    dim: int
    class_separation: float
    within_class_sd: float
    seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "samples_per_class", "dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.class_separation < 0:
            raise ValueError("class_separation must be >= 0")
        if self.within_class_sd <= 0:
            raise ValueError("within_class_sd must be > 0")

    @property
    def n_samples(self) -> int:
        return self.n_classes * self.samples_per_class


def default_mixture(seed: int = 0) -> SyntheticSpec:
    """Stock benchmark mixture: large enough to separate the strategies,
    small enough for seconds-scale runs."""
    return SyntheticSpec(
        n_classes=10,
        samples_per_class=100,
        dim=32,
        class_separation=4.0,
        within_class_sd=1.0,
        seed=seed,
    )


def generate_mixture(spec: SyntheticSpec) -> tuple[FeatureBank, list[int]]:
    """Draw a labeled bank from the mixture ``spec`` describes.

    Class means follow a random walk whose steps are isotropic Gaussian
    directions of length ``class_separation * within_class_sd``, so
    consecutive class means are exactly that far apart. Step directions
    are rejection-sampled until the new mean clears every earlier,
    non-consecutive mean by a margin beyond one step, so adjacent classes
    are always the closest pairs and the walk never folds back onto
    itself. Each sample is its class mean plus isotropic noise of scale
    ``within_class_sd``. The draw is a pure function of the spec. Rows
    are grouped by class and labels align with rows.
    """
    rng = np.random.default_rng(spec.seed & _MASK64)
    step = spec.class_separation * spec.within_class_sd
    means = np.zeros((spec.n_classes, spec.dim))
    for c in range(1, spec.n_classes):
        best = None
        best_clearance = -math.inf
        for _ in range(_MEAN_ATTEMPTS):
            direction = rng.normal(size=spec.dim)
            norm = float(np.linalg.norm(direction))
            if norm == 0.0:
                continue
            candidate = means[c - 1] + (step / norm) * direction
            if c == 1 or step == 0.0:
                best = candidate
                break
            clearance = float(
                np.linalg.norm(means[: c - 1] - candidate, axis=1).min()
            )
            if clearance > best_clearance:
                best = candidate
                best_clearance = clearance
            if clearance >= _MEAN_CLEARANCE * step:
                break
        if best is None:
            best = means[c - 1].copy()
            best[0] += step
        means[c] = best
    blocks = []
    labels: list[int] = []
    for c in range(spec.n_classes):
        noise = rng.normal(size=(spec.samples_per_class, spec.dim))
        blocks.append(means[c] + spec.within_class_sd * noise)
        labels.extend([c] * spec.samples_per_class)
    features = np.concatenate(blocks).astype(np.float32)
    width = len(str(spec.n_samples - 1))
    ids = tuple(f"syn{i:0{width}d}" for i in range(spec.n_samples))
    manifest = Manifest(
        source_model="synthetic-mixture",
        extra={
            "n_classes": str(spec.n_classes),
            "samples_per_class": str(spec.samples_per_class),
            "dim": str(spec.dim),
            "class_separation": str(spec.class_separation),
            "within_class_sd": str(spec.within_class_sd),
            "seed": str(spec.seed),
        },
    )
    bank = FeatureBank(features=features, sample_ids=ids, manifest=manifest)
    return bank, labels


def train_test_mixture(
    spec: SyntheticSpec,
) -> tuple[FeatureBank, list[int], FeatureBank, list[int]]:
    """Matched train and test banks of ``spec.n_samples`` rows each.

    Draws a single mixture with doubled samples per class and splits every
    class block in half, so the two banks share the exact class geometry
    while their noise draws stay independent.
    """
    doubled = replace(spec, samples_per_class=2 * spec.samples_per_class)
    bank, labels = generate_mixture(doubled)
    labels = np.asarray(labels)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in range(spec.n_classes):
        block = np.flatnonzero(labels == c)
        train_idx.extend(block[: spec.samples_per_class].tolist())
        test_idx.extend(block[spec.samples_per_class :].tolist())

    def subset(indices: list[int]) -> tuple[FeatureBank, list[int]]:
        sub = FeatureBank(
            features=bank.features[indices],
            sample_ids=tuple(bank.sample_ids[i] for i in indices),
            manifest=bank.manifest,
        )
        return sub, [int(labels[i]) for i in indices]

    train_bank, train_labels = subset(train_idx)
    test_bank, test_labels = subset(test_idx)
    return train_bank, train_labels, test_bank, test_labels


def _features64(bank) -> np.ndarray:
    features = getattr(bank, "features", bank)
    return np.asarray(features, dtype=np.float64)


def _query_indices(query) -> list[int]:
    indices = [int(i) for i in getattr(query, "indices", query)]
    if not indices:
        raise EmptyQuery("query contains no indices")
    return indices


def proxy_eval(
    train_bank,
    train_labels,
    query,
    test_bank,
    test_labels,
    metric: str = "euclidean",
) -> float:
    """Accuracy of a 1-nearest-neighbor predictor restricted to the
    queried training samples, evaluated on the test set.

    Distance ties between labeled samples resolve to the lowest labeled
    index. Serves as a desk-scale stand-in for training a downstream
    model on the selected annotations.
    """
    labeled = sorted(set(_query_indices(query)))
    train = _features64(train_bank)
    test = _features64(test_bank)
    if train.shape[1] != test.shape[1]:
        raise DimensionMismatch(
            f"train dim {train.shape[1]} != test dim {test.shape[1]}"
        )
    if len(train_labels) != train.shape[0]:
        raise DimensionMismatch(
            f"{len(train_labels)} train labels for {train.shape[0]} rows"
        )
    if len(test_labels) != test.shape[0]:
        raise DimensionMismatch(
            f"{len(test_labels)} test labels for {test.shape[0]} rows"
        )
    dists = cross_distances(test, train[labeled], metric)
    nearest = dists.argmin(axis=1)
    correct = sum(
        1
        for row, col in enumerate(nearest)
        if train_labels[labeled[int(col)]] == test_labels[row]
    )
    return correct / len(test_labels)


def coverage_metrics(bank, query, metric: str = "euclidean") -> dict[str, float]:
    """Exact covering radius (max over samples of the distance to the
    nearest queried sample) and its mean."""
    selected = sorted(set(_query_indices(query)))
    matrix = _features64(bank)
    mins = cross_distances(matrix, matrix[selected], metric).min(axis=1)
    return {
        "covering_radius": float(mins.max()),
        "mean_min_distance": float(mins.mean()),
    }


def class_balance(labels, query) -> dict[str, float]:
    """Distinct-label count and Shannon entropy (natural log) of the
    queried label histogram."""
    indices = _query_indices(query)
    counts = Counter(labels[i] for i in indices)
    total = sum(counts.values())
    entropy = -sum((c / total) * math.log(c / total) for c in counts.values())
    return {"class_coverage": len(counts), "class_entropy": float(entropy) + 0.0}


def foreground_fraction(bank, query) -> float | None:
    """Fraction of queried samples whose manifest foreground flag is set.

    The flag lives in ``manifest.extra["foreground"]`` as a string of one
    '0' or '1' character per row; banks without it yield None, and the
    harness never infers foreground content from the features themselves.
    """
    manifest = getattr(bank, "manifest", None)
    if manifest is None:
        return None
    flags = manifest.extra.get("foreground")
    if flags is None:
        return None
    n_rows = len(bank.sample_ids)
    if len(flags) != n_rows or set(flags) - {"0", "1"}:
        raise ValueError(
            f"foreground flag must be {n_rows} characters of 0/1, got {flags!r}"
        )
    indices = _query_indices(query)
    return sum(1 for i in indices if flags[i] == "1") / len(indices)


@dataclass(frozen=True)
class EvalRow:
    """One benchmark grid cell, or a per-(strategy, budget) aggregate when
    ``seed`` is None (metrics averaged over the seed list)."""

    strategy: str
    budget_fraction: float
    m: int
    seed: int | None
    proxy_accuracy: float
    covering_radius: float
    mean_min_distance: float
    class_coverage: float
    class_entropy: float
    foreground_fraction: float | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "budget_fraction": self.budget_fraction,
            "M": self.m,
            "seed": self.seed,
            "proxy_accuracy": self.proxy_accuracy,
            "covering_radius": self.covering_radius,
            "mean_min_distance": self.mean_min_distance,
            "class_coverage": self.class_coverage,
            "class_entropy": self.class_entropy,
            "foreground_fraction": self.foreground_fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalRow":
        seed = data["seed"]
        fg = data["foreground_fraction"]
        return cls(
            strategy=str(data["strategy"]),
            budget_fraction=float(data["budget_fraction"]),
            m=int(data["M"]),
            seed=None if seed is None else int(seed),
            proxy_accuracy=float(data["proxy_accuracy"]),
            covering_radius=float(data["covering_radius"]),
            mean_min_distance=float(data["mean_min_distance"]),
            class_coverage=data["class_coverage"],
            class_entropy=float(data["class_entropy"]),
            foreground_fraction=None if fg is None else float(fg),
        )


@dataclass(frozen=True)
class EvalReport:
    """Raw grid rows in generation order plus per-(strategy, budget)
    aggregate rows."""

    rows: tuple[EvalRow, ...]
    aggregates: tuple[EvalRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "aggregates", tuple(self.aggregates))


def _aggregate(group: list[EvalRow]) -> EvalRow:
    def mean(field: str) -> float:
        return math.fsum(getattr(r, field) for r in group) / len(group)

    fg = [r.foreground_fraction for r in group]
    return EvalRow(
        strategy=group[0].strategy,
        budget_fraction=group[0].budget_fraction,
        m=group[0].m,
        seed=None,
        proxy_accuracy=mean("proxy_accuracy"),
        covering_radius=mean("covering_radius"),
        mean_min_distance=mean("mean_min_distance"),
        class_coverage=mean("class_coverage"),
        class_entropy=mean("class_entropy"),
        foreground_fraction=(
            None if any(v is None for v in fg) else math.fsum(fg) / len(fg)
        ),
    )


def benchmark_matrix(
    spec: SyntheticSpec,
    strategies,
    budgets,
    seeds,
    metric: str = "euclidean",
) -> EvalReport:
    """Run every (strategy, budget, seed) cell of the grid.

    Each grid seed gets its own matched train/test bank pair (mixture seed
    derived from the spec seed and the grid seed, so cells share data
    exactly when they share a grid seed); the grid seed also seeds the
    strategy, and budget fractions resolve against the train bank size.
    Cells are independent of each other, and row order is fixed by grid
    order with the strategy loop outermost, never by completion order.
    Errors raised inside a cell propagate with the cell coordinates
    prepended.
    """
    strategies = [str(name) for name in strategies]
    budgets = [float(f) for f in budgets]
    seeds = [int(s) for s in seeds]
    if not strategies or not budgets or not seeds:
        raise ValueError("strategies, budgets, and seeds must be nonempty")
    for f in budgets:
        if not 0.0 < f <= 1.0:
            raise BudgetOutOfRange(f"budgets must be fractions in (0, 1], got {f}")

    data = {}
    for s in seeds:
        seeded = replace(spec, seed=mix_seeds(spec.seed, s))
        data[s] = train_test_mixture(seeded)

    rows: list[EvalRow] = []
    aggregates: list[EvalRow] = []
    for name in strategies:
        for f in budgets:
            group: list[EvalRow] = []
            for s in seeds:
                train_bank, train_labels, test_bank, test_labels = data[s]
                try:
                    qs = run_strategy(
                        name, train_bank, f, StrategyConfig(seed=s, metric=metric)
                    )
                    coverage = coverage_metrics(train_bank, qs, metric)
                    balance = class_balance(train_labels, qs)
                    row = EvalRow(
                        strategy=name,
                        budget_fraction=f,
                        m=len(qs.indices),
                        seed=s,
                        proxy_accuracy=proxy_eval(
                            train_bank, train_labels, qs, test_bank, test_labels, metric
                        ),
                        covering_radius=coverage["covering_radius"],
                        mean_min_distance=coverage["mean_min_distance"],
                        class_coverage=balance["class_coverage"],
                        class_entropy=balance["class_entropy"],
                        foreground_fraction=foreground_fraction(train_bank, qs),
                    )
                except Exception as err:
                    err.args = (
                        f"[strategy={name} budget_fraction={f} seed={s}] {err}",
                    )
                    raise
                group.append(row)
                rows.append(row)
            aggregates.append(_aggregate(group))
    return EvalReport(rows=tuple(rows), aggregates=tuple(aggregates))


def _csv_cell(value) -> str:
    return "" if value is None else str(value)


def render_csv(report: EvalReport) -> str:
    """Raw rows in generation order, then aggregates; aggregate rows leave
    the seed column empty."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in (*report.rows, *report.aggregates):
        data = row.to_dict()
        writer.writerow(_csv_cell(data[column]) for column in REPORT_COLUMNS)
    return buffer.getvalue()


def render_json(report: EvalReport) -> str:
    return json.dumps(
        {
            "rows": [row.to_dict() for row in report.rows],
            "aggregates": [row.to_dict() for row in report.aggregates],
        },
        indent=2,
    )


def render_markdown(report: EvalReport) -> str:
    """Strategy-by-budget table of mean proxy accuracy with a trailing
    per-strategy average column."""
    source = report.aggregates
    if not source:
        groups: dict[tuple[str, float], list[EvalRow]] = {}
        for row in report.rows:
            groups.setdefault((row.strategy, row.budget_fraction), []).append(row)
        source = tuple(_aggregate(group) for group in groups.values())
    budgets: list[float] = []
    names: list[str] = []
    lookup: dict[tuple[str, float], EvalRow] = {}
    for agg in source:
        if agg.budget_fraction not in budgets:
            budgets.append(agg.budget_fraction)
        if agg.strategy not in names:
            names.append(agg.strategy)
        lookup[(agg.strategy, agg.budget_fraction)] = agg
    header = ["strategy"] + [f"f={f}" for f in budgets] + ["average"]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + " --- |" * len(header),
    ]
    for name in names:
        cells = [lookup[(name, f)].proxy_accuracy for f in budgets]
        average = math.fsum(cells) / len(cells)
        rendered = [f"{value:.4f}" for value in (*cells, average)]
        lines.append("| " + " | ".join([name, *rendered]) + " |")
    return "\n".join(lines) + "\n"


_RENDERERS = {"csv": render_csv, "json": render_json, "markdown": render_markdown}


def emit_report(report: EvalReport, path, format: str = "csv") -> Path:
    """Write the report to ``path`` in the named format and return the
    path."""
    if not report.rows:
        raise ValueError("cannot emit an empty report")
    renderer = _RENDERERS.get(format)
    if renderer is None:
        raise ValueError(
            f"unknown report format {format!r}; expected one of {sorted(_RENDERERS)}"
        )
    path = Path(path)
    try:
        path.write_text(renderer(report), encoding="utf-8")
    except OSError as err:
        raise IoFailure(f"cannot write report to {path}: {err}") from err
    return path


def load_report_json(path) -> EvalReport:
    """Inverse of the JSON emitter; reproduces every row exactly."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise IoFailure(f"cannot read report from {path}: {err}") from err
    return EvalReport(
        rows=tuple(EvalRow.from_dict(row) for row in data["rows"]),
        aggregates=tuple(EvalRow.from_dict(row) for row in data["aggregates"]),
    )
