"""Budgeted query-set selection strategies over a feature bank.

Eight strategies share one dispatch surface: a uniform random baseline,
three cluster-based pickers (one selection per cluster of a budget-sized
k-means model), two max-min greedy spreads, a coverage-graph picker, and
a representativeness/diversity trade-off. All of them return a QuerySet
whose params map records every resolved hyperparameter.

Ties always break toward the lowest sample index. Cluster strategies
emit one pick per non-collapsed cluster in cluster order; if the model
collapsed duplicate centroids (budget above the distinct-point count),
the shortfall is filled with the lowest-index unselected samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetOutOfRange,
    BudgetTooSmall,
    InvalidDelta,
    UnknownStrategy,
)
from .geometry import (
    ClusterModel,
    KMeansConfig,
    canonical_metric,
    cross_distances,
    data_diameter,
    kmeans,
    pairwise_distances,
)
from .rng import Xoshiro256StarStar

STRATEGY_NAMES = (
    "random",
    "alps",
    "typiclust",
    "bal",
    "fps",
    "coreset",
    "probcover",
    "repdiv",
)

DEFAULT_TYPICALITY_KNN = 20
DEFAULT_PROBCOVER_QUANTILE = 0.02
DEFAULT_REPDIV_LAMBDA = 1.0


@dataclass(frozen=True)
class Budget:
    """Either a fraction of the training pool or an absolute count."""

    fraction: float | None = None
    count: int | None = None

    def __post_init__(self):
        if (self.fraction is None) == (self.count is None):
            raise ValueError("exactly one of fraction or count must be set")

    @classmethod
    def from_value(cls, value) -> "Budget":
        """Floats become fractions, integers become absolute counts."""
        if isinstance(value, Budget):
            return value
        if isinstance(value, bool):
            raise ValueError("budget cannot be a boolean")
        if isinstance(value, int):
            return cls(count=value)
        if isinstance(value, float):
            return cls(fraction=value)
        raise ValueError(f"cannot interpret {value!r} as a budget")


def resolve_budget(n_train: int, budget) -> int:
    """Resolve a budget to a concrete query count M.

    Fractions map to floor(fraction * n_train) clamped up to 1; counts
    pass through unchanged. The result always satisfies 1 <= M <= n_train.
    """
    if n_train < 1:
        raise BudgetOutOfRange(f"n_train must be >= 1, got {n_train}")
    budget = Budget.from_value(budget)
    if budget.fraction is not None:
        f = budget.fraction
        if not 0.0 < f <= 1.0:
            raise BudgetOutOfRange(f"budget fraction {f} outside (0, 1]")
        return max(1, math.floor(f * n_train))
    m = budget.count
    if not 1 <= m <= n_train:
        raise BudgetOutOfRange(f"budget count {m} outside [1, {n_train}]")
    return m


@dataclass(frozen=True)
class QuerySet:
    """Ordered selection of sample indices with provenance."""

    indices: tuple[int, ...]
    strategy: str
    seed: int
    params: dict[str, str]
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        if not self.indices:
            raise ValueError("a query set cannot be empty")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("query indices must be unique")
        if min(self.indices) < 0:
            raise ValueError("query indices must be nonnegative")
        if len(self.sample_ids) != len(self.indices):
            raise ValueError("sample_ids must parallel indices")

    def to_json(self) -> str:
        """Canonical JSON: sorted keys, no whitespace, stable float text."""
        return json.dumps(
            {
                "strategy": self.strategy,
                "seed": self.seed,
                "params": dict(self.params),
                "indices": list(self.indices),
                "sample_ids": list(self.sample_ids),
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "QuerySet":
        data = json.loads(text)
        return cls(
            indices=tuple(data["indices"]),
            strategy=str(data["strategy"]),
            seed=int(data["seed"]),
            params={str(k): str(v) for k, v in data["params"].items()},
            sample_ids=tuple(data["sample_ids"]),
        )


@dataclass(frozen=True)
class StrategyConfig:
    """Resolved knobs shared by the selection strategies."""

    metric: str = "euclidean"
    seed: int = 0
    typicality_knn: int = DEFAULT_TYPICALITY_KNN
    probcover_delta: float | None = None
    probcover_delta_quantile: float = DEFAULT_PROBCOVER_QUANTILE
    repdiv_lambda: float = DEFAULT_REPDIV_LAMBDA
    fps_probabilistic_seeding: bool = False
    kmeans_max_iters: int = 300
    kmeans_tol: float | None = None
    kmeans_n_restarts: int = 5

    def __post_init__(self):
        object.__setattr__(self, "metric", canonical_metric(self.metric))
        if self.typicality_knn < 1:
            raise ValueError(f"typicality_knn must be >= 1, got {self.typicality_knn}")
        if not 0.0 < self.probcover_delta_quantile <= 1.0:
            raise ValueError(
                f"probcover_delta_quantile {self.probcover_delta_quantile} "
                "outside (0, 1]"
            )
        if self.repdiv_lambda < 0.0:
            raise ValueError(f"repdiv_lambda must be >= 0, got {self.repdiv_lambda}")
        if self.probcover_delta is not None and self.probcover_delta <= 0.0:
            raise InvalidDelta(f"probcover_delta must be > 0, got {self.probcover_delta}")


def _matrix(bank) -> np.ndarray:
    features = getattr(bank, "features", bank)
    return np.asarray(features, dtype=np.float64)


_TIE_REL = 1e-9
_TIE_ABS = 1e-12


def _tie_argmin(values) -> int:
    """Lowest index whose value ties the minimum, where a tie tolerates
    float rounding: symmetric constructions (e.g. a pair's two members
    around their midpoint) are not exactly equal in binary arithmetic."""
    values = np.asarray(values, dtype=np.float64)
    best = float(values.min())
    scale = float(np.abs(values).max())
    threshold = best + _TIE_REL * abs(best) + _TIE_ABS * scale
    return int(np.flatnonzero(values <= threshold)[0])


def _tie_argmax(values) -> int:
    """Mirror of _tie_argmin for maxima; +inf sentinels tie with each other."""
    values = np.asarray(values, dtype=np.float64)
    best = float(values.max())
    if math.isinf(best):
        return int(np.flatnonzero(np.isinf(values) & (values > 0))[0])
    finite = values[np.isfinite(values)]
    scale = float(np.abs(finite).max()) if finite.size else 0.0
    threshold = best - _TIE_REL * abs(best) - _TIE_ABS * scale
    return int(np.flatnonzero(values >= threshold)[0])


def _check_m(m: int, n: int) -> None:
    if not 1 <= m <= n:
        raise BudgetOutOfRange(f"M={m} outside [1, {n}]")


def _ids_for(bank, indices) -> tuple[str, ...]:
    sample_ids = getattr(bank, "sample_ids", None)
    if sample_ids is None:
        return tuple(str(i) for i in indices)
    return tuple(sample_ids[i] for i in indices)


def _fill_lowest(picked: list[int], m: int, n: int) -> list[int]:
    """Append the lowest-index unselected samples until m picks exist."""
    if len(picked) >= m:
        return picked[:m]
    chosen = set(picked)
    for idx in range(n):
        if len(picked) == m:
            break
        if idx not in chosen:
            picked.append(idx)
            chosen.add(idx)
    return picked


def resolved_kmeans_tol(matrix, cfg: StrategyConfig) -> float:
    if cfg.kmeans_tol is not None:
        return cfg.kmeans_tol
    return 1e-4 * data_diameter(matrix)


def fit_budget_clusters(bank, m: int, cfg: StrategyConfig) -> ClusterModel:
    """The budget-sized k-means model shared by the cluster strategies.

    Deterministic in (bank, m, cfg), so callers can re-fit to inspect the
    exact model a selection used.
    """
    matrix = _matrix(bank)
    return kmeans(
        matrix,
        m,
        KMeansConfig(
            seed=cfg.seed,
            max_iters=cfg.kmeans_max_iters,
            tol=resolved_kmeans_tol(matrix, cfg),
            n_restarts=cfg.kmeans_n_restarts,
        ),
    )


def _kmeans_params(matrix, cfg: StrategyConfig) -> dict[str, str]:
    return {
        "metric": cfg.metric,
        "kmeans_seed": str(cfg.seed),
        "kmeans_max_iters": str(cfg.kmeans_max_iters),
        "kmeans_tol": repr(resolved_kmeans_tol(matrix, cfg)),
        "kmeans_n_restarts": str(cfg.kmeans_n_restarts),
    }


def select_random(bank, m: int, seed: int) -> QuerySet:
    """Uniform sample without replacement from the documented generator."""
    matrix = _matrix(bank)
    n = matrix.shape[0]
    _check_m(m, n)
    order = list(range(n))
    Xoshiro256StarStar(seed).shuffle(order)
    indices = order[:m]
    return QuerySet(
        indices=tuple(indices),
        strategy="random",
        seed=seed,
        params={},
        sample_ids=_ids_for(bank, indices),
    )


def select_alps(bank, m: int, cfg: StrategyConfig | None = None) -> QuerySet:
    """Budget-sized k-means; per cluster, the member nearest its centroid."""
    cfg = cfg or StrategyConfig()
    matrix = _matrix(bank)
    _check_m(m, matrix.shape[0])
    model = fit_budget_clusters(matrix, m, cfg)
    picked: list[int] = []
    for j in range(model.k):
        if j in model.collapsed:
            continue
        members = model.cluster_members(j)
        dists = cross_distances(
            matrix[members], model.centroids[j : j + 1], cfg.metric
        )[:, 0]
        picked.append(int(members[_tie_argmin(dists)]))
    indices = _fill_lowest(picked, m, matrix.shape[0])
    return QuerySet(
        indices=tuple(indices),
        strategy="alps",
        seed=cfg.seed,
        params=_kmeans_params(matrix, cfg),
        sample_ids=_ids_for(bank, indices),
    )


def _cluster_typicality(matrix, members, knn_cap, metric) -> np.ndarray:
    """Typicality of each cluster member: inverse mean distance to its K
    nearest neighbors inside the cluster; +inf when that mean is zero."""
    size = len(members)
    dists = cross_distances(matrix[members], matrix[members], metric)
    np.fill_diagonal(dists, np.inf)
    k_eff = min(knn_cap, size - 1)
    nearest = np.sort(dists, axis=1)[:, :k_eff]
    means = nearest.mean(axis=1)
    with np.errstate(divide="ignore"):
        return np.where(means == 0.0, np.inf, 1.0 / means)


def select_typiclust(bank, m: int, cfg: StrategyConfig | None = None) -> QuerySet:
    """Budget-sized k-means; per cluster, the most typical member, where
    typicality is the inverse mean distance to in-cluster neighbors."""
    cfg = cfg or StrategyConfig()
    matrix = _matrix(bank)
    _check_m(m, matrix.shape[0])
    model = fit_budget_clusters(matrix, m, cfg)
    picked: list[int] = []
    for j in range(model.k):
        if j in model.collapsed:
            continue
        members = model.cluster_members(j)
        if len(members) == 1:
            picked.append(int(members[0]))
            continue
        typicality = _cluster_typicality(
            matrix, members, cfg.typicality_knn, cfg.metric
        )
        picked.append(int(members[_tie_argmax(typicality)]))
    indices = _fill_lowest(picked, m, matrix.shape[0])
    params = _kmeans_params(matrix, cfg)
    params["typicality_knn"] = str(cfg.typicality_knn)
    return QuerySet(
        indices=tuple(indices),
        strategy="typiclust",
        seed=cfg.seed,
        params=params,
        sample_ids=_ids_for(bank, indices),
    )


def ccd_values(bank, model: ClusterModel, metric: str = "euclidean") -> np.ndarray:
    """Per-sample margin between the second-nearest and nearest centroids.

    Collapsed duplicate centroids are excluded (they would zero every
    margin); with fewer than two distinct centroids all margins are zero.
    """
    matrix = _matrix(bank)
    active = [j for j in range(model.k) if j not in model.collapsed]
    if len(active) < 2:
        return np.zeros(matrix.shape[0])
    dists = cross_distances(matrix, model.centroids[active], metric)
    two = np.partition(dists, 1, axis=1)
    return two[:, 1] - two[:, 0]


def select_bal(bank, m: int, cfg: StrategyConfig | None = None) -> QuerySet:
    """Budget-sized k-means; per cluster, the member with the smallest
    centroid-margin (nearest to a cluster boundary)."""
    cfg = cfg or StrategyConfig()
    matrix = _matrix(bank)
    _check_m(m, matrix.shape[0])
    if m < 2:
        raise BudgetTooSmall(
            f"centroid margins need at least 2 clusters, got M={m}"
        )
    model = fit_budget_clusters(matrix, m, cfg)
    margins = ccd_values(matrix, model, cfg.metric)
    picked: list[int] = []
    for j in range(model.k):
        if j in model.collapsed:
            continue
        members = model.cluster_members(j)
        picked.append(int(members[_tie_argmin(margins[members])]))
    indices = _fill_lowest(picked, m, matrix.shape[0])
    return QuerySet(
        indices=tuple(indices),
        strategy="bal",
        seed=cfg.seed,
        params=_kmeans_params(matrix, cfg),
        sample_ids=_ids_for(bank, indices),
    )


def _greedy_farthest(matrix, picked, min_dists, remaining_rounds, metric):
    """Extend picks with argmax-of-min-distance rounds, lowest index on ties."""
    selected = np.zeros(matrix.shape[0], dtype=bool)
    selected[picked] = True
    for _ in range(remaining_rounds):
        masked = np.where(selected, -np.inf, min_dists)
        nxt = int(np.argmax(masked))
        picked.append(nxt)
        selected[nxt] = True
        new_dists = cross_distances(matrix, matrix[nxt : nxt + 1], metric)[:, 0]
        np.minimum(min_dists, new_dists, out=min_dists)
    return picked


def select_fps(bank, m: int, cfg: StrategyConfig | None = None) -> QuerySet:
    """Farthest-point sampling from a seeded start.

    Default mode picks the first point uniformly, then repeatedly adds the
    point farthest from the selected set. Probabilistic mode draws the
    first ceil(M/2) picks with probability proportional to squared
    distance from the selected set, then finishes deterministically.
    """
    cfg = cfg or StrategyConfig()
    matrix = _matrix(bank)
    n = matrix.shape[0]
    _check_m(m, n)
    rng = Xoshiro256StarStar(cfg.seed)
    first = rng.next_below(n)
    picked = [first]
    min_dists = cross_distances(matrix, matrix[first : first + 1], cfg.metric)[:, 0]

    if cfg.fps_probabilistic_seeding:
        seeded_rounds = math.ceil(m / 2) - 1
        selected = np.zeros(n, dtype=bool)
        selected[first] = True
        for _ in range(seeded_rounds):
            weights = np.where(selected, 0.0, min_dists**2)
            total = float(weights.sum())
            if total <= 0.0:
                nxt = int(np.flatnonzero(~selected)[0])
            else:
                r = rng.next_float64() * total
                nxt = int(np.searchsorted(np.cumsum(weights), r, side="right"))
                nxt = min(nxt, n - 1)
            picked.append(nxt)
            selected[nxt] = True
            new_dists = cross_distances(matrix, matrix[nxt : nxt + 1], cfg.metric)[:, 0]
            np.minimum(min_dists, new_dists, out=min_dists)

    picked = _greedy_farthest(matrix, picked, min_dists, m - len(picked), cfg.metric)
    params = {
        "metric": cfg.metric,
        "fps_probabilistic_seeding": str(cfg.fps_probabilistic_seeding).lower(),
    }
    return QuerySet(
        indices=tuple(picked),
        strategy="fps",
        seed=cfg.seed,
        params=params,
        sample_ids=_ids_for(bank, picked),
    )


def select_coreset(bank, m: int, cfg: StrategyConfig | None = None) -> QuerySet:
    """k-center greedy: start at the point nearest the dataset mean, then
    repeatedly add the point farthest from the chosen centers."""
    cfg = cfg or StrategyConfig()
    matrix = _matrix(bank)
    n = matrix.shape[0]
    _check_m(m, n)
    mean = matrix.mean(axis=0)
    to_mean = cross_distances(matrix, mean[None, :], cfg.metric)[:, 0]
    first = int(np.argmin(to_mean))
    picked = [first]
    min_dists = cross_distances(matrix, matrix[first : first + 1], cfg.metric)[:, 0]
    picked = _greedy_farthest(matrix, picked, min_dists, m - 1, cfg.metric)
    return QuerySet(
        indices=tuple(picked),
        strategy="coreset",
        seed=cfg.seed,
        params={"metric": cfg.metric},
        sample_ids=_ids_for(bank, picked),
    )


def resolve_probcover_delta(bank, cfg: StrategyConfig) -> float:
    """The coverage radius: explicit override, else the configured quantile
    of the off-diagonal pairwise distances. A single-sample bank has no
    pairs; the radius defaults to 1.0 there (the graph is empty anyway)."""
    if cfg.probcover_delta is not None:
        if cfg.probcover_delta <= 0.0:
            raise InvalidDelta(f"delta must be > 0, got {cfg.probcover_delta}")
        return float(cfg.probcover_delta)
    matrix = _matrix(bank)
    n = matrix.shape[0]
    if n == 1:
        return 1.0
    dists = pairwise_distances(matrix, metric=cfg.metric)
    off_diag = dists[~np.eye(n, dtype=bool)]
    delta = float(np.quantile(off_diag, cfg.probcover_delta_quantile))
    if delta <= 0.0:
        raise InvalidDelta(
            f"quantile {cfg.probcover_delta_quantile} of pairwise distances "
            f"is {delta}; supply an explicit positive delta"
        )
    return delta


@dataclass(frozen=True)
class ProbcoverTrace:
    """Pick-by-pick record of a coverage-graph selection run."""

    delta: float
    picks: tuple[int, ...]
    uncovered_degrees: tuple[int, ...]
    covered_sizes: tuple[int, ...]


def probcover_trace(bank, m: int, cfg: StrategyConfig | None = None) -> ProbcoverTrace:
    """Run the coverage-graph selection and record each pick's counted
    uncovered out-degree plus the covered-set size after the pick."""
    cfg = cfg or StrategyConfig()
    matrix = _matrix(bank)
    n = matrix.shape[0]
    _check_m(m, n)
    delta = resolve_probcover_delta(matrix, cfg)
    dists = pairwise_distances(matrix, metric=cfg.metric)
    adjacency = dists < delta
    np.fill_diagonal(adjacency, False)
    base_degrees = adjacency.sum(axis=1)

    covered = np.zeros(n, dtype=bool)
    selected = np.zeros(n, dtype=bool)
    picks: list[int] = []
    degrees: list[int] = []
    covered_sizes: list[int] = []
    for _ in range(m):
        if covered.all():
            masked = np.where(selected, -1, base_degrees)
            pick = int(np.argmax(masked))
            degree = int(base_degrees[pick])
        else:
            uncovered_counts = adjacency[:, ~covered].sum(axis=1)
            masked = np.where(selected, -1, uncovered_counts)
            pick = int(np.argmax(masked))
            degree = int(uncovered_counts[pick])
        picks.append(pick)
        degrees.append(degree)
        selected[pick] = True
        covered[pick] = True
        covered[adjacency[pick]] = True
        covered_sizes.append(int(covered.sum()))
    return ProbcoverTrace(
        delta=delta,
        picks=tuple(picks),
        uncovered_degrees=tuple(degrees),
        covered_sizes=tuple(covered_sizes),
    )


def select_probcover(bank, m: int, cfg: StrategyConfig | None = None) -> QuerySet:
    """Coverage-graph selection: greedily pick the node covering the most
    still-uncovered neighbors within radius delta."""
    cfg = cfg or StrategyConfig()
    trace = probcover_trace(bank, m, cfg)
    params = {
        "metric": cfg.metric,
        "delta": repr(trace.delta),
        "delta_source": "explicit" if cfg.probcover_delta is not None else "quantile",
    }
    if cfg.probcover_delta is None:
        params["delta_quantile"] = repr(cfg.probcover_delta_quantile)
    return QuerySet(
        indices=trace.picks,
        strategy="probcover",
        seed=cfg.seed,
        params=params,
        sample_ids=_ids_for(bank, trace.picks),
    )


def select_repdiv(bank, m: int, cfg: StrategyConfig | None = None) -> QuerySet:
    """Greedy trade-off between representativeness (mean similarity to the
    unselected pool) and diversity (max similarity to the selected set)."""
    cfg = cfg or StrategyConfig()
    matrix = _matrix(bank)
    n = matrix.shape[0]
    _check_m(m, n)
    dists = pairwise_distances(matrix, metric=cfg.metric)
    d_max = float(dists.max())
    if d_max > 0.0:
        sims = 1.0 - dists / d_max
    else:
        sims = np.ones_like(dists)
    np.fill_diagonal(sims, 0.0)

    selected = np.zeros(n, dtype=bool)
    picked: list[int] = []
    for _ in range(m):
        unselected = ~selected
        pool = np.flatnonzero(unselected)
        others = unselected.sum() - 1
        if others > 0:
            representativeness = sims[:, unselected].sum(axis=1) / others
        else:
            representativeness = np.zeros(n)
        if picked:
            penalty = sims[:, selected].max(axis=1)
        else:
            penalty = np.zeros(n)
        scores = representativeness - cfg.repdiv_lambda * penalty
        masked = np.where(selected, -np.inf, scores)
        pick = int(np.argmax(masked))
        picked.append(pick)
        selected[pick] = True
    return QuerySet(
        indices=tuple(picked),
        strategy="repdiv",
        seed=cfg.seed,
        params={"metric": cfg.metric, "lambda": repr(cfg.repdiv_lambda)},
        sample_ids=_ids_for(bank, picked),
    )


_DISPATCH = {
    "alps": select_alps,
    "typiclust": select_typiclust,
    "bal": select_bal,
    "fps": select_fps,
    "coreset": select_coreset,
    "probcover": select_probcover,
    "repdiv": select_repdiv,
}


def run_strategy(name: str, bank, budget, cfg: StrategyConfig | None = None) -> QuerySet:
    """Resolve the budget and dispatch to the named strategy."""
    cfg = cfg or StrategyConfig()
    if name not in STRATEGY_NAMES:
        raise UnknownStrategy(
            f"unknown strategy {name!r}; expected one of {', '.join(STRATEGY_NAMES)}"
        )
    n = _matrix(bank).shape[0]
    m = resolve_budget(n, budget)
    if name == "random":
        return select_random(bank, m, cfg.seed)
    return _DISPATCH[name](bank, m, cfg)
