"""Query strategies: pick the batch to annotate each cycle.

Eight strategies share one calling convention: ``QUERY_STRATEGIES[name](ctx)``
returns exactly ``ctx.batch_size`` distinct indices from the unlabeled pool.
All tie-breaks are by lowest index so runs are bit-reproducible.

Uncertainty strategies (margin, entropy) score the probe's predicted
probabilities.  Diversity strategies (coreset, probcover, typiclust) work on
feature geometry.  Hybrids (badge, dropquery) combine both.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .cluster import kmeans, kmeanspp_select, min_sq_dists, sq_dists
from .dataset import EmbeddingDataset
from .errors import ConfigError, ValidationError
from .ips import PoolState, kcenter_greedy, typiclust_select
from .probe import ProbeParams, predict_proba

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrategyParams:
    """Per-strategy constants; defaults follow each strategy's usual setup."""

    probcover_delta: float | str = "auto"
    probcover_purity_threshold: float = 0.95
    dropquery_masks: int = 10
    dropquery_rate: float = 0.5
    typiclust_knn: int = 20
    typiclust_max_clusters: int = 500

    def validate(self) -> None:
        if self.probcover_delta != "auto":
            if not float(self.probcover_delta) > 0:
                raise ConfigError("probcover_delta must be positive or 'auto'")
        if not 0 < self.probcover_purity_threshold <= 1:
            raise ConfigError("probcover_purity_threshold must lie in (0, 1]")
        if self.dropquery_masks < 0:
            raise ConfigError("dropquery_masks must be non-negative")
        if not 0 < self.dropquery_rate < 1:
            raise ConfigError("dropquery_rate must lie in (0, 1)")
        if self.typiclust_knn < 1 or self.typiclust_max_clusters < 1:
            raise ConfigError("typiclust parameters must be positive")


@dataclass
class QueryContext:
    """Everything a strategy may look at when choosing a batch."""

    dataset: EmbeddingDataset
    pool: PoolState
    probe: ProbeParams
    batch_size: int
    rng: np.random.Generator
    params: StrategyParams

    def validate(self) -> None:
        if not 1 <= self.batch_size <= self.pool.unlabeled.size:
            raise ValidationError(
                f"batch_size must lie in [1, {self.pool.unlabeled.size}], "
                f"got {self.batch_size}"
            )


def score_entropy(probs) -> np.ndarray:
    """Predictive entropy -sum p ln p per row, with 0 ln 0 = 0."""
    probs = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1)


def score_margin(probs) -> np.ndarray:
    """Top-1 minus top-2 probability per row; small margin = uncertain."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[1] < 2:
        raise ValidationError("margin needs at least two classes")
    top2 = np.partition(probs, probs.shape[1] - 2, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def top_k_largest(scores: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k largest scores, ties resolved to lowest position."""
    return np.argsort(-scores, kind="stable")[:k]


def top_k_smallest(scores: np.ndarray, k: int) -> np.ndarray:
    return np.argsort(scores, kind="stable")[:k]


def query_entropy(ctx: QueryContext) -> np.ndarray:
    ctx.validate()
    unlabeled = ctx.pool.unlabeled
    probs = predict_proba(ctx.probe, ctx.dataset.train[unlabeled])
    return unlabeled[top_k_largest(score_entropy(probs), ctx.batch_size)]


def query_margin(ctx: QueryContext) -> np.ndarray:
    ctx.validate()
    unlabeled = ctx.pool.unlabeled
    probs = predict_proba(ctx.probe, ctx.dataset.train[unlabeled])
    return unlabeled[top_k_smallest(score_margin(probs), ctx.batch_size)]


def query_random(ctx: QueryContext) -> np.ndarray:
    ctx.validate()
    return ctx.rng.choice(ctx.pool.unlabeled, size=ctx.batch_size, replace=False)


def query_coreset(ctx: QueryContext) -> np.ndarray:
    ctx.validate()
    return kcenter_greedy(
        ctx.dataset.train, ctx.pool.labeled, ctx.batch_size, ctx.rng
    )


def badge_gradient_embeddings(probe: ProbeParams, features) -> np.ndarray:
    """Loss-gradient embeddings at the hypothetical argmax label.

    Row for x is (p - onehot(argmax p)) kron x, flattened class-major: the
    exact gradient of the unregularized cross-entropy at label argmax(p)
    with respect to the weight matrix.
    """
    probs = predict_proba(probe, features)
    n, num_classes = probs.shape
    coeff = probs.copy()
    coeff[np.arange(n), probs.argmax(axis=1)] -= 1.0
    grads = coeff[:, :, None] * np.asarray(features, dtype=np.float64)[:, None, :]
    return grads.reshape(n, num_classes * probe.dim)


def query_badge(ctx: QueryContext) -> np.ndarray:
    ctx.validate()
    unlabeled = ctx.pool.unlabeled
    grads = badge_gradient_embeddings(ctx.probe, ctx.dataset.train[unlabeled])
    positions = kmeanspp_select(grads, ctx.batch_size, ctx.rng, first_pick="maxnorm")
    return unlabeled[positions]


def unit_normalize(features) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    return feats / np.where(norms > 0.0, norms, 1.0)


def estimate_probcover_delta(
    features,
    num_classes: int,
    purity_threshold: float,
    rng: np.random.Generator,
    grid=None,
) -> float:
    """Largest grid radius whose balls are pure under k-means pseudo-labels.

    A ball around x is pure iff every point within the radius shares x's
    pseudo-label (k = num_classes).  Falls back to the smallest grid value
    with a logged warning when no radius reaches the threshold.
    """
    features = np.asarray(features, dtype=np.float64)
    if grid is None:
        grid = np.geomspace(0.05, 1.0, 30)
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    n = features.shape[0]
    # pseudo-label clusters cannot outnumber distinct points, or coincident
    # points would be forced onto different labels
    distinct = len(np.unique(features, axis=0))
    pseudo, _ = kmeans(features, min(num_classes, distinct), rng)

    # Ball purity only depends on each point's distance to the nearest
    # point of a different pseudo-label.
    nearest_other = np.full(n, np.inf)
    block = 2048
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq_dists(features[start:stop], features)
        same = pseudo[start:stop, None] == pseudo[None, :]
        d2[same] = np.inf
        nearest_other[start:stop] = np.sqrt(d2.min(axis=1))

    purity = (nearest_other[None, :] > grid[:, None]).mean(axis=1)
    ok = np.flatnonzero(purity >= purity_threshold)
    if ok.size == 0:
        log.warning(
            "no radius in the grid reaches purity %.3f (best %.3f); "
            "falling back to the smallest grid value %g",
            purity_threshold,
            float(purity.max()) if purity.size else float("nan"),
            grid[0],
        )
        return float(grid[0])
    return float(grid[ok[-1]])


def query_probcover(ctx: QueryContext, normalize: bool = True) -> np.ndarray:
    """Greedy max-coverage with fixed-radius balls on unit-normalized features."""
    ctx.validate()
    features = ctx.dataset.train
    feats = unit_normalize(features) if normalize else np.asarray(features, dtype=np.float64)

    delta = ctx.params.probcover_delta
    if delta == "auto":
        delta = estimate_probcover_delta(
            feats,
            ctx.dataset.manifest.num_classes,
            ctx.params.probcover_purity_threshold,
            ctx.rng,
        )
    delta = float(delta)
    if delta <= 0:
        raise ConfigError(f"probcover delta must be positive, got {delta}")
    delta_sq = delta * delta

    n = feats.shape[0]
    covered = np.zeros(n, dtype=bool)
    if ctx.pool.labeled.size:
        covered = min_sq_dists(feats, feats[ctx.pool.labeled]) <= delta_sq

    unlabeled = ctx.pool.unlabeled
    active = np.ones(unlabeled.size, dtype=bool)
    picks = []
    for _ in range(ctx.batch_size):
        cand = unlabeled[active]
        counts = np.empty(cand.size, dtype=np.int64)
        block = 2048
        for start in range(0, cand.size, block):
            stop = min(start + block, cand.size)
            d2 = sq_dists(feats[cand[start:stop]], feats)
            counts[start:stop] = ((d2 <= delta_sq) & ~covered[None, :]).sum(axis=1)
        best = int(np.argmax(counts))
        chosen = int(cand[best])
        picks.append(chosen)
        active[np.searchsorted(unlabeled, chosen)] = False
        ball = sq_dists(feats[chosen : chosen + 1], feats)[0] <= delta_sq
        covered |= ball
    return np.array(picks, dtype=np.int64)


def query_typiclust(ctx: QueryContext) -> np.ndarray:
    ctx.validate()
    return typiclust_select(
        ctx.dataset.train,
        ctx.pool.labeled,
        ctx.batch_size,
        ctx.rng,
        knn=ctx.params.typiclust_knn,
        max_clusters=ctx.params.typiclust_max_clusters,
    )


def dropout_inconsistency(
    probe: ProbeParams,
    features,
    num_masks: int,
    rate: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Count masks under which the predicted class flips.

    Each mask zeroes features independently with the given probability and
    rescales survivors by 1/(1-rate), mirroring inference-time dropout.
    """
    features = np.asarray(features, dtype=np.float64)
    base = predict_proba(probe, features).argmax(axis=1)
    flips = np.zeros(features.shape[0], dtype=np.int64)
    scale = 1.0 / (1.0 - rate)
    for _ in range(num_masks):
        keep = rng.random(features.shape) >= rate
        masked = features * keep * scale
        flips += predict_proba(probe, masked).argmax(axis=1) != base
    return flips


def query_dropquery(ctx: QueryContext) -> np.ndarray:
    """Prediction-inconsistency candidates, diversified by k-means.

    Unlabeled points whose predicted class flips under any feature-dropout
    mask are candidates; if enough exist they are clustered into batch_size
    groups and each cluster contributes its most inconsistent member, else
    the batch is topped up with uniformly drawn unlabeled points.
    """
    ctx.validate()
    unlabeled = ctx.pool.unlabeled
    feats = ctx.dataset.train[unlabeled]
    flips = dropout_inconsistency(
        ctx.probe, feats, ctx.params.dropquery_masks, ctx.params.dropquery_rate, ctx.rng
    )
    cand_pos = np.flatnonzero(flips > 0)
    b = ctx.batch_size

    picks: list[int] = []
    if cand_pos.size >= b:
        assign, _ = kmeans(feats[cand_pos], b, ctx.rng)
        for cid in range(b):
            members = cand_pos[assign == cid]
            if members.size == 0:
                continue
            best = members[int(np.argmax(flips[members]))]
            picks.append(int(unlabeled[best]))
    else:
        picks.extend(int(unlabeled[p]) for p in cand_pos)

    if len(picks) < b:
        remaining = np.setdiff1d(unlabeled, np.asarray(picks, dtype=np.int64))
        fill = ctx.rng.choice(remaining, size=b - len(picks), replace=False)
        picks.extend(int(i) for i in fill)
    return np.array(picks, dtype=np.int64)


QUERY_STRATEGIES = {
    "random": query_random,
    "margin": query_margin,
    "entropy": query_entropy,
    "coreset": query_coreset,
    "probcover": query_probcover,
    "typiclust": query_typiclust,
    "badge": query_badge,
    "dropquery": query_dropquery,
}
