"""Initial pool selection: random, coreset (k-center greedy), typiclust.

Selection runs before any classifier exists, so it sees only the feature
geometry.  All distances are Euclidean on the raw stored embeddings.
"""

from dataclasses import dataclass

import numpy as np

from .cluster import kmeans, min_sq_dists, sq_dists
from .dataset import EmbeddingDataset
from .errors import ValidationError
from .util import derive_rng

IPS_STRATEGIES = ("random", "coreset", "typiclust")


@dataclass(frozen=True)
class IpsConfig:
    strategy: str
    init_size: int
    seed: int
    typiclust_knn: int = 20
    typiclust_max_clusters: int = 500

    def validate(self, num_train: int) -> None:
        if self.strategy not in IPS_STRATEGIES:
            raise ValidationError(
                f"unknown ips strategy {self.strategy!r}, expected one of {IPS_STRATEGIES}"
            )
        if not 1 <= self.init_size <= num_train:
            raise ValidationError(
                f"init_size must lie in [1, num_train={num_train}], got {self.init_size}"
            )


@dataclass(frozen=True)
class PoolState:
    """Disjoint labeled/unlabeled index sets over the train rows at one cycle."""

    labeled: np.ndarray
    unlabeled: np.ndarray
    cycle: int

    @classmethod
    def initial(cls, num_train: int, labeled_indices) -> "PoolState":
        labeled = np.unique(np.asarray(labeled_indices, dtype=np.int64))
        if len(labeled) != len(labeled_indices):
            raise ValidationError("initial labeled set contains duplicates")
        mask = np.zeros(num_train, dtype=bool)
        mask[labeled] = True
        state = cls(labeled=labeled, unlabeled=np.flatnonzero(~mask), cycle=0)
        state.check_partition(num_train)
        return state

    def advance(self, batch) -> "PoolState":
        """Move a queried batch from unlabeled to labeled; next cycle."""
        batch = np.asarray(batch, dtype=np.int64)
        if len(np.unique(batch)) != len(batch):
            raise ValidationError("batch contains duplicate indices")
        if not np.isin(batch, self.unlabeled).all():
            raise ValidationError("batch contains indices outside the unlabeled pool")
        labeled = np.sort(np.concatenate([self.labeled, batch]))
        unlabeled = self.unlabeled[~np.isin(self.unlabeled, batch)]
        return PoolState(labeled=labeled, unlabeled=unlabeled, cycle=self.cycle + 1)

    def check_partition(self, num_train: int) -> None:
        if np.intersect1d(self.labeled, self.unlabeled).size:
            raise ValidationError("labeled and unlabeled pools overlap")
        union = np.union1d(self.labeled, self.unlabeled)
        if union.size != num_train or (union != np.arange(num_train)).any():
            raise ValidationError("pools do not partition the train indices")


def kcenter_greedy(features, initial_centers, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-center additions over the complement of initial_centers.

    With no initial centers the first pick is drawn uniformly via rng; every
    later pick maximizes the distance to the nearest existing center, ties
    broken by lowest index.  Returns the k added indices in pick order.
    """
    features = np.asarray(features)
    n = features.shape[0]
    initial_centers = np.asarray(initial_centers, dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[initial_centers] = False
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        raise ValidationError("empty candidate set")
    if not 1 <= k <= candidates.size:
        raise ValidationError(f"k must lie in [1, {candidates.size}], got {k}")

    cand_feats = features[candidates]
    picks = []
    if initial_centers.size:
        d2 = min_sq_dists(cand_feats, features[initial_centers])
    else:
        first = int(rng.integers(candidates.size))
        picks.append(first)
        d2 = sq_dists(cand_feats, cand_feats[first : first + 1])[:, 0]
        d2[first] = -1.0

    while len(picks) < k:
        nxt = int(np.argmax(d2))
        picks.append(nxt)
        np.minimum(d2, sq_dists(cand_feats, cand_feats[nxt : nxt + 1])[:, 0], out=d2)
        d2[nxt] = -1.0
    return candidates[np.array(picks, dtype=np.int64)]


def typicality(features, neighborhood, knn: int) -> np.ndarray:
    """Inverse mean distance to the K nearest neighbors inside the set.

    Effective K is min(knn, len(neighborhood) - 1).  Duplicate points with
    zero mean distance get +inf; downstream ties resolve to the lowest index.
    """
    neighborhood = np.asarray(neighborhood, dtype=np.int64)
    m = neighborhood.size
    if m < 2:
        raise ValidationError("typicality needs a neighborhood of at least 2 points")
    pts = np.asarray(features)[neighborhood]
    k_eff = min(knn, m - 1)
    d = np.sqrt(sq_dists(pts, pts))
    d.sort(axis=1)
    mean_dist = d[:, 1 : k_eff + 1].mean(axis=1)
    with np.errstate(divide="ignore"):
        return np.where(mean_dist > 0.0, 1.0 / mean_dist, np.inf)


def typiclust_select(
    features,
    labeled,
    count: int,
    rng: np.random.Generator,
    knn: int = 20,
    max_clusters: int = 500,
) -> np.ndarray:
    """Pick `count` unlabeled points: cluster, then take each cluster's most
    typical unlabeled member.

    k-means uses k = min(len(labeled) + count, max_clusters).  Clusters with
    no labeled point come first, largest first (ties by lowest cluster id);
    remaining picks continue into covered clusters and then cycle round-robin
    excluding already-picked points.
    """
    features = np.asarray(features)
    n = features.shape[0]
    labeled = np.asarray(labeled, dtype=np.int64)
    available = np.ones(n, dtype=bool)
    available[labeled] = False
    if count > int(available.sum()):
        raise ValidationError("count exceeds the number of unlabeled points")

    k = min(labeled.size + count, max_clusters, n)
    assign, _ = kmeans(features, k, rng)

    sizes = np.bincount(assign, minlength=k)
    has_label = np.zeros(k, dtype=bool)
    has_label[np.unique(assign[labeled])] = True
    order = sorted(range(k), key=lambda cid: (has_label[cid], -sizes[cid], cid))

    members = {cid: np.flatnonzero(assign == cid) for cid in range(k)}
    typ = {}
    picks = []
    while len(picks) < count:
        progressed = False
        for cid in order:
            if len(picks) == count:
                break
            cand = members[cid][available[members[cid]]]
            if cand.size == 0:
                continue
            if cid not in typ:
                if members[cid].size >= 2:
                    typ[cid] = typicality(features, members[cid], knn)
                else:
                    typ[cid] = np.full(members[cid].size, np.inf)
            scores = typ[cid][np.isin(members[cid], cand)]
            best = cand[int(np.argmax(scores))]
            picks.append(int(best))
            available[best] = False
            progressed = True
        if not progressed:
            raise ValidationError("typiclust ran out of unlabeled points")
    return np.array(picks, dtype=np.int64)


def select_initial(dataset: EmbeddingDataset, cfg: IpsConfig) -> np.ndarray:
    """Choose the initial labeled pool; deterministic given (dataset, cfg)."""
    cfg.validate(dataset.num_train)
    rng = derive_rng(cfg.seed, cfg.strategy, "ips")
    features = dataset.train
    if cfg.strategy == "random":
        picked = rng.choice(dataset.num_train, size=cfg.init_size, replace=False)
    elif cfg.strategy == "coreset":
        picked = kcenter_greedy(features, np.empty(0, dtype=np.int64), cfg.init_size, rng)
    else:
        picked = typiclust_select(
            features,
            np.empty(0, dtype=np.int64),
            cfg.init_size,
            rng,
            knn=cfg.typiclust_knn,
            max_clusters=cfg.typiclust_max_clusters,
        )
    return np.sort(picked.astype(np.int64))
