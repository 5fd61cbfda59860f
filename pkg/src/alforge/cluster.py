"""Deterministic k-means machinery shared by selection strategies.

All routines take an explicit Generator and reduce in fixed index order, so
results are reproducible and independent of any parallel schedule.
"""

import numpy as np

from .errors import ValidationError


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(a), len(b))."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d2 = (
        (a**2).sum(axis=1)[:, None]
        + (b**2).sum(axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def min_sq_dists(points: np.ndarray, centers: np.ndarray, block: int = 4096) -> np.ndarray:
    """Squared distance from each point to its nearest center, blockwise."""
    out = np.empty(len(points))
    for start in range(0, len(points), block):
        stop = min(start + block, len(points))
        out[start:stop] = sq_dists(points[start:stop], centers).min(axis=1)
    return out


def kmeanspp_select(vectors, k: int, rng: np.random.Generator, first_pick: str = "random") -> np.ndarray:
    """Pick k row indices by k-means++ D^2 sampling.

    first_pick "random" draws the first index uniformly; "maxnorm" takes the
    row with the largest Euclidean norm (ties to the lowest index).  Each
    subsequent index is sampled with probability proportional to squared
    distance to the nearest already-chosen row.  If the remaining distance
    mass is all zero (duplicate points), the remaining picks are filled with
    the lowest unchosen indices.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if n == 0:
        raise ValidationError("empty candidate set")
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, {n}], got {k}")

    if first_pick == "maxnorm":
        first = int(np.argmax((vectors**2).sum(axis=1)))
    elif first_pick == "random":
        first = int(rng.integers(n))
    else:
        raise ValidationError(f"unknown first_pick {first_pick!r}")

    chosen = [first]
    d2 = sq_dists(vectors, vectors[first : first + 1])[:, 0]
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0.0:
            taken = set(chosen)
            for idx in range(n):
                if idx in taken:
                    continue
                chosen.append(idx)
                if len(chosen) == k:
                    break
            break
        nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        np.minimum(d2, sq_dists(vectors, vectors[nxt : nxt + 1])[:, 0], out=d2)
    return np.array(chosen, dtype=np.int64)


def kmeans(
    features,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd k-means with k-means++ seeding.

    Runs until the assignment reaches a fixpoint or max_iter sweeps.  Empty
    clusters are re-seeded with the point farthest from its assigned center.
    Returns (assignments, centers).
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, {n}], got {k}")

    seeds = kmeanspp_select(features, k, rng, first_pick="random")
    centers = features[seeds].copy()
    assign = None
    for _ in range(max_iter):
        d2 = sq_dists(features, centers)
        new_assign = d2.argmin(axis=1)

        # Re-seed empty clusters with the farthest point, lowest cluster first.
        nearest = d2[np.arange(n), new_assign].copy()
        counts = np.bincount(new_assign, minlength=k)
        for cid in np.flatnonzero(counts == 0):
            far = int(np.argmax(nearest))
            centers[cid] = features[far]
            new_assign[far] = cid
            counts[cid] += 1
            nearest[far] = -1.0

        if assign is not None and np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
        for cid in range(k):
            members = assign == cid
            if members.any():
                centers[cid] = features[members].mean(axis=0)
    return assign, centers
