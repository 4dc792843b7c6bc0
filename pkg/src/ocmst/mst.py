"""Per-query neighborhoods, Kruskal spanning trees, and quantile thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import euclidean_distance

__all__ = [
    "CLASS_NORMAL",
    "CLASS_ABNORMAL",
    "ORIGIN_GROUND_TRUTH",
    "ORIGIN_STAGE1_PREDICTED",
    "ClassPool",
    "ThresholdConfig",
    "MinSpanTree",
    "pool_distances",
    "select_gamma_nearest",
    "build_small_mst",
    "threshold_from_quantile",
]

CLASS_NORMAL = "normal"
CLASS_ABNORMAL = "abnormal"
ORIGIN_GROUND_TRUTH = "ground_truth"
ORIGIN_STAGE1_PREDICTED = "stage1_predicted"


@dataclass
class ClassPool:
    """Feature rows belonging to one class, shared read-only across workers.

    Pools built from ground truth must be nonempty. Pools predicted at stage 1
    may be empty; downstream code treats that as the class being unavailable.
    """

    features: np.ndarray
    class_tag: str
    origin: str = ORIGIN_GROUND_TRUTH
    sqnorms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        if feats.ndim != 2:
            raise ConfigurationError(f"pool features must be 2-D, got shape {feats.shape}")
        if not np.isfinite(feats).all():
            raise ConfigurationError("pool features must be finite")
        if self.class_tag not in (CLASS_NORMAL, CLASS_ABNORMAL):
            raise ConfigurationError(f"unknown class tag {self.class_tag!r}")
        if self.origin not in (ORIGIN_GROUND_TRUTH, ORIGIN_STAGE1_PREDICTED):
            raise ConfigurationError(f"unknown pool origin {self.origin!r}")
        if self.origin == ORIGIN_STAGE1_PREDICTED and self.class_tag != CLASS_ABNORMAL:
            raise ConfigurationError("stage-1 predicted pools can only hold the abnormal class")
        if self.origin == ORIGIN_GROUND_TRUTH and feats.shape[0] == 0:
            raise ConfigurationError("ground-truth class pool is empty")
        self.features = feats
        # Cached row norms; computed eagerly so concurrent readers never race.
        self.sqnorms = np.einsum("ij,ij->i", feats, feats)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True)
class ThresholdConfig:
    """Knobs shared by every tree build: neighborhood size and the two
    quantile fractions that place the inner and outer decision boundaries."""

    gamma: int = 8
    alpha0: float = 0.1
    alpha1: float = 0.8

    def __post_init__(self):
        if int(self.gamma) != self.gamma or self.gamma < 1:
            raise ConfigurationError(f"gamma must be an integer >= 1, got {self.gamma}")
        if not (0.0 <= self.alpha0 <= self.alpha1 <= 1.0):
            raise ConfigurationError(
                f"need 0 <= alpha0 <= alpha1 <= 1, got alpha0={self.alpha0} alpha1={self.alpha1}"
            )


@dataclass(frozen=True)
class MinSpanTree:
    """Minimum spanning tree over a handful of pool rows.

    node_indices and edge endpoints are row indices into the owning pool.
    Edges are stored as (i, j, weight) with i < j. theta0/theta1 are the
    quantile thresholds taken from the sorted edge weights.
    """

    node_indices: tuple[int, ...]
    edges: tuple[tuple[int, int, float], ...]
    theta0: float
    theta1: float

    @property
    def degenerate(self) -> bool:
        return len(self.edges) == 0

    def total_weight(self) -> float:
        return math.fsum(sorted(w for _, _, w in self.edges))


def pool_distances(x: np.ndarray, pool: ClassPool) -> np.ndarray:
    """Distances from x to every pool row.

    Uses the ||v||^2 - 2 v.x + ||x||^2 expansion against the pool's cached
    row norms: one matrix-vector product instead of materializing an
    (n, dim) difference. Costs a little accuracy near zero, which only
    matters for neighbor ordering under exact ties; everything downstream
    remeasures with the exact difference formula.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != pool.dim:
        raise ConfigurationError(
            f"query dimension {x.shape} does not match pool dimension {pool.dim}"
        )
    sq = pool.sqnorms - 2.0 * (pool.features @ x) + float(np.dot(x, x))
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)


def select_gamma_nearest(x: np.ndarray, pool: ClassPool, gamma: int) -> list[int]:
    """Indices of the min(gamma, pool size) rows nearest to x.

    Returned in nondecreasing distance order; exact ties go to the lower row
    index so repeated runs agree.
    """
    if gamma < 1:
        raise ConfigurationError(f"gamma must be >= 1, got {gamma}")
    if len(pool) == 0:
        raise ConfigurationError("cannot select neighbors from an empty pool")
    d = pool_distances(x, pool)
    order = np.argsort(d, kind="stable")
    return [int(i) for i in order[: min(int(gamma), len(pool))]]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def build_small_mst(indices, pool: ClassPool, config: ThresholdConfig) -> MinSpanTree:
    """Complete graph over the given pool rows, reduced by Kruskal.

    Edge weights are Euclidean distances between rows. Candidate edges are
    processed in (weight, low index, high index) order, which pins down the
    edge set deterministically when weights tie. A single row yields an
    edgeless tree with both thresholds at zero.
    """
    idx = [int(i) for i in indices]
    if not idx:
        raise ConfigurationError("cannot build a tree over zero rows")
    if len(set(idx)) != len(idx):
        raise ConfigurationError("duplicate row indices in tree node set")
    for i in idx:
        if not (0 <= i < len(pool)):
            raise ConfigurationError(f"row index {i} outside pool of {len(pool)} rows")

    n = len(idx)
    if n == 1:
        return MinSpanTree(node_indices=(idx[0],), edges=(), theta0=0.0, theta1=0.0)

    rows = pool.features
    candidates = []
    for a in range(n):
        for b in range(a + 1, n):
            i, j = idx[a], idx[b]
            lo, hi = (i, j) if i < j else (j, i)
            candidates.append((euclidean_distance(rows[lo], rows[hi]), lo, hi))
    candidates.sort()

    uf = _UnionFind(n)
    pos = {row: k for k, row in enumerate(idx)}
    edges: list[tuple[int, int, float]] = []
    for w, lo, hi in candidates:
        if uf.union(pos[lo], pos[hi]):
            edges.append((lo, hi, w))
            if len(edges) == n - 1:
                break

    weights = sorted(w for _, _, w in edges)
    theta0 = threshold_from_quantile(weights, config.alpha0)
    theta1 = threshold_from_quantile(weights, config.alpha1)
    return MinSpanTree(
        node_indices=tuple(idx),
        edges=tuple(edges),
        theta0=theta0,
        theta1=theta1,
    )


def threshold_from_quantile(sorted_weights, alpha: float) -> float:
    """Weight at the 1-based index max(1, ceil(alpha * n)) of a sorted list.

    This convention reproduces the median at alpha = 0.5 on both even- and
    odd-length lists and returns the maximum at alpha = 1. An empty list maps
    to 0.0; callers can tell that case apart via the tree's degenerate flag.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    ws = list(sorted_weights)
    n = len(ws)
    if n == 0:
        return 0.0
    if any(ws[k] > ws[k + 1] for k in range(n - 1)):
        raise ConfigurationError("weights must be sorted in nondecreasing order")
    k = max(1, math.ceil(alpha * n))
    return float(ws[k - 1])
