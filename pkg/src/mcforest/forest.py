"""Random-forest machinery: axis-aligned trees, subsampling, classification forest.

Trees are stored as flat parallel arrays (feature, threshold, children,
payload) rather than linked nodes; routing a batch of rows to leaves is a
tight jitted loop. Growth is greedy: at each node, the best split over a
per-node sample of ``mtry`` features is chosen among midpoints of
consecutive distinct feature values, with ties broken by lowest feature
index, then lowest threshold.

All randomness is derived per tree from the master seed (see ``seeding``),
so a forest is bit-identical no matter how fitting is scheduled, and any
single tree can be regrown in isolation.

Observation weights enter the split criterion and leaf payloads only.
They are normalized by their maximum at fit time, which makes fits exactly
invariant under positive rescaling of the weight vector, and zero-weight
rows are excluded outright, so a fit with zeros equals a fit on the
filtered data under the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .seeding import rng_for

MODE_GINI = 0
MODE_EFFECT = 1


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters shared by classification and causal forests.

    ``mtry=None`` resolves at fit time to ceil(sqrt(p)) for classification
    and ceil(p/3)+1 for causal splitting. ``min_node_size`` is the minimum
    effective (weight-normalized) sample mass a child may hold.
    ``honesty_fraction`` and ``min_arm_weight`` only apply to causal
    forests. ``max_depth=None`` means unbounded.
    """

    num_trees: int
    mtry: int | None = None
    min_node_size: int = 10
    subsample_fraction: float = 0.5
    honesty_fraction: float = 0.5
    max_depth: int | None = None
    seed: int = 0
    min_arm_weight: float = 5.0

    def with_seed(self, seed: int) -> "ForestConfig":
        return replace(self, seed=int(seed))


def default_classification_config(seed: int = 0, num_trees: int = 500) -> ForestConfig:
    return ForestConfig(num_trees=num_trees, min_node_size=10, seed=seed)


def check_config(config: ForestConfig, p: int) -> None:
    if config.num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    if config.mtry is not None and not (1 <= config.mtry <= p):
        raise ValueError(f"mtry must be in [1, p={p}], got {config.mtry}")
    if config.min_node_size < 1:
        raise ValueError("min_node_size must be >= 1")
    if not (0.0 < config.subsample_fraction <= 1.0):
        raise ValueError("subsample_fraction must be in (0, 1]")
    if not (0.0 < config.honesty_fraction < 1.0):
        raise ValueError("honesty_fraction must be in (0, 1)")
    if config.max_depth is not None and config.max_depth < 0:
        raise ValueError("max_depth must be >= 0 or None")
    if config.min_arm_weight < 0:
        raise ValueError("min_arm_weight must be >= 0")


@dataclass
class Tree:
    """Flat array representation of one fitted tree.

    ``feature[i] == -1`` marks node i as a leaf; internal nodes route a row
    left iff row[feature] <= threshold. ``payload`` holds the leaf value
    (class-1 fraction, or treatment effect) and NaN on internal nodes.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    payload: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def leaf_for(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id for every row of X."""
        return _route(self.feature, self.threshold, self.left, self.right, np.ascontiguousarray(X, dtype=np.float64))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.payload[self.leaf_for(X)]

    def dump(self) -> str:
        """Debug listing, one node per line: id kind feature threshold payload."""
        lines = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                lines.append(f"{i} leaf - - {self.payload[i]!r}")
            else:
                lines.append(f"{i} split {self.feature[i]} {self.threshold[i]!r} -")
        return "\n".join(lines)


@njit(cache=True)
def _route(feature, threshold, left, right, X):  # pragma: no cover - jitted
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def _grow(X, stats, rows, feat_pool, mode, min_node_mass, min_arm_weight, max_depth,
          feature, threshold, left, right, payload, node_start, node_end, node_depth):  # pragma: no cover - jitted
    """Grow one tree structure in place over rows[0:m]; returns node count.

    ``stats`` columns are (w*z, w*z*y, w*(1-z), w*(1-z)*y) in effect mode
    and (w, w*label, unused, unused) in gini mode. Gini mode maximizes
    weighted impurity decrease; effect mode maximizes the mass-weighted
    between-child spread of the difference-in-means effect around the
    parent effect. A node becomes a leaf when no admissible split improves
    the score strictly.
    """
    m = rows.shape[0]
    n_nodes = 1
    node_start[0] = 0
    node_end[0] = m
    node_depth[0] = 0
    stack = np.empty(2 * m + 2, dtype=np.int32)
    stack[0] = 0
    top = 1
    scratch = np.empty(m, dtype=np.int32)
    xvals = np.empty(m, dtype=np.float64)

    while top > 0:
        top -= 1
        node = stack[top]
        start = node_start[node]
        end = node_end[node]
        depth = node_depth[node]
        mn = end - start

        # Parent aggregates.
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        for ii in range(start, end):
            r = rows[ii]
            s0 += stats[r, 0]
            s1 += stats[r, 1]
            s2 += stats[r, 2]
            s3 += stats[r, 3]

        if mode == MODE_GINI:
            parent_mass = s0
        else:
            parent_mass = s0 + s2

        feature[node] = -1
        threshold[node] = np.nan
        left[node] = -1
        right[node] = -1
        if mode == MODE_GINI:
            payload[node] = s1 / s0 if s0 > 0.0 else 0.5
        else:
            payload[node] = np.nan

        if max_depth >= 0 and depth >= max_depth:
            continue
        if parent_mass < 2.0 * min_node_mass or mn < 2:
            continue

        if mode == MODE_GINI:
            p1 = s1 / s0
            parent_imp = 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
            parent_effect = 0.0
        else:
            if s0 <= 0.0 or s2 <= 0.0:
                continue
            parent_imp = 0.0
            parent_effect = s1 / s0 - s3 / s2

        best_score = 0.0
        best_feat = -1
        best_thr = 0.0

        for fi in range(feat_pool.shape[1]):
            f = feat_pool[node, fi]
            for ii in range(mn):
                xvals[ii] = X[rows[start + ii], f]
            order = np.argsort(xvals[:mn])

            l0 = 0.0
            l1 = 0.0
            l2 = 0.0
            l3 = 0.0
            for ii in range(mn - 1):
                r = rows[start + order[ii]]
                l0 += stats[r, 0]
                l1 += stats[r, 1]
                l2 += stats[r, 2]
                l3 += stats[r, 3]
                xlo = xvals[order[ii]]
                xhi = xvals[order[ii + 1]]
                if xlo >= xhi:
                    continue
                r0 = s0 - l0
                r1 = s1 - l1
                r2 = s2 - l2
                r3 = s3 - l3

                if mode == MODE_GINI:
                    if l0 < min_node_mass or r0 < min_node_mass:
                        continue
                    pl = l1 / l0
                    pr = r1 / r0
                    imp_l = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
                    imp_r = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
                    score = parent_imp - (l0 * imp_l + r0 * imp_r) / parent_mass
                else:
                    if l0 <= 0.0 or l2 <= 0.0 or r0 <= 0.0 or r2 <= 0.0:
                        continue
                    if l0 < min_arm_weight or l2 < min_arm_weight:
                        continue
                    if r0 < min_arm_weight or r2 < min_arm_weight:
                        continue
                    mass_l = l0 + l2
                    mass_r = r0 + r2
                    if mass_l < min_node_mass or mass_r < min_node_mass:
                        continue
                    eff_l = l1 / l0 - l3 / l2
                    eff_r = r1 / r0 - r3 / r2
                    dl = eff_l - parent_effect
                    dr = eff_r - parent_effect
                    score = mass_l * dl * dl + mass_r * dr * dr

                if score > best_score:
                    best_score = score
                    best_feat = f
                    # midpoint of the straddled gap; for adjacent floats it
                    # can round up to xhi, which would leak xhi's rows into
                    # the left child, so fall back to xlo (same partition)
                    thr = 0.5 * (xlo + xhi)
                    if thr >= xhi:
                        thr = xlo
                    best_thr = thr

        if best_feat < 0:
            continue

        # Stable partition of rows[start:end] by the chosen split.
        n_left = 0
        n_right = 0
        for ii in range(start, end):
            r = rows[ii]
            if X[r, best_feat] <= best_thr:
                rows[start + n_left] = r
                n_left += 1
            else:
                scratch[n_right] = r
                n_right += 1
        for ii in range(n_right):
            rows[start + n_left + ii] = scratch[ii]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = left_id
        right[node] = right_id
        payload[node] = np.nan

        node_start[left_id] = start
        node_end[left_id] = start + n_left
        node_depth[left_id] = depth + 1
        node_start[right_id] = start + n_left
        node_end[right_id] = end
        node_depth[right_id] = depth + 1
        stack[top] = right_id
        stack[top + 1] = left_id
        top += 2

    return n_nodes


def grow_structure(X: np.ndarray, stats: np.ndarray, rows: np.ndarray, mode: int,
                   mtry: int, min_node_mass: float, min_arm_weight: float,
                   max_depth: int | None, rng: np.random.Generator) -> tuple[Tree, np.ndarray, np.ndarray]:
    """Grow one tree over ``rows``; returns (tree, node_start, node_end).

    ``node_start``/``node_end`` delimit each node's rows inside the
    (reordered) ``rows`` array, which the caller may use to aggregate
    per-node statistics without re-routing.
    """
    m = rows.shape[0]
    p = X.shape[1]
    max_nodes = 2 * m + 1
    pool = rng.permuted(np.tile(np.arange(p, dtype=np.int32), (max_nodes, 1)), axis=1)[:, :mtry]
    pool = np.ascontiguousarray(np.sort(pool, axis=1))

    feature = np.empty(max_nodes, dtype=np.int32)
    threshold = np.empty(max_nodes, dtype=np.float64)
    left = np.empty(max_nodes, dtype=np.int32)
    right = np.empty(max_nodes, dtype=np.int32)
    payload = np.empty(max_nodes, dtype=np.float64)
    node_start = np.empty(max_nodes, dtype=np.int32)
    node_end = np.empty(max_nodes, dtype=np.int32)
    node_depth = np.empty(max_nodes, dtype=np.int32)

    n_nodes = _grow(
        X, stats, rows, pool, mode, float(min_node_mass), float(min_arm_weight),
        -1 if max_depth is None else int(max_depth),
        feature, threshold, left, right, payload, node_start, node_end, node_depth,
    )
    tree = Tree(
        feature=feature[:n_nodes].copy(),
        threshold=threshold[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        payload=payload[:n_nodes].copy(),
    )
    return tree, node_start[:n_nodes].copy(), node_end[:n_nodes].copy()


def normalize_weights(w, n: int) -> np.ndarray:
    """Validate a weight vector and normalize it by its maximum."""
    if w is None:
        return np.ones(n, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"weights must have length {n}, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    top = w.max() if n else 0.0
    if top <= 0.0:
        raise ValueError("weights must include at least one positive entry")
    return w / top


def draw_subsample(rng: np.random.Generator, active: np.ndarray, fraction: float) -> np.ndarray:
    """Uniform subsample (without replacement) of the active row indices."""
    n_act = active.shape[0]
    k = int(math.floor(fraction * n_act))
    k = min(max(k, 2), n_act)
    return active[rng.permutation(n_act)[:k]]


def _resolve_mtry(config: ForestConfig, p: int, classification: bool) -> int:
    if config.mtry is not None:
        return config.mtry
    return int(math.ceil(math.sqrt(p))) if classification else int(math.ceil(p / 3.0)) + 1


@dataclass
class ProbabilityForest:
    """Classification forest whose leaves carry weighted class-1 fractions."""

    trees: list[Tree]
    p: int
    config: ForestConfig

    @property
    def num_trees(self) -> int:
        return len(self.trees)


def grow_tree(X, target, weights, config: ForestConfig, rng: np.random.Generator) -> Tree:
    """Grow a single classification tree on all given rows (no subsampling).

    Splits greedily by weighted gini impurity decrease over ``mtry``
    features sampled per node; recursion stops at ``max_depth``, at
    ``min_node_size`` effective observations per child, or when no split
    strictly reduces impurity (constant targets yield a single leaf).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, p = X.shape
    target = np.asarray(target, dtype=np.float64).reshape(n)
    check_config(config, p)
    w = normalize_weights(weights, n)
    mtry = _resolve_mtry(config, p, classification=True)

    stats = np.zeros((n, 4), dtype=np.float64)
    stats[:, 0] = w
    stats[:, 1] = w * target
    rows = np.flatnonzero(w > 0).astype(np.int32)
    tree, _, _ = grow_structure(X, stats, rows, MODE_GINI, mtry,
                                float(config.min_node_size), 0.0, config.max_depth, rng)
    return tree


def fit_classification_forest(X, labels, weights=None, config: ForestConfig | None = None) -> ProbabilityForest:
    """Fit an ensemble of gini trees predicting P(label = 1 | x).

    Each tree is grown on an independent uniform subsample of the
    positive-weight rows; leaf payloads are the weighted fraction of
    label-1 rows reaching the leaf. Deterministic given ``config.seed``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    n, p = X.shape
    labels = np.asarray(labels, dtype=np.float64).reshape(n)
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError("labels must be binary (0/1)")
    if config is None:
        config = default_classification_config()
    check_config(config, p)
    w = normalize_weights(weights, n)
    if w[labels == 1.0].sum() <= 0.0 or w[labels == 0.0].sum() <= 0.0:
        raise ValueError("single-class input: both classes need positive total weight")
    mtry = _resolve_mtry(config, p, classification=True)
    active = np.flatnonzero(w > 0).astype(np.int64)

    stats = np.zeros((n, 4), dtype=np.float64)
    stats[:, 0] = w
    stats[:, 1] = w * labels

    trees = []
    for t in range(config.num_trees):
        rng = rng_for(config.seed, "classification-tree", t)
        rows = draw_subsample(rng, active, config.subsample_fraction).astype(np.int32)
        tree, _, _ = grow_structure(X, stats, rows, MODE_GINI, mtry,
                                    float(config.min_node_size), 0.0, config.max_depth, rng)
        trees.append(tree)
    return ProbabilityForest(trees=trees, p=p, config=config)


def predict_probability(model: ProbabilityForest, x) -> float | np.ndarray:
    """Average leaf class-1 fraction across trees; scalar for a single row."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x.reshape(1, -1) if single else x
    if X.shape[1] != model.p:
        raise ValueError(f"expected {model.p} covariates, got {X.shape[1]}")
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        acc += tree.predict(X)
    acc /= model.num_trees
    return float(acc[0]) if single else acc
