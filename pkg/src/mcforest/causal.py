"""Honest causal trees and forests for conditional treatment effect estimation.

Each tree is grown on a uniform subsample which is split into two disjoint
halves: the split half drives the recursive partitioning (maximizing the
mass-weighted between-child spread of difference-in-means effect
estimates), while leaf effects are computed exclusively on the estimation
half. This honesty separation removes the adaptive-splitting bias of
reusing the same rows for structure and estimation.

Leaves whose estimation half lacks a treatment arm inherit the nearest
estimable ancestor's effect, so the fitted predictor is total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import StudyDataset, require_valid
from .forest import (
    MODE_EFFECT,
    ForestConfig,
    Tree,
    check_config,
    draw_subsample,
    grow_structure,
    normalize_weights,
    _resolve_mtry,
)
from .seeding import rng_for


def default_causal_config(seed: int = 0, num_trees: int = 2000) -> ForestConfig:
    return ForestConfig(num_trees=num_trees, min_node_size=10, seed=seed)


def leaf_estimate(Y, Z, w=None) -> float:
    """Weighted difference in mean outcomes, treated minus control.

    (sum w*z*y / sum w*z) - (sum w*(1-z)*y / sum w*(1-z)); raises if either
    arm carries zero total weight (the leaf would be inestimable).
    """
    Y = np.asarray(Y, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if Y.shape != Z.shape:
        raise ValueError("Y and Z must have equal length")
    if w is None:
        w = np.ones_like(Y)
    else:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != Y.shape:
            raise ValueError("weights must match Y in length")
    wz = float(np.sum(w * Z))
    wc = float(np.sum(w * (1.0 - Z)))
    if wz <= 0.0 or wc <= 0.0:
        raise ValueError("arm with zero total weight: leaf effect is inestimable")
    return float(np.sum(w * Z * Y) / wz - np.sum(w * (1.0 - Z) * Y) / wc)


def split_score(effect_left: float, mass_left: float, effect_right: float,
                mass_right: float, effect_parent: float) -> float:
    """Heterogeneity gain of a candidate split.

    Mass-weighted between-child variance of the children's effect
    estimates around the parent's: m_L (t_L - t_P)^2 + m_R (t_R - t_P)^2.
    Nonnegative; zero when both children estimate the parent effect.
    """
    dl = effect_left - effect_parent
    dr = effect_right - effect_parent
    return float(mass_left * dl * dl + mass_right * dr * dr)


@dataclass
class CausalTree:
    """One honest tree: structure plus per-node estimation-half masses.

    ``tree.payload`` holds the leaf effect estimates. ``n_treated_eff`` and
    ``n_control_eff`` are effective (weight-normalized) arm masses of the
    estimation-half rows reaching each node; internal nodes accumulate
    their leaves. ``split_rows``/``est_rows`` are the disjoint row-index
    halves of the subsample in the fitting data's indexing.
    """

    tree: Tree
    n_treated_eff: np.ndarray
    n_control_eff: np.ndarray
    split_rows: np.ndarray
    est_rows: np.ndarray


@dataclass
class CausalForestModel:
    """Ensemble of honest causal trees; effect prediction averages leaves."""

    trees: list[CausalTree]
    p: int
    config: ForestConfig
    n_fit_rows: int

    @property
    def num_trees(self) -> int:
        return len(self.trees)


def _effect_stats(Z: np.ndarray, Y: np.ndarray, w: np.ndarray) -> np.ndarray:
    stats = np.empty((Z.shape[0], 4), dtype=np.float64)
    wz = w * Z
    wc = w * (1.0 - Z)
    stats[:, 0] = wz
    stats[:, 1] = wz * Y
    stats[:, 2] = wc
    stats[:, 3] = wc * Y
    return stats


def _fill_leaf_effects(tree: Tree, stats: np.ndarray, X: np.ndarray,
                       est_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Populate leaf payloads from the estimation half; return arm masses.

    Inestimable nodes (an empty arm among their estimation rows) take the
    nearest estimable ancestor's effect; an entirely inestimable tree
    predicts 0.
    """
    nn = tree.n_nodes
    leaf_ids = tree.leaf_for(X[est_rows])
    wz = np.bincount(leaf_ids, weights=stats[est_rows, 0], minlength=nn)
    wzy = np.bincount(leaf_ids, weights=stats[est_rows, 1], minlength=nn)
    wc = np.bincount(leaf_ids, weights=stats[est_rows, 2], minlength=nn)
    wcy = np.bincount(leaf_ids, weights=stats[est_rows, 3], minlength=nn)

    feature, left, right = tree.feature, tree.left, tree.right
    # Children always carry larger ids than their parent, so one reverse
    # sweep accumulates leaf masses into every internal node.
    for i in range(nn - 1, -1, -1):
        if feature[i] >= 0:
            li, ri = left[i], right[i]
            wz[i] = wz[li] + wz[ri]
            wzy[i] = wzy[li] + wzy[ri]
            wc[i] = wc[li] + wc[ri]
            wcy[i] = wcy[li] + wcy[ri]

    estimable = (wz > 0.0) & (wc > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        effect = wzy / wz - wcy / wc

    # Preorder sweep carrying the nearest estimable ancestor's effect.
    payload = np.full(nn, np.nan, dtype=np.float64)
    stack = [(0, 0.0)]
    while stack:
        node, fallback = stack.pop()
        value = float(effect[node]) if estimable[node] else fallback
        if feature[node] < 0:
            payload[node] = value
        else:
            stack.append((int(right[node]), value))
            stack.append((int(left[node]), value))
    tree.payload = payload
    return wz, wc


def grow_causal_tree(X, Z, Y, w, split_rows, est_rows, config: ForestConfig,
                     rng: np.random.Generator | None = None) -> CausalTree:
    """Grow one honest tree with explicitly given subsample halves."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, p = X.shape
    Z = np.asarray(Z, dtype=np.float64).reshape(n)
    Y = np.asarray(Y, dtype=np.float64).reshape(n)
    w = normalize_weights(w, n)
    check_config(config, p)
    if rng is None:
        rng = rng_for(config.seed, "causal-tree", 0)
    mtry = _resolve_mtry(config, p, classification=False)
    stats = _effect_stats(Z, Y, w)
    split_rows = np.array(split_rows, dtype=np.int32)
    est_rows = np.asarray(est_rows, dtype=np.int64)
    tree, _, _ = grow_structure(X, stats, split_rows, MODE_EFFECT, mtry,
                                float(config.min_node_size), float(config.min_arm_weight),
                                config.max_depth, rng)
    n_tr, n_co = _fill_leaf_effects(tree, stats, X, est_rows)
    return CausalTree(tree=tree, n_treated_eff=n_tr, n_control_eff=n_co,
                      split_rows=np.sort(split_rows), est_rows=np.sort(est_rows))


def fit_causal_forest(data: StudyDataset, w=None, config: ForestConfig | None = None) -> CausalForestModel:
    """Fit an honest causal forest under per-observation weights.

    Weights act as soft inclusion: they enter split scores and leaf
    estimates but not the (uniform) subsampling, zero-weight rows are
    excluded entirely, and rescaling all weights by a positive constant
    leaves the fit unchanged. Deterministic given ``config.seed``
    regardless of scheduling.
    """
    require_valid(data, "causal forest training data")
    if config is None:
        config = default_causal_config()
    check_config(config, data.p)
    n = data.n
    w = normalize_weights(w, n)
    if float(np.sum(w * data.Z)) <= 0.0 or float(np.sum(w * (1.0 - data.Z))) <= 0.0:
        raise ValueError("both treatment arms need positive total weight")
    X = np.ascontiguousarray(data.X)
    mtry = _resolve_mtry(config, data.p, classification=False)
    stats = _effect_stats(data.Z, data.Y, w)
    active = np.flatnonzero(w > 0).astype(np.int64)
    if active.shape[0] < 4:
        raise ValueError("need at least 4 positive-weight rows to form honest halves")

    trees = []
    for t in range(config.num_trees):
        rng = rng_for(config.seed, "causal-tree", t)
        rows = draw_subsample(rng, active, config.subsample_fraction)
        k = rows.shape[0]
        m_split = min(max(int(math.floor(config.honesty_fraction * k)), 1), k - 1)
        split_rows = rows[:m_split].astype(np.int32)
        est_rows = rows[m_split:]
        tree, _, _ = grow_structure(X, stats, split_rows, MODE_EFFECT, mtry,
                                    float(config.min_node_size), float(config.min_arm_weight),
                                    config.max_depth, rng)
        n_tr, n_co = _fill_leaf_effects(tree, stats, X, est_rows)
        trees.append(CausalTree(tree=tree, n_treated_eff=n_tr, n_control_eff=n_co,
                                split_rows=np.sort(rows[:m_split]), est_rows=np.sort(est_rows)))
    return CausalForestModel(trees=trees, p=data.p, config=config, n_fit_rows=n)


def predict_cate(model: CausalForestModel, x) -> float | np.ndarray:
    """Average leaf effect across trees; scalar for a single row."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.ascontiguousarray(x.reshape(1, -1) if single else x)
    if X.shape[1] != model.p:
        raise ValueError(f"expected {model.p} covariates, got {X.shape[1]}")
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for ct in model.trees:
        acc += ct.tree.predict(X)
    acc /= model.num_trees
    return float(acc[0]) if single else acc


def predict_cate_oob(model: CausalForestModel, X_fit) -> np.ndarray:
    """Out-of-bag effects for the rows the model was fitted on.

    ``X_fit`` must be the fitting covariate matrix, row-aligned. Each row
    is averaged over the trees whose subsample did not contain it; rows
    contained in every subsample (possible only for tiny forests) fall
    back to the full ensemble average.
    """
    X_fit = np.ascontiguousarray(X_fit, dtype=np.float64)
    if X_fit.shape != (model.n_fit_rows, model.p):
        raise ValueError("X_fit must be the matrix the model was fitted on")
    n = X_fit.shape[0]
    acc = np.zeros(n, dtype=np.float64)
    count = np.zeros(n, dtype=np.float64)
    full = np.zeros(n, dtype=np.float64)
    for ct in model.trees:
        pred = ct.tree.predict(X_fit)
        full += pred
        used = np.zeros(n, dtype=bool)
        used[ct.split_rows] = True
        used[ct.est_rows] = True
        out = ~used
        acc[out] += pred[out]
        count[out] += 1.0
    full /= model.num_trees
    never_out = count == 0
    count[never_out] = 1.0
    result = acc / count
    result[never_out] = full[never_out]
    return result
