"""Independent reference implementations used to check the fast code paths.

Everything here is written for clarity over speed (plain loops, repeated
passes) and deliberately avoids the package's internal kernels.
"""

from __future__ import annotations

import numpy as np

from mcforest import leaf_estimate, split_score


def slow_weighted_effect(Y, Z, w):
    """Difference in weighted arm means computed with explicit loops."""
    sw1 = sy1 = sw0 = sy0 = 0.0
    for y, z, wi in zip(Y, Z, w):
        if z == 1:
            sw1 += wi
            sy1 += wi * y
        else:
            sw0 += wi
            sy0 += wi * y
    if sw1 <= 0 or sw0 <= 0:
        return None
    return sy1 / sw1 - sy0 / sw0


def enumerate_best_split(X, Z, Y, w, rows, min_arm_weight, min_node_mass):
    """Exhaustive search over all features and midpoint thresholds.

    Returns (feature, threshold, score) of the best admissible split with
    strictly positive score, ties broken by lowest feature then lowest
    threshold, or None when no such split exists.
    """
    rows = list(rows)
    parent = slow_weighted_effect(Y[rows], Z[rows], w[rows])
    if parent is None:
        return None
    best = None
    for f in range(X.shape[1]):
        values = sorted(set(float(X[r, f]) for r in rows))
        for lo, hi in zip(values[:-1], values[1:]):
            thr = 0.5 * (lo + hi)
            left = [r for r in rows if X[r, f] <= thr]
            right = [r for r in rows if X[r, f] > thr]
            stats = []
            admissible = True
            for side in (left, right):
                sw1 = sum(w[r] for r in side if Z[r] == 1)
                sw0 = sum(w[r] for r in side if Z[r] == 0)
                if sw1 <= 0 or sw0 <= 0 or sw1 < min_arm_weight or sw0 < min_arm_weight:
                    admissible = False
                    break
                if sw1 + sw0 < min_node_mass:
                    admissible = False
                    break
                stats.append((slow_weighted_effect(Y[side], Z[side], w[side]), sw1 + sw0))
            if not admissible:
                continue
            (tau_l, m_l), (tau_r, m_r) = stats
            score = split_score(tau_l, m_l, tau_r, m_r, parent)
            if score > 0 and (best is None or score > best[2]):
                best = (f, thr, score)
    return best


def enumerate_causal_tree(X, Z, Y, w, split_rows, est_rows, min_arm_weight,
                          min_node_mass, depth):
    """Recursively enumerate a small honest tree; mirrors no internal code.

    Nodes are dicts: {"leaf": True, "effect": float} or
    {"leaf": False, "feature": f, "threshold": t, "left": ..., "right": ...}.
    Leaf effects come from the estimation rows, inheriting the nearest
    estimable ancestor (root fallback 0).
    """

    def node_effect(rows, fallback):
        eff = slow_weighted_effect(Y[rows], Z[rows], w[rows]) if len(rows) else None
        return fallback if eff is None else eff

    def build(split_part, est_part, level, fallback):
        own = node_effect(est_part, fallback)
        best = None if level >= depth else enumerate_best_split(
            X, Z, Y, w, split_part, min_arm_weight, min_node_mass)
        if best is None:
            return {"leaf": True, "effect": own}
        f, thr, _ = best
        sl = [r for r in split_part if X[r, f] <= thr]
        sr = [r for r in split_part if X[r, f] > thr]
        el = [r for r in est_part if X[r, f] <= thr]
        er = [r for r in est_part if X[r, f] > thr]
        return {
            "leaf": False, "feature": f, "threshold": thr,
            "left": build(sl, el, level + 1, own),
            "right": build(sr, er, level + 1, own),
        }

    return build(list(split_rows), list(est_rows), 0, 0.0)


def flat_tree_to_dict(tree, node=0):
    """Convert the package's flat tree arrays into the oracle's dict shape."""
    if tree.feature[node] < 0:
        return {"leaf": True, "effect": float(tree.payload[node])}
    return {
        "leaf": False,
        "feature": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "left": flat_tree_to_dict(tree, int(tree.left[node])),
        "right": flat_tree_to_dict(tree, int(tree.right[node])),
    }


def trees_match(a, b, tol=1e-10):
    """Structural and numeric comparison of two oracle-shaped trees."""
    if a["leaf"] != b["leaf"]:
        return False
    if a["leaf"]:
        return abs(a["effect"] - b["effect"]) <= tol
    if a["feature"] != b["feature"]:
        return False
    if abs(a["threshold"] - b["threshold"]) > tol:
        return False
    return trees_match(a["left"], b["left"], tol) and trees_match(a["right"], b["right"], tol)
