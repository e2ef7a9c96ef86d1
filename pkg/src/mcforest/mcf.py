"""Borrowing-weight computation and the six-estimator multi-study fit.

Auxiliary observations are soft-included when fitting on the pooled data:
each auxiliary row i receives a weight built from two ingredients,

* a propensity overlap weight w_i = z_i * p(x_i) + (1 - z_i) * (1 - p(x_i)),
  where p is a classification forest fit on the primary training rows to
  predict treatment from covariates and evaluated at the auxiliary row;
* a similarity weight rho = |Pearson correlation| between the effect
  predictions of a primary-only forest and a pooled forest, both evaluated
  on the primary training rows.

Training rows always keep weight 1. The six fitted variants differ only
in the auxiliary-row weights: 1 (plain pooling), w_i, rho, or w_i * rho
(the multi-study causal forest), plus the two single-study baselines.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .causal import CausalForestModel, default_causal_config, fit_causal_forest, predict_cate, predict_cate_oob
from .data import StudyDataset, concat, require_valid
from .forest import ForestConfig, ProbabilityForest, default_classification_config, fit_classification_forest, predict_probability
from .seeding import derive_seed


class EstimatorKind(enum.Enum):
    """The six effect estimators compared throughout the package."""

    PRIMARY = "primary"        # primary training data only
    AUX_ONLY = "aux_only"      # auxiliary data only
    COMBINED = "combined"      # pooled, unit weights
    AUX_PS = "aux_ps"          # pooled, auxiliary weighted by propensity overlap
    AUX_CORR = "aux_corr"      # pooled, auxiliary weighted by correlation
    MCF = "mcf"                # pooled, auxiliary weighted by the product

    @property
    def label(self) -> str:
        return {
            EstimatorKind.PRIMARY: "Primary",
            EstimatorKind.AUX_ONLY: "Aux only",
            EstimatorKind.COMBINED: "Combined",
            EstimatorKind.AUX_PS: "Aux PS",
            EstimatorKind.AUX_CORR: "Aux Corr",
            EstimatorKind.MCF: "MCF",
        }[self]


def propensity_weights(pi_hat, Z) -> np.ndarray:
    """Overlap weight per observation: its probability of the arm it got.

    w_i = z_i * pi_i + (1 - z_i) * (1 - pi_i). Treated rows that look
    treatable (and controls that look controllable) under the primary
    assignment mechanism get weights near 1.
    """
    pi_hat = np.asarray(pi_hat, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if pi_hat.shape != Z.shape:
        raise ValueError("pi_hat and Z must have equal length")
    if pi_hat.size and (pi_hat.min() < 0.0 or pi_hat.max() > 1.0):
        raise ValueError("propensity values must lie in [0, 1]")
    if not np.isin(Z, (0.0, 1.0)).all():
        raise ValueError("Z must be binary (0/1)")
    return Z * pi_hat + (1.0 - Z) * (1.0 - pi_hat)


def correlation_weight(tau_a, tau_b) -> float:
    """Absolute Pearson correlation of two effect-prediction vectors.

    Returns a borrowing weight in [0, 1]. If either vector has zero sample
    variance the correlation is undefined and the weight is 0: a constant
    prediction carries no evidence of shared heterogeneity structure.
    """
    a = np.asarray(tau_a, dtype=np.float64)
    b = np.asarray(tau_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    if a.size < 2:
        raise ValueError("need at least 2 points to correlate")
    da = a - a.mean()
    db = b - b.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va <= 0.0 or vb <= 0.0:
        return 0.0
    rho = abs(float(da @ db) / float(np.sqrt(va * vb)))
    return min(rho, 1.0)


@dataclass
class McfFit:
    """Everything produced by one multi-study fit.

    ``aux_weights`` are the propensity overlap weights of the auxiliary
    rows; ``final_aux_weights`` = aux_weights * rho are what the
    multi-study forest actually uses. ``models`` maps every estimator kind
    to its fitted forest.
    """

    rho: float
    pi_model: ProbabilityForest | None
    aux_weights: np.ndarray
    final_aux_weights: np.ndarray
    models: dict[EstimatorKind, CausalForestModel]
    diagnostics: list[str]
    tau_train_primary: np.ndarray
    tau_train_pooled: np.ndarray


def _estimator_config(config: ForestConfig, kind: EstimatorKind) -> ForestConfig:
    return config.with_seed(derive_seed(config.seed, "estimator", kind.value))


def fit_mcf(train: StudyDataset, aux: StudyDataset | None,
            config: ForestConfig | None = None, *,
            propensity_config: ForestConfig | None = None,
            pi_clamp: tuple[float, float] = (0.01, 0.99),
            oob_rho: bool = False) -> McfFit:
    """Fit all six estimator variants on a primary training set plus one
    auxiliary study.

    Pipeline: fit the primary-only and plain-pooled forests; correlate
    their effect predictions on the training rows to get rho; fit the
    treatment-assignment forest on the training rows and evaluate it at
    the auxiliary covariates to get the overlap weights (clamped away from
    0/1 so no row is hard-excluded by an overconfident tree); then fit the
    three weighted pooled variants. Every forest draws its own
    deterministic sub-stream of ``config.seed``, so estimators can be
    compared without coupled randomness.

    An empty (or None) auxiliary study degrades to the primary-only fit
    for every variant, with a diagnostic.
    """
    if config is None:
        config = default_causal_config()
    require_valid(train, "primary training data")
    diagnostics: list[str] = []

    if aux is None or aux.n == 0:
        diagnostics.append("auxiliary dataset empty: all variants fall back to the primary-only fit")
        primary_model = fit_causal_forest(train, None, _estimator_config(config, EstimatorKind.PRIMARY))
        empty = np.zeros(0, dtype=np.float64)
        return McfFit(
            rho=0.0, pi_model=None, aux_weights=empty, final_aux_weights=empty,
            models={kind: primary_model for kind in EstimatorKind},
            diagnostics=diagnostics, tau_train_primary=empty, tau_train_pooled=empty,
        )

    require_valid(aux, "auxiliary data")
    if train.p != aux.p:
        raise ValueError(f"covariate dimension mismatch: train p={train.p}, aux p={aux.p}")
    lo, hi = pi_clamp
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"invalid propensity clamp {pi_clamp}")

    pooled = concat(train, aux)
    n_train, n_aux = train.n, aux.n

    primary_model = fit_causal_forest(train, None, _estimator_config(config, EstimatorKind.PRIMARY))
    pooled_model = fit_causal_forest(pooled, None, _estimator_config(config, EstimatorKind.COMBINED))
    aux_model = fit_causal_forest(aux, None, _estimator_config(config, EstimatorKind.AUX_ONLY))

    if oob_rho:
        tau_primary = predict_cate_oob(primary_model, train.X)
        tau_pooled = predict_cate_oob(pooled_model, pooled.X)[:n_train]
    else:
        tau_primary = predict_cate(primary_model, train.X)
        tau_pooled = predict_cate(pooled_model, train.X)
    rho = correlation_weight(tau_primary, tau_pooled)
    if np.ptp(tau_primary) == 0.0 or np.ptp(tau_pooled) == 0.0:
        diagnostics.append("constant effect predictions on training rows: correlation undefined, rho set to 0")

    if propensity_config is None:
        propensity_config = default_classification_config(seed=derive_seed(config.seed, "propensity"))
    pi_model = fit_classification_forest(train.X, train.Z, None, propensity_config)
    pi_aux = np.clip(np.asarray(predict_probability(pi_model, aux.X)), lo, hi)
    aux_w = propensity_weights(pi_aux, aux.Z)
    final_w = aux_w * rho

    def pooled_weights(aux_part: np.ndarray | float) -> np.ndarray:
        w = np.ones(n_train + n_aux, dtype=np.float64)
        w[n_train:] = aux_part
        return w

    models = {
        EstimatorKind.PRIMARY: primary_model,
        EstimatorKind.AUX_ONLY: aux_model,
        EstimatorKind.COMBINED: pooled_model,
        EstimatorKind.AUX_PS: fit_causal_forest(pooled, pooled_weights(aux_w),
                                                _estimator_config(config, EstimatorKind.AUX_PS)),
        EstimatorKind.AUX_CORR: fit_causal_forest(pooled, pooled_weights(rho),
                                                  _estimator_config(config, EstimatorKind.AUX_CORR)),
        EstimatorKind.MCF: fit_causal_forest(pooled, pooled_weights(final_w),
                                             _estimator_config(config, EstimatorKind.MCF)),
    }
    return McfFit(rho=rho, pi_model=pi_model, aux_weights=aux_w, final_aux_weights=final_w,
                  models=models, diagnostics=diagnostics,
                  tau_train_primary=tau_primary, tau_train_pooled=tau_pooled)


def predict_all(fit: McfFit, test: StudyDataset) -> dict[EstimatorKind, np.ndarray]:
    """Effect predictions of every estimator on the test rows."""
    preds = {}
    for kind in EstimatorKind:
        preds[kind] = np.asarray(predict_cate(fit.models[kind], test.X))
    return preds


def summarize_fit(fit: McfFit) -> str:
    """Key-value text block describing one fit (for logs and reports)."""
    lines = [f"rho = {float(fit.rho)!r}", f"n_aux = {fit.aux_weights.size}"]
    for name, w in (("aux_weight", fit.aux_weights), ("final_aux_weight", fit.final_aux_weights)):
        if w.size:
            qs = np.quantile(w, [0.0, 0.25, 0.5, 0.75, 1.0])
            for tag, v in zip(("min", "q25", "median", "q75", "max"), qs):
                lines.append(f"{name}_{tag} = {float(v)!r}")
    for kind in EstimatorKind:
        model = fit.models[kind]
        lines.append(f"estimator {kind.value}: num_trees = {model.num_trees}, seed = {model.config.seed}")
    for diag in fit.diagnostics:
        lines.append(f"diagnostic: {diag}")
    return "\n".join(lines)
