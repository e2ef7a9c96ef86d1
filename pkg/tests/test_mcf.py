import numpy as np
import pytest

from mcforest import (
    EstimatorKind,
    ForestConfig,
    SplitSpec,
    StudyDataset,
    correlation_weight,
    fit_mcf,
    generate_pair,
    predict_all,
    propensity_weights,
    scenario_from_tables,
    split_train_test,
    summarize_fit,
)

TINY_CFG = ForestConfig(num_trees=60, seed=0)
TINY_PROP = ForestConfig(num_trees=40, min_node_size=10, seed=1)


def copy_as_aux(data: StudyDataset) -> StudyDataset:
    return StudyDataset(X=data.X, Z=data.Z, Y=data.Y, S=np.ones(data.n), tau_true=data.tau_true)


class TestPropensityWeights:
    def test_treated_row_gets_its_propensity(self):
        assert propensity_weights([0.7], [1.0])[0] == pytest.approx(0.7, abs=1e-12)

    def test_control_row_gets_complement(self):
        assert propensity_weights([0.7], [0.0])[0] == pytest.approx(0.3, abs=1e-12)

    def test_half_is_symmetric(self):
        w = propensity_weights([0.5, 0.5], [1.0, 0.0])
        assert w[0] == pytest.approx(0.5, abs=1e-12)
        assert w[1] == pytest.approx(0.5, abs=1e-12)

    def test_arm_weights_sum_to_one_for_same_propensity(self):
        rng = np.random.default_rng(0)
        pi = rng.uniform(0, 1, 50)
        treated = propensity_weights(pi, np.ones(50))
        control = propensity_weights(pi, np.zeros(50))
        assert np.allclose(treated + control, 1.0, atol=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal length"):
            propensity_weights([0.5, 0.5], [1.0])

    def test_out_of_range_probability_rejected(self):
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            propensity_weights([1.2], [1.0])


class TestCorrelationWeight:
    def test_self_correlation_is_one(self):
        v = np.array([0.3, -1.0, 2.0, 0.1])
        assert correlation_weight(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_anti_correlation_is_one_in_absolute_value(self):
        v = np.array([0.3, -1.0, 2.0, 0.1])
        assert correlation_weight(v, -v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_vectors_give_zero(self):
        a = np.array([1.0, -1.0, 1.0, -1.0])
        b = np.array([1.0, 1.0, -1.0, -1.0])
        assert correlation_weight(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_constant_vector_gives_zero(self):
        assert correlation_weight(np.ones(5), np.arange(5.0)) == 0.0
        assert correlation_weight(np.arange(5.0), np.full(5, 2.5)) == 0.0

    def test_affine_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = rng.standard_normal(20)
            b = rng.standard_normal(20)
            base = correlation_weight(a, b)
            shifted = correlation_weight(3.5 * a - 2.0, 0.25 * b + 11.0)
            assert shifted == pytest.approx(base, abs=1e-10)

    def test_always_in_unit_interval(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            rho = correlation_weight(rng.standard_normal(8), rng.standard_normal(8))
            assert 0.0 <= rho <= 1.0

    def test_short_or_mismatched_inputs_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            correlation_weight([1.0], [2.0])
        with pytest.raises(ValueError, match="equal length"):
            correlation_weight([1.0, 2.0], [1.0, 2.0, 3.0])


@pytest.fixture(scope="module")
def quick_fit():
    scn = scenario_from_tables("high", "high")
    pair = generate_pair(scn, 17)
    train, test = split_train_test(pair.primary, SplitSpec(0.5, 2))
    fit = fit_mcf(train, pair.auxiliary, TINY_CFG, propensity_config=TINY_PROP)
    return train, test, pair, fit


class TestFitMcf:
    def test_weight_bookkeeping(self, quick_fit):
        _, _, pair, fit = quick_fit
        assert fit.aux_weights.shape == (pair.auxiliary.n,)
        assert 0.0 <= fit.rho <= 1.0
        assert np.all(fit.aux_weights >= 0.0) and np.all(fit.aux_weights <= 1.0)
        assert np.allclose(fit.final_aux_weights, fit.aux_weights * fit.rho, atol=1e-15)
        assert np.all(fit.final_aux_weights <= fit.aux_weights + 1e-15)

    def test_all_six_models_fitted(self, quick_fit):
        *_, fit = quick_fit
        assert set(fit.models) == set(EstimatorKind)
        assert all(m.num_trees == TINY_CFG.num_trees for m in fit.models.values())

    def test_estimator_seeds_are_independent(self, quick_fit):
        *_, fit = quick_fit
        seeds = {fit.models[k].config.seed for k in EstimatorKind}
        assert len(seeds) == len(EstimatorKind)

    def test_propensity_clamp_keeps_weights_off_zero(self, quick_fit):
        *_, fit = quick_fit
        assert fit.aux_weights.min() >= 0.01 - 1e-15
        assert fit.aux_weights.max() <= 0.99 + 1e-15

    def test_empty_auxiliary_degrades_to_primary_only(self):
        scn = scenario_from_tables("none", "low", n_primary=120)
        train = generate_pair(scn, 3).primary
        empty = StudyDataset(X=np.zeros((0, 10)), Z=np.zeros(0), Y=np.zeros(0), S=np.zeros(0))
        fit = fit_mcf(train, empty, TINY_CFG, propensity_config=TINY_PROP)
        assert fit.rho == 0.0
        assert any("empty" in d for d in fit.diagnostics)
        assert all(fit.models[k] is fit.models[EstimatorKind.PRIMARY] for k in EstimatorKind)
        preds = predict_all(fit, train)
        assert np.array_equal(preds[EstimatorKind.MCF], preds[EstimatorKind.PRIMARY])

    def test_dimension_mismatch_rejected(self):
        scn = scenario_from_tables("none", "low", n_primary=80, n_aux=80)
        pair = generate_pair(scn, 5)
        narrower = StudyDataset(X=pair.auxiliary.X[:, :6], Z=pair.auxiliary.Z,
                                Y=pair.auxiliary.Y, S=pair.auxiliary.S)
        with pytest.raises(ValueError, match="dimension mismatch"):
            fit_mcf(pair.primary, narrower, TINY_CFG, propensity_config=TINY_PROP)

    def test_out_of_bag_rho_flag(self, quick_fit):
        train, _, pair, in_sample_fit = quick_fit
        fit = fit_mcf(train, pair.auxiliary, TINY_CFG, propensity_config=TINY_PROP, oob_rho=True)
        assert 0.0 <= fit.rho <= 1.0
        assert fit.tau_train_primary.shape == (train.n,)
        # different prediction scheme, same forests
        assert not np.array_equal(fit.tau_train_primary, in_sample_fit.tau_train_primary)
        a = predict_all(fit, train)[EstimatorKind.PRIMARY]
        b = predict_all(in_sample_fit, train)[EstimatorKind.PRIMARY]
        assert np.array_equal(a, b)

    def test_summary_text_reports_rho_and_weights(self, quick_fit):
        *_, fit = quick_fit
        text = summarize_fit(fit)
        assert "rho = " in text
        assert "aux_weight_median = " in text
        assert "final_aux_weight_max = " in text
        for kind in EstimatorKind:
            assert f"estimator {kind.value}:" in text


class TestPredictAll:
    def test_six_keys_always_present(self, quick_fit):
        _, test, _, fit = quick_fit
        preds = predict_all(fit, test)
        assert set(preds) == set(EstimatorKind)
        assert all(p.shape == (test.n,) for p in preds.values())

    def test_all_predictions_finite(self, quick_fit):
        _, test, _, fit = quick_fit
        preds = predict_all(fit, test)
        for p in preds.values():
            assert np.isfinite(p).all()

    def test_primary_predictions_ignore_auxiliary_content(self, quick_fit):
        train, test, pair, fit = quick_fit
        mutated = StudyDataset(X=pair.auxiliary.X, Z=pair.auxiliary.Z,
                               Y=pair.auxiliary.Y + 100.0, S=pair.auxiliary.S,
                               tau_true=pair.auxiliary.tau_true)
        refit = fit_mcf(train, mutated, TINY_CFG, propensity_config=TINY_PROP)
        a = predict_all(fit, test)[EstimatorKind.PRIMARY]
        b = predict_all(refit, test)[EstimatorKind.PRIMARY]
        assert np.array_equal(a, b)

    def test_dimension_mismatch_rejected(self, quick_fit):
        *_, fit = quick_fit
        bad = StudyDataset(X=np.zeros((3, 4)), Z=[0, 1, 0], Y=np.zeros(3), S=np.zeros(3))
        with pytest.raises(ValueError, match="covariates"):
            predict_all(fit, bad)


class TestBorrowingBehavior:
    """Monte-Carlo behavior of rho and the weighted variants."""

    COPY_SEEDS = range(20)

    def test_identical_copy_gives_high_rho_and_mcf_tracks_pooling(self):
        # Auxiliary = verbatim copy of the training data: the similarity
        # weight must be near 1 and the product-weighted forest must stay
        # close to plain pooling. Achieved values (20 seeds, 500 trees):
        # mean rho 0.9675, mean |MCF - Combined| 0.109, max 0.135.
        scn = scenario_from_tables("none", "low")
        cfg = ForestConfig(num_trees=500, seed=0)
        prop = ForestConfig(num_trees=200, min_node_size=10, seed=1)
        rhos, gaps = [], []
        for seed in self.COPY_SEEDS:
            train = generate_pair(scn, 100 + seed).primary
            test = generate_pair(scn, 7000 + seed).primary
            fit = fit_mcf(train, copy_as_aux(train), cfg.with_seed(seed),
                          propensity_config=prop.with_seed(seed + 1))
            preds = predict_all(fit, test)
            rhos.append(fit.rho)
            gaps.append(np.abs(preds[EstimatorKind.MCF] - preds[EstimatorKind.COMBINED]).mean())
        assert np.mean(rhos) >= 0.95
        assert np.mean(gaps) <= 0.15
        assert np.max(gaps) <= 0.25

    def test_heterogeneous_auxiliary_lowers_rho(self):
        # Paired comparison on the same seeds: a strongly heterogeneous
        # auxiliary study must depress the similarity weight well below
        # the identical-copy case (mean difference at least 0.1).
        cfg = ForestConfig(num_trees=150, seed=0)
        prop = ForestConfig(num_trees=80, min_node_size=10, seed=1)
        none_scn = scenario_from_tables("none", "low")
        high_scn = scenario_from_tables("high", "high")
        rho_copy, rho_het = [], []
        for seed in range(20):
            train = generate_pair(none_scn, 100 + seed).primary
            fit_c = fit_mcf(train, copy_as_aux(train), cfg.with_seed(seed),
                            propensity_config=prop.with_seed(seed + 1))
            rho_copy.append(fit_c.rho)
            pair_h = generate_pair(high_scn, 100 + seed)
            fit_h = fit_mcf(pair_h.primary, pair_h.auxiliary, cfg.with_seed(seed),
                            propensity_config=prop.with_seed(seed + 1))
            rho_het.append(fit_h.rho)
        assert np.mean(rho_copy) - np.mean(rho_het) >= 0.1

    def test_forced_zero_rho_reduces_mcf_to_primary_weights(self):
        # rho = 0 (constant effect vector) zeroes every final weight, and
        # zero-weight rows are exactly absent from a fit, so the
        # multi-study forest collapses onto the primary-only estimator.
        assert correlation_weight(np.full(10, 1.4), np.arange(10.0)) == 0.0
        scn = scenario_from_tables("high", "high", n_primary=200, n_aux=200)
        pair = generate_pair(scn, 11)
        train, test = split_train_test(pair.primary, SplitSpec(0.5, 4))
        fit = fit_mcf(train, pair.auxiliary, TINY_CFG, propensity_config=TINY_PROP)
        from mcforest import concat, fit_causal_forest, predict_cate

        pooled = concat(train, pair.auxiliary)
        w = np.ones(pooled.n)
        w[train.n:] = 0.0  # the rho -> 0 limit of the final weights
        aligned_cfg = fit.models[EstimatorKind.MCF].config
        zeroed = fit_causal_forest(pooled, w, aligned_cfg)
        primary_aligned = fit_causal_forest(train, None, aligned_cfg)
        assert np.array_equal(predict_cate(zeroed, test.X), predict_cate(primary_aligned, test.X))
