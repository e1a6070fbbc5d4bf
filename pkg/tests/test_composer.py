import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from limdep.composer import (
    TwoComponentModel,
    adjustment_sweep,
    combine,
    combine_predictions,
    component_correlation_prediction,
    fit_pipeline,
    product_correlation_prediction,
    select_s_ad_cv,
    summary_report,
    weight_diagnostics,
)
from limdep.data import TabularDataset, split
from limdep.errors import OutOfRange, PositiveSubsetTooSmall, RequiresLatents
from limdep.learners import LearnerSpec, fit_oracle, predict
from limdep.report import AnalysisReport
from limdep.stats import pearson
from limdep.synth import SyntheticSpec, generate, pseudo_predictions


@pytest.fixture(scope="module")
def synthetic_split():
    pop = generate(SyntheticSpec(n=4000, seed=8))
    ds = pop.to_dataset()
    parts = split(ds, 0.8, seed=1)
    return ds.subset(parts.train_rows), ds.subset(parts.test_rows)


def test_combine_hand_arithmetic():
    out = combine_predictions([0.1, 0.5, 0.9], [10, 20, 30], mu_center=20, s_ad=0.5)
    assert np.allclose(out, [1.5, 10.0, 22.5])
    assert np.array_equal(
        combine_predictions([0.1, 0.5], [10, 20], mu_center=3, s_ad=1.0), [1.0, 10.0]
    )
    assert np.allclose(combine_predictions([0.1, 0.5], [10, 20], 15, 0.0), [1.5, 7.5])


def test_constant_amount_model_gives_flat_sweep():
    rng = np.random.default_rng(0)
    p_hat = rng.random(500)
    y = np.where(rng.random(500) < p_hat, rng.gamma(2, 5, 500), 0.0)
    sweep = adjustment_sweep(p_hat, np.full(500, 7.0), y)
    assert np.allclose(sweep.correlations, pearson(p_hat, y), atol=1e-12)
    assert sweep.best_s_ad == 0.0
    assert sweep.selection == "diagnostic, in-sample-of-test"


def test_sweep_grid_always_contains_zero_and_one():
    rng = np.random.default_rng(1)
    p_hat, mu_hat = rng.random(100), rng.random(100) + 1
    y = rng.random(100)
    sweep = adjustment_sweep(p_hat, mu_hat, y, grid=(0.5,))
    assert sweep.grid == (0.0, 0.5, 1.0)
    assert sweep.cor_at_one == pytest.approx(pearson(p_hat * mu_hat, y))


@settings(max_examples=50)
@given(
    arrays(np.float64, 30, elements=st.floats(0.01, 0.99)),
    arrays(np.float64, 30, elements=st.floats(1, 100)),
    st.floats(0.1, 100),
)
def test_sweep_at_zero_equals_probability_model(p_hat, mu_hat, center):
    y = np.arange(30.0) % 7
    assume(np.ptp(p_hat) > 1e-6)
    sweep = adjustment_sweep(p_hat, mu_hat, y, mu_center=center)
    assert abs(sweep.cor_at_zero - pearson(p_hat, y)) < 1e-10


def test_sweep_is_order_independent():
    rng = np.random.default_rng(2)
    p_hat, mu_hat, y = rng.random(200), rng.random(200) + 1, rng.random(200)
    forward = adjustment_sweep(p_hat, mu_hat, y, grid=(0.2, 0.4, 1.5))
    backward = adjustment_sweep(p_hat, mu_hat, y, grid=(1.5, 0.4, 0.2))
    assert forward == backward


def test_pipeline_subset_sizes_and_baselines():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1000, 2))
    y = np.where(np.arange(1000) % 2 == 0, 0.0, rng.gamma(2.0, 3.0, 1000))
    ds = TabularDataset(x, y)
    models = fit_pipeline(ds, LearnerSpec(kind="constant_mean"))
    assert models.mu_hat.training_rows == 500
    q = x[:3]
    assert np.allclose(predict(models.zeta_hat, q), y.mean())
    assert np.allclose(predict(models.p_hat, q), 0.5)
    assert np.allclose(predict(models.mu_hat, q), y[y > 0].mean())


def test_pipeline_rejects_tiny_positive_subset():
    y = np.zeros(40)
    y[:3] = 1.0
    ds = TabularDataset(np.zeros((40, 1)), y)
    with pytest.raises(PositiveSubsetTooSmall):
        fit_pipeline(ds, LearnerSpec())


def test_forest_pipeline_and_report(synthetic_split):
    train, test = synthetic_split
    spec = LearnerSpec(n_trees=20, seed=2)
    models = fit_pipeline(train, spec)
    tcm = TwoComponentModel.from_pipeline(models, train.features)
    assert tcm.mu_center == pytest.approx(predict(models.mu_hat, train.features).mean())
    raw = combine(tcm, test.features)
    p_hat, mu_hat = tcm.predict_components(test.features)
    assert np.array_equal(raw, p_hat * mu_hat)
    assert np.allclose(combine(tcm.with_s_ad(0.0), test.features), p_hat * tcm.mu_center)

    report = summary_report(models, train, test, learner_spec=spec, seeds={"split": 1})
    assert isinstance(report, AnalysisReport)
    assert report.n_train == 3200 and report.n_test == 800
    assert all(-1 <= v <= 1 for v in report.table.values())
    assert report.weights["empirical"] is True
    assert report.table["cor_p_hat_c"] > 0.2


def test_cross_validated_adjustment(synthetic_split):
    train, _ = synthetic_split
    best, curve = select_s_ad_cv(train, LearnerSpec(kind="linear_least_squares"), folds=3)
    assert 0.0 <= best <= 2.0
    assert len(curve) == 41


def test_weight_diagnostics_oracle_models():
    pop = generate(SyntheticSpec(n=200_000, seed=4))
    wd = weight_diagnostics(pop.p_x, pop.mu_x, pop.p_x, pop.mu_x)
    assert wd.observed_product_cor == pytest.approx(1.0)
    assert abs(wd.r_residual) < 0.01
    assert wd.cv_p / wd.cv_mu == pytest.approx(wd.w_p / wd.w_mu, rel=1e-12)


def test_weight_diagnostics_on_strongly_linear_population():
    pop = generate(SyntheticSpec(n=1_000_000, seed=6, beta_mu=(0, 0, 0, 0.1, 0.08, 0.06)))
    assert pearson(pop.p_x, pop.zeta) > 0.95
    rng = np.random.default_rng(5)
    p_hat = pseudo_predictions(pop.p_x, 0.6, rng.standard_normal(pop.n))
    mu_hat = pseudo_predictions(pop.mu_x, 0.6, rng.standard_normal(pop.n))
    wd = weight_diagnostics(p_hat, mu_hat, pop.p_x, pop.mu_x)
    assert abs(wd.r_residual) < 0.02
    assert wd.cor_p_hat_p == pytest.approx(0.6, abs=1e-10)


def test_weight_diagnostics_needs_latents_or_proxies():
    with pytest.raises(RequiresLatents):
        weight_diagnostics([1.0, 2.0], [3.0, 1.0])


def test_component_correlation_prediction():
    assert component_correlation_prediction(1.0, 0.9) == pytest.approx(0.9)
    assert component_correlation_prediction(0.0, 0.4) == 0.0
    with pytest.raises(OutOfRange):
        component_correlation_prediction(1.2, 0.5)
    with pytest.raises(OutOfRange):
        product_correlation_prediction(0.5, 0.5, 2.0, 0.5, 0.1, 1, 1, 1)


def test_component_correlation_on_calibrated_population():
    spec = SyntheticSpec(n=1_000_000, seed=2, beta_mu=(0, 0, 0, 0.225, 0.18, 0.135))
    pop = generate(spec)
    lin_p = pearson(pop.p_x, pop.zeta)
    assert lin_p == pytest.approx(0.85, abs=0.01)
    p_hat = pseudo_predictions(pop.p_x, 0.7, np.random.default_rng(0).standard_normal(pop.n))
    measured = pearson(p_hat, pop.zeta)
    assert measured == pytest.approx(component_correlation_prediction(0.7, lin_p), abs=0.02)
    assert measured == pytest.approx(0.595, abs=0.02)


def test_oracle_models_on_noiseless_target():
    pop = generate(SyntheticSpec(n=5000, seed=1))
    p_hat = predict(fit_oracle(pop, "p"), pop.features)
    mu_hat = predict(fit_oracle(pop, "mu"), pop.features)
    # with eps = 0 the observed target is the product itself
    assert pearson(p_hat * mu_hat, pop.zeta) == pytest.approx(1.0, abs=1e-12)
