"""Single versus two-component models for limited targets.

The two-component prediction is ``p_hat(x) * mu_hat(x)``. Its correlation
with the composite target is governed by three weights built from the
coefficients of variation of the two factors, which need not match how well
each factor predicts. The ``s_ad`` adjustment rescales the spread of
``mu_hat`` around its centre to rebalance them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from limdep import learners
from limdep.data import ComponentView, TabularDataset, decompose
from limdep.errors import OutOfRange, PositiveSubsetTooSmall, ZeroMean, ZeroVariance
from limdep.learners import FittedModel, LearnerSpec
from limdep.stats import pearson, var

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(41))


@dataclass(frozen=True)
class PipelineModels:
    zeta_hat: FittedModel
    p_hat: FittedModel
    mu_hat: FittedModel


def fit_pipeline(
    train: TabularDataset,
    spec: LearnerSpec,
    components: ComponentView | None = None,
) -> PipelineModels:
    """Fit the single model on ``y``, ``p_hat`` on ``c`` and ``mu_hat`` on the positive rows.

    ``mu_hat`` sees only rows with ``y > 0`` and is applied everywhere without
    any selection correction: it estimates ``E[a | x, c = 1]`` at every ``x``.
    """
    comp = components if components is not None else decompose(train)
    if comp.a.shape[0] < 2 * spec.min_leaf:
        raise PositiveSubsetTooSmall(
            f"{comp.a.shape[0]} positive rows < 2 * min_leaf = {2 * spec.min_leaf}"
        )
    x = train.features
    return PipelineModels(
        zeta_hat=learners.fit(spec, x, train.target, "zeta_hat"),
        p_hat=learners.fit(spec, x, comp.c.astype(np.float64), "p_hat"),
        mu_hat=learners.fit(spec, x[comp.positive_index], comp.a, "mu_hat"),
    )


def combine_predictions(p_hat, mu_hat, mu_center: float, s_ad: float = 1.0) -> np.ndarray:
    p_hat = np.asarray(p_hat, dtype=np.float64)
    mu_hat = np.asarray(mu_hat, dtype=np.float64)
    if s_ad == 1.0:
        return p_hat * mu_hat
    return p_hat * ((mu_hat - mu_center) * s_ad + mu_center)


@dataclass(frozen=True)
class TwoComponentModel:
    """``p_hat`` and ``mu_hat`` plus the spread adjustment ``s_ad``.

    ``mu_center`` is the mean ``mu_hat`` prediction on a reference sample; by
    default the training rows (see :meth:`from_pipeline`).
    """

    p_model: FittedModel
    mu_model: FittedModel
    mu_center: float
    s_ad: float = 1.0

    def __post_init__(self):
        if self.s_ad < 0:
            raise ValueError("s_ad must be >= 0")

    @classmethod
    def from_pipeline(cls, models: PipelineModels, reference_features, s_ad: float = 1.0):
        center = float(np.mean(learners.predict(models.mu_hat, reference_features)))
        return cls(models.p_hat, models.mu_hat, center, s_ad)

    def with_s_ad(self, s_ad: float) -> "TwoComponentModel":
        return TwoComponentModel(self.p_model, self.mu_model, self.mu_center, s_ad)

    def predict_components(self, features) -> tuple[np.ndarray, np.ndarray]:
        return learners.predict(self.p_model, features), learners.predict(self.mu_model, features)


def combine(model: TwoComponentModel, features) -> np.ndarray:
    p_hat, mu_hat = model.predict_components(features)
    return combine_predictions(p_hat, mu_hat, model.mu_center, model.s_ad)


@dataclass(frozen=True)
class SweepResult:
    grid: tuple[float, ...]
    correlations: tuple[float, ...]
    best_s_ad: float
    cor_at_zero: float
    cor_at_one: float
    single_model_cor: float | None = None
    selection: str = "diagnostic, in-sample-of-test"

    @property
    def best_cor(self) -> float:
        return max(self.correlations)


def adjustment_sweep(
    p_hat,
    mu_hat,
    y,
    mu_center: float | None = None,
    grid=DEFAULT_GRID,
    single_model=None,
) -> SweepResult:
    """Correlation of ``p_hat * mu_hat_s`` with ``y`` over a grid of ``s_ad``.

    ``mu_center`` defaults to the mean of ``mu_hat``; pass the training-sample
    centre to keep the adjusted model a legitimate predictor. Ties in the
    maximum go to the smaller ``s_ad``. ``single_model`` holds optional
    predictions of a one-model baseline, reported as ``single_model_cor``.
    """
    p_hat = np.asarray(p_hat, dtype=np.float64)
    mu_hat = np.asarray(mu_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = tuple(sorted({float(g) for g in grid} | {0.0, 1.0}))
    if grid[0] < 0:
        raise ValueError("s_ad grid values must be >= 0")
    if np.all(y == y[0]):
        raise ZeroVariance("test target is constant")
    center = float(mu_hat.mean()) if mu_center is None else float(mu_center)
    cors = tuple(
        pearson(combine_predictions(p_hat, mu_hat, center, s), y) for s in grid
    )
    best = int(np.argmax(cors))  # first maximum, i.e. smallest s_ad
    single = None if single_model is None else pearson(single_model, y)
    return SweepResult(
        grid=grid,
        correlations=cors,
        best_s_ad=grid[best],
        cor_at_zero=cors[grid.index(0.0)],
        cor_at_one=cors[grid.index(1.0)],
        single_model_cor=single,
    )


def select_s_ad_cv(
    train: TabularDataset,
    spec: LearnerSpec,
    folds: int = 3,
    grid=DEFAULT_GRID,
    seed: int = 0,
) -> tuple[float, tuple[float, ...]]:
    """Pick ``s_ad`` by k-fold cross-validation on the training data only.

    Returns the chosen value and the fold-averaged correlation curve.
    """
    n = train.n_rows
    order = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(order, folds)
    curves = []
    for k in range(folds):
        held = np.sort(parts[k])
        fit_rows = np.sort(np.concatenate([parts[j] for j in range(folds) if j != k]))
        fit_set = train.subset(fit_rows)
        models = fit_pipeline(fit_set, spec)
        tcm = TwoComponentModel.from_pipeline(models, fit_set.features)
        p, mu = tcm.predict_components(train.features[held])
        sweep = adjustment_sweep(p, mu, train.target[held], tcm.mu_center, grid)
        curves.append(sweep.correlations)
        grid_used = sweep.grid
    mean_curve = tuple(float(v) for v in np.mean(curves, axis=0))
    return grid_used[int(np.argmax(mean_curve))], mean_curve


@dataclass(frozen=True)
class WeightDiagnostics:
    w_pm: float
    w_p: float
    w_mu: float
    cv_p: float
    cv_mu: float
    c_interaction: float
    r_residual: float
    predicted_product_cor: float
    observed_product_cor: float
    cor_p_hat_p: float = float("nan")
    cor_mu_hat_mu: float = float("nan")
    linear_factor_p: float = float("nan")
    linear_factor_mu: float = float("nan")
    shared_factor: float = float("nan")
    empirical: bool = False


def weight_diagnostics(p_hat, mu_hat, p=None, mu=None, *, c=None, y=None) -> WeightDiagnostics:
    """Decompose ``Cor(p_hat mu_hat, p mu)`` into weighted component terms.

    With the latent ``p`` and ``mu`` supplied, the prediction

        w_pm Cor(p_hat,p) Cor(mu_hat,mu) C_I
        + w_p Cor(p_hat,p) Cor(p,p mu) + w_mu Cor(mu_hat,mu) Cor(mu,p mu)

    is compared with the directly observed correlation; ``r_residual`` is
    their difference. The weights are ``shared * CV(p_hat) CV(mu_hat)``,
    ``shared * CV(p_hat)`` and ``shared * CV(mu_hat)`` with
    ``shared = E[p_hat] E[mu_hat] / sd(p_hat mu_hat)``, kept signed so the
    ratio ``w_p / w_mu`` equals ``cv_p / cv_mu`` for any means.

    Without latents, pass the observed ``c`` and ``y`` instead (empirical
    mode). ``c`` stands in for ``p``, ``y`` for ``p mu``, and the amount
    ``a = y`` where ``c = 1`` (filled with its mean elsewhere) for ``mu``.
    These proxies are noisy and the result is flagged ``empirical``.
    """
    p_hat = np.asarray(p_hat, dtype=np.float64)
    mu_hat = np.asarray(mu_hat, dtype=np.float64)
    empirical = p is None or mu is None
    if empirical:
        if c is None or y is None:
            from limdep.errors import RequiresLatents

            raise RequiresLatents("pass latent p and mu, or observed c and y")
        c = np.asarray(c, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        pos = c == 1
        if np.count_nonzero(pos) < 2:
            raise ZeroVariance("need at least two positive rows")
        a_fill = np.where(pos, y, y[pos].mean())
        p_proxy, mu_proxy, target = c, a_fill, y
        cor_p = pearson(p_hat, c)
        cor_mu = pearson(mu_hat[pos], y[pos])
    else:
        p_proxy = np.asarray(p, dtype=np.float64)
        mu_proxy = np.asarray(mu, dtype=np.float64)
        target = p_proxy * mu_proxy
        cor_p = pearson(p_hat, p_proxy)
        cor_mu = pearson(mu_hat, mu_proxy)

    product = p_hat * mu_hat
    mean_p_hat = float(p_hat.mean())
    mean_mu_hat = float(mu_hat.mean())
    if mean_p_hat == 0.0 or mean_mu_hat == 0.0:
        raise ZeroMean("component predictions must have nonzero mean")
    sd_p_hat = math.sqrt(var(p_hat))
    sd_mu_hat = math.sqrt(var(mu_hat))
    sd_prod = math.sqrt(var(product))
    if sd_p_hat == 0.0 or sd_mu_hat == 0.0 or sd_prod == 0.0:
        raise ZeroVariance("component predictions must vary")

    cv_p = sd_p_hat / mean_p_hat
    cv_mu = sd_mu_hat / mean_mu_hat
    shared = mean_p_hat * mean_mu_hat / sd_prod
    w_pm = sd_p_hat * sd_mu_hat / sd_prod
    w_p = mean_mu_hat * sd_p_hat / sd_prod
    w_mu = mean_p_hat * sd_mu_hat / sd_prod

    sd_p = math.sqrt(var(p_proxy))
    sd_mu = math.sqrt(var(mu_proxy))
    sd_target = math.sqrt(var(target))
    lin_p = pearson(p_proxy, target)
    lin_mu = pearson(mu_proxy, target)
    c_interaction = (
        sd_target / (sd_p * sd_mu)
        - lin_p * float(mu_proxy.mean()) / sd_mu
        - lin_mu * float(p_proxy.mean()) / sd_p
    )
    predicted = w_pm * cor_p * cor_mu * c_interaction + w_p * cor_p * lin_p + w_mu * cor_mu * lin_mu
    observed = pearson(product, target)
    return WeightDiagnostics(
        w_pm=w_pm,
        w_p=w_p,
        w_mu=w_mu,
        cv_p=cv_p,
        cv_mu=cv_mu,
        c_interaction=c_interaction,
        r_residual=observed - predicted,
        predicted_product_cor=predicted,
        observed_product_cor=observed,
        cor_p_hat_p=cor_p,
        cor_mu_hat_mu=cor_mu,
        linear_factor_p=lin_p,
        linear_factor_mu=lin_mu,
        shared_factor=shared,
        empirical=empirical,
    )


def component_correlation_prediction(cor_model_target: float, cor_target_composite: float) -> float:
    """Approximate ``Cor(model, p mu)`` as ``Cor(model, component) * Cor(component, p mu)``."""
    for v in (cor_model_target, cor_target_composite):
        if not -1.0 <= v <= 1.0:
            raise OutOfRange(f"correlation {v} outside [-1, 1]")
    return cor_model_target * cor_target_composite


def product_correlation_prediction(
    cor_p_hat_p, cor_mu_hat_mu, linear_factor_p, linear_factor_mu, c_interaction, w_pm, w_p, w_mu
) -> float:
    for v in (cor_p_hat_p, cor_mu_hat_mu, linear_factor_p, linear_factor_mu):
        if not -1.0 <= v <= 1.0:
            raise OutOfRange(f"correlation {v} outside [-1, 1]")
    return (
        w_pm * cor_p_hat_p * cor_mu_hat_mu * c_interaction
        + w_p * cor_p_hat_p * linear_factor_p
        + w_mu * cor_mu_hat_mu * linear_factor_mu
    )


@dataclass(frozen=True)
class Table1Stats:
    cor_ac_c: float
    cor_p_hat_c: float
    cor_mu_hat_a: float
    cor_p_hat_ac: float
    cor_p_hat_mu_hat_ac: float
    cor_zeta_hat_ac: float


def summary_report(
    models: PipelineModels,
    train: TabularDataset,
    test: TabularDataset,
    grid=DEFAULT_GRID,
    learner_spec: LearnerSpec | None = None,
    seeds: dict | None = None,
):
    """Evaluate a fitted pipeline on the test rows and build an analysis report."""
    from limdep.report import AnalysisReport

    comp = decompose(test)
    x, y = test.features, test.target
    tcm = TwoComponentModel.from_pipeline(models, train.features)
    p_hat, mu_hat = tcm.predict_components(x)
    zeta_hat = learners.predict(models.zeta_hat, x)
    product = p_hat * mu_hat
    pos = comp.positive_index
    stats = Table1Stats(
        cor_ac_c=pearson(y, comp.c),
        cor_p_hat_c=pearson(p_hat, comp.c),
        cor_mu_hat_a=pearson(mu_hat[pos], comp.a),
        cor_p_hat_ac=pearson(p_hat, y),
        cor_p_hat_mu_hat_ac=pearson(product, y),
        cor_zeta_hat_ac=pearson(zeta_hat, y),
    )
    sweep = adjustment_sweep(p_hat, mu_hat, y, tcm.mu_center, grid, single_model=zeta_hat)
    weights = weight_diagnostics(p_hat, mu_hat, c=comp.c, y=y)
    return AnalysisReport.build(
        dataset=test.name,
        zero_share=comp.zero_share,
        n_train=train.n_rows,
        n_test=test.n_rows,
        table=stats,
        sweep=sweep,
        weights=weights,
        mu_center=tcm.mu_center,
        learner=learner_spec if learner_spec is not None else models.p_hat.spec,
        seeds=seeds or {},
    )
