import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limdep.errors import DegenerateSpec, ZeroVariance
from limdep.stats import pearson
from limdep.synth import (
    DEFAULT_TOLERANCES,
    PRESETS,
    SyntheticPopulation,
    SyntheticSpec,
    generate,
    make_pseudo_model,
    population_summary,
    pseudo_predictions,
    required_correlation_contour,
    resolve_spec,
    verify_identities,
)


def test_generation_is_bit_identical():
    spec = SyntheticSpec(n=5000, seed=12)
    a, b = generate(spec), generate(spec)
    for name in ("features", "p_x", "mu_x", "c", "a", "y", "eps"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_population_fields_are_consistent(small_population):
    pop = small_population
    assert np.all((pop.p_x > 0) & (pop.p_x < 1))
    assert np.all(pop.mu_x > 0)
    assert np.all(pop.a > 0)
    assert np.array_equal(pop.y, np.where(pop.c == 1, pop.a, 0.0))
    assert np.array_equal(pop.eps_p, pop.c - pop.p_x)
    assert np.array_equal(pop.eps_mu, pop.a - pop.mu_x)
    assert np.array_equal(pop.zeta, pop.p_x * pop.mu_x)
    scale = np.maximum(np.abs(pop.zeta), np.abs(pop.eps))
    assert np.max(np.abs(pop.zeta + pop.eps - pop.y) / scale) < 1e-12
    se = pop.eps.std() / math.sqrt(pop.n)
    assert abs(pop.eps.mean()) < 3 * se


def test_symmetric_logistic_gives_half_occurrence():
    spec = SyntheticSpec(n=1_000_000, beta_p=(0,) * 6, intercept_p=0.0)
    pop = generate(spec)
    assert np.all(pop.p_x == 0.5)
    se = 0.5 / math.sqrt(pop.n)
    assert abs(pop.c.mean() - 0.5) < 3 * se


def test_large_shape_makes_amount_noise_small():
    pop = generate(SyntheticSpec(n=200_000, amount_shape=1e4))
    pos = pop.c == 1
    ratio = np.var(pop.eps_mu[pos]) / np.mean(pop.mu_x) ** 2
    assert ratio < 5e-4
    assert population_summary(pop)["snr_a"] > 100


def test_independent_links_are_uncorrelated():
    pop = generate(SyntheticSpec(n=1_000_000, seed=4))
    cov = np.cov(pop.p_x, pop.mu_x)[0, 1]
    prod = (pop.p_x - pop.p_x.mean()) * (pop.mu_x - pop.mu_x.mean())
    se = prod.std() / math.sqrt(pop.n)
    assert abs(cov) < 3 * se


def test_lognormal_amounts_keep_the_mean():
    pop = generate(SyntheticSpec(n=400_000, amount_dist="lognormal", amount_shape=3.0))
    ratio = pop.a / pop.mu_x
    assert ratio.mean() == pytest.approx(1.0, abs=0.01)
    assert ratio.var() == pytest.approx(1 / 3, rel=0.05)


def test_degenerate_specs():
    with pytest.raises(DegenerateSpec):
        generate(SyntheticSpec(n=1000, beta_p=(0,) * 6, intercept_p=-60.0))
    with pytest.raises(ValueError):
        SyntheticSpec(beta_p=(1, 0, 0, 0, 0, 0), beta_mu=(1, 0, 0, 0, 0, 0))
    with pytest.raises(ValueError):
        SyntheticSpec(dependence=1.5)
    with pytest.raises(ValueError):
        SyntheticSpec.from_dict({"n": 10, "colour": "red"})


def test_spec_round_trip_and_presets(tmp_path):
    spec = PRESETS["REGIME-WEAK"]
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert resolve_spec(path=path) == spec
    assert resolve_spec("regime-weak", n=10) == spec.with_(n=10)
    with pytest.raises(KeyError):
        resolve_spec("REGIME-MISSING")


def test_preset_calibration():
    strong = population_summary(generate(PRESETS["REGIME-STRONG"].with_(n=200_000)))
    weak = population_summary(generate(PRESETS["REGIME-WEAK"].with_(n=200_000)))
    assert strong["cor_p_zeta"] > 0.95
    assert weak["cor_p_zeta"] < 0.5
    assert weak["cor_mu_zeta"] < 0.5


def test_population_save(tmp_path, small_population):
    path = tmp_path / "pop.npz"
    small_population.save(path)
    with np.load(path) as data:
        assert np.array_equal(data["y"], small_population.y)
        assert json.loads(str(data["spec"]))["seed"] == small_population.spec.seed


@settings(max_examples=40)
@given(r=st.floats(-1, 1), seed=st.integers(0, 10_000))
def test_pseudo_model_exactness(r, seed):
    rng = np.random.default_rng(seed)
    base = rng.gamma(2.0, 1.0, 300)
    values = pseudo_predictions(base, r, rng.standard_normal(300))
    assert abs(pearson(values, base) - r) < 1e-10
    assert abs(values.mean() - base.mean()) < 1e-10 * max(1.0, abs(base.mean()))


def test_pseudo_model_special_cases(small_population):
    pop = small_population
    exact = make_pseudo_model(pop, "p_x", 1.0, seed=1)
    assert np.array_equal(exact.values, pop.p_x)
    half = make_pseudo_model(pop, "mu_x", 0.5, seed=1)
    assert abs(pearson(half.values, pop.mu_x) - 0.5) < 1e-10
    with pytest.raises(ZeroVariance):
        pseudo_predictions(np.ones(10), 0.5, np.arange(10.0))
    with pytest.raises(ValueError):
        pseudo_predictions(pop.p_x, 1.5, np.zeros(pop.n))


def test_independent_noise_streams_are_uncorrelated():
    pop = generate(SyntheticSpec(n=400_000, seed=2))
    a = make_pseudo_model(pop, "p_x", 0.5, seed=1).values
    b = make_pseudo_model(pop, "p_x", 0.5, seed=2).values
    centred = pop.p_x - pop.p_x.mean()
    basis = centred / np.linalg.norm(centred)

    def noise(v):
        v = v - v.mean()
        return v - np.dot(v, basis) * basis

    r = pearson(noise(a), noise(b))
    assert abs(r) < 3 / math.sqrt(pop.n)


@pytest.fixture(scope="module")
def contour_population():
    return generate(PRESETS["REGIME-WEAK"].with_(n=100_000))


def test_contour_is_deterministic_and_monotone(contour_population):
    grid = (0.7, 0.8, 0.9, 1.0)
    first = required_correlation_contour(contour_population, 0.3, grid, tol=0.005, seed=3)
    second = required_correlation_contour(contour_population, 0.3, grid, tol=0.005, seed=3)
    assert first == second
    feasible = [p for p in first if p.feasible]
    assert len(feasible) == 4
    for p in feasible:
        assert abs(p.achieved_cor - 0.3) < 0.005
        assert abs(p.predicted_cor - p.achieved_cor) < 0.05
    r_mu = [p.r_mu for p in feasible]
    assert all(b <= a + 0.02 for a, b in zip(r_mu, r_mu[1:]))


def test_contour_marks_infeasible_and_zero_target(contour_population):
    low = required_correlation_contour(contour_population, 0.3, (0.1,), tol=0.005)
    assert not low[0].feasible
    zero = required_correlation_contour(contour_population, 0.0, (0.1, 0.5, 0.9), tol=0.005)
    assert all(p.feasible and p.r_mu == 0.0 for p in zero)
    with pytest.raises(ValueError):
        required_correlation_contour(contour_population, 0.3, (0.5,), tol=1e-9)


def test_strong_regime_needs_little_amount_quality():
    pop = generate(PRESETS["REGIME-STRONG"].with_(n=200_000))
    (point,) = required_correlation_contour(pop, 0.3, (0.35,), tol=0.005)
    assert point.feasible and point.r_mu < 0.3


def test_verify_flags_small_samples():
    report = verify_identities(SyntheticSpec(), n=1000, seed=0)
    assert report.warnings
    assert len(report.checks) == len(DEFAULT_TOLERANCES)


def test_verify_dependent_spec_reports_psi_sign():
    report = verify_identities(SyntheticSpec(dependence=0.8), n=1_000_000, seed=0)
    checks = {c.name: c for c in report.checks}
    assert checks["snr_mixture_reconstruction"].passed
    assert checks["dependence_component"].passed
    assert checks["snr_mixture_inequality"].detail["psi_sign"] in (-1, 0, 1)
    assert report.passed


def test_verify_tampered_tolerance_fails():
    report = verify_identities(SyntheticSpec(), n=50_000, tolerances={"variance_decomposition": 0.0})
    assert not report.passed
    assert "variance_decomposition" in [c.name for c in report.failures()]
    with pytest.raises(KeyError):
        verify_identities(SyntheticSpec(), n=1000, tolerances={"nonsense": 1.0})


def test_to_dataset_hides_latents(small_population):
    ds = small_population.to_dataset()
    assert ds.n_rows == small_population.n
    assert np.array_equal(ds.target, small_population.y)
    assert isinstance(small_population, SyntheticPopulation)
