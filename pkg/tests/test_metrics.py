"""Evaluation metrics: errors, R^2, LOO-CV, leverage, rate study."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wassreg.data import Dataset
from wassreg.errors import ConvergenceError, DegenerateValueError, InputError
from wassreg.frechet import frechet_fit_1d, frechet_predict_1d
from wassreg.gaussian import CoeffGaussian, GaussianConfig, fit_gaussian
from wassreg.metrics import (
    evaluate,
    in_sample_error,
    incoherence,
    loo_cv,
    pairwise_w2,
    predict_marginal,
    rate_study,
    thread_count,
    wasserstein_r2,
)
from wassreg.particle import ParticleCloud
from wassreg.rng import stream
from wassreg.simulate import (
    deform_spec,
    generate_dataset,
    sample_design,
    univariate_template,
)
from wassreg.transport import (
    LEVEL_GRID,
    Empirical,
    GaussianMeasure,
    QuantileGrid,
    quantiles_of,
)


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("WASSREG_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("WASSREG_THREADS", "4")
    assert thread_count() == 4
    monkeypatch.setenv("WASSREG_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("WASSREG_THREADS", "four")
    with pytest.raises(InputError):
        thread_count()


def test_predict_marginal_dispatch():
    assert isinstance(predict_marginal(ParticleCloud([0.0, 1.0]), [1.0]), Empirical)
    law = CoeffGaussian(mean=[0.0], cov=[[1.0]], p=1, d=1)
    assert isinstance(predict_marginal(law, [1.0]), GaussianMeasure)
    model = frechet_fit_1d(np.ones((1, 1)), [Empirical([0.0, 1.0])])
    assert isinstance(predict_marginal(model, [1.0]), QuantileGrid)
    with pytest.raises(InputError):
        predict_marginal(np.zeros(3), [1.0])


def test_pairwise_w2_is_unsquared():
    out = pairwise_w2([Empirical([0.0])], [Empirical([3.0])])
    assert np.allclose(out, [3.0])
    with pytest.raises(InputError):
        pairwise_w2([Empirical([0.0])], [])


def test_in_sample_error_examples():
    a = GaussianMeasure([0.0], [[1.0]])
    b = GaussianMeasure([0.0], [[4.0]])
    assert in_sample_error([a], [a]) == 0.0
    assert in_sample_error([a], [b]) == pytest.approx(1.0)
    with pytest.raises(InputError):
        in_sample_error([a, b], [a])
    with pytest.raises(InputError):
        in_sample_error([], [])


def test_r2_perfect_fit_is_one():
    responses = [Empirical([0.0, 1.0]), Empirical([2.0, 4.0])]
    assert wasserstein_r2(responses, responses) == 1.0


def test_r2_barycenter_fit_is_zero():
    responses = [Empirical(np.sort(np.random.default_rng(i).normal(size=8))) for i in range(3)]
    curves = np.stack([quantiles_of(r, LEVEL_GRID) for r in responses])
    bary = QuantileGrid(LEVEL_GRID, curves.mean(axis=0))
    assert wasserstein_r2([bary] * 3, responses) == pytest.approx(0.0, abs=1e-12)


def test_r2_degenerate_responses():
    same = Empirical([0.0, 1.0])
    with pytest.raises(DegenerateValueError):
        wasserstein_r2([same, same], [same, same])
    with pytest.raises(InputError):
        wasserstein_r2([same], [same])


def test_r2_shift_invariance():
    rng = np.random.default_rng(6)
    ts = np.array([-1.0, 0.0, 1.0, 2.0])
    X = np.column_stack([np.ones_like(ts), ts])
    responses = [Empirical(np.sort(rng.normal(loc=t, size=10))) for t in ts]
    shifted = [Empirical(r.atoms + 5.0) for r in responses]
    preds = [frechet_predict_1d(frechet_fit_1d(X, responses), x) for x in X]
    preds_s = [frechet_predict_1d(frechet_fit_1d(X, shifted), x) for x in X]
    assert wasserstein_r2(preds, responses) == pytest.approx(
        wasserstein_r2(preds_s, shifted), abs=1e-6)


def test_loo_recovers_noiseless_linear_model():
    tpl = univariate_template()
    X = sample_design(tpl, 8, stream(0, "loo-design"))
    responses = [tpl.law.marginal(x) for x in X]

    def fit_fn(design, resp):
        return fit_gaussian(design, resp, GaussianConfig(steps=800))[0]

    out = loo_cv(fit_fn, X, responses)
    assert out.failures == 0
    assert len(out.errors) == 8
    assert max(out.errors) <= 1e-8


def test_loo_identical_responses():
    responses = [GaussianMeasure([0.0], [[1.0]])] * 3
    out = loo_cv(lambda d, r: fit_gaussian(d, r)[0], np.ones((3, 1)), responses)
    assert out.mean <= 1e-8
    assert out.std <= 1e-8


def test_loo_counts_failed_folds():
    tpl = univariate_template()
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 9.0]])
    responses = [tpl.law.marginal(x) for x in X]

    def moody_fit(design, resp):
        if np.any(design[:, 1] == 9.0):
            raise ConvergenceError("refusing the outlier row")
        return fit_gaussian(design, resp, GaussianConfig(steps=200))[0]

    out = loo_cv(moody_fit, X, responses)
    assert out.failures == 2
    assert len(out.errors) == 1

    def always_fail(design, resp):
        raise ConvergenceError("nope")

    with pytest.raises(DegenerateValueError):
        loo_cv(always_fail, X, responses)


def test_loo_needs_three_rows():
    with pytest.raises(InputError):
        loo_cv(lambda d, r: None, np.ones((2, 1)),
               [GaussianMeasure([0.0], [[1.0]])] * 2)


def test_loo_threaded_matches_serial(monkeypatch):
    responses = [GaussianMeasure([float(i)], [[1.0]]) for i in range(4)]
    X = np.column_stack([np.ones(4), np.arange(4.0)])
    fit_fn = lambda d, r: fit_gaussian(d, r, GaussianConfig(steps=100))[0]
    monkeypatch.setenv("WASSREG_THREADS", "1")
    serial = loo_cv(fit_fn, X, responses)
    monkeypatch.setenv("WASSREG_THREADS", "3")
    threaded = loo_cv(fit_fn, X, responses)
    assert np.allclose(serial.errors, threaded.errors)


def test_incoherence_examples():
    out = incoherence(np.eye(3))
    assert out.mu == pytest.approx(1.0)
    assert np.allclose(out.leverages, 1.0)
    out = incoherence(np.ones((2, 1)))
    assert out.mu == pytest.approx(1.0)
    out = incoherence(np.array([[1.0], [1.0], [1.0], [5.0]]))
    assert out.mu == pytest.approx(4.0 * 25.0 / 28.0)


@given(st.integers(min_value=0, max_value=2**32 - 1),
       st.integers(min_value=1, max_value=8), st.integers(min_value=1, max_value=4))
@settings(max_examples=40, deadline=None)
def test_incoherence_leverage_laws(seed, n, p):
    X = np.random.default_rng(seed).normal(size=(n, p))
    out = incoherence(X)
    assert np.all(out.leverages >= -1e-9)
    assert np.all(out.leverages <= 1.0 + 1e-9)
    assert np.sum(out.leverages) == pytest.approx(np.linalg.matrix_rank(X), abs=1e-8)


def test_rate_study_zero_noise_degenerates():
    out = rate_study(univariate_template(), deform_spec("radial", a=0.0), [3, 5], 1)
    assert out.degenerate
    assert out.slope is None
    assert all(v <= 1e-12 for v in out.medians.values())


def test_rate_study_smoke():
    out = rate_study(univariate_template(), deform_spec("additive"), [5, 10], 2)
    assert out.failures == 0
    assert set(out.medians) == {5, 10}
    assert len(out.rows) == 4
    assert out.slope is not None and np.isfinite(out.slope)


def test_rate_study_validation():
    tpl = univariate_template()
    spec = deform_spec("additive")
    with pytest.raises(InputError):
        rate_study(tpl, spec, [5], 1)
    with pytest.raises(InputError):
        rate_study(tpl, spec, [5, 5], 1)
    with pytest.raises(InputError):
        rate_study(tpl, spec, [1, 5], 1)
    with pytest.raises(InputError):
        rate_study(tpl, spec, [5, 10], 0)


def test_evaluate_aggregates():
    ds = generate_dataset(univariate_template(), deform_spec("additive"), n=4, m=10, seed=1)
    model = frechet_fit_1d(ds.design, ds.responses, k_levels=40)
    report = evaluate(model, ds)
    assert report.response_w2.shape == (4,)
    assert report.mean_response_w2 == pytest.approx(float(report.response_w2.mean()))
    assert report.r2 is not None
    assert report.truth_w2 is not None
    assert report.in_sample_error_truth == pytest.approx(float(np.mean(report.truth_w2**2)))


def test_evaluate_degenerate_r2_is_reported():
    same = Empirical([0.0, 1.0])
    ds = Dataset(design=np.ones((2, 1)), responses=[same, same])
    model = frechet_fit_1d(ds.design, ds.responses, k_levels=20)
    report = evaluate(model, ds)
    assert report.r2 is None
    assert "r2_unavailable" in report.meta
    assert report.truth_w2 is None
