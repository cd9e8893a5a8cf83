"""Linear quantile / moment regression baselines and the isotonic repair."""

import itertools

import numpy as np
import pytest
from scipy.special import ndtri

from wassreg.errors import InputError
from wassreg.frechet import (
    FrechetModel1D,
    FrechetModelGauss,
    frechet_coeff_law,
    frechet_fit_1d,
    frechet_fit_gauss,
    frechet_predict_1d,
    frechet_predict_gauss,
    pava,
)
from wassreg.simulate import bivariate_template
from wassreg.transport import (
    Empirical,
    GaussianMeasure,
    QuantileGrid,
    barycenter_1d,
    gaussian_w2_squared,
    quantile_grid_of,
    quantiles_of,
)


# ---------------------------------------------------------------------------
# isotonic projection


def test_pava_examples():
    assert np.allclose(pava([3.0, 1.0, 2.0]), [2.0, 2.0, 2.0])
    assert np.array_equal(pava([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_pava_weighted_pool():
    assert np.allclose(pava([3.0, 1.0], weights=[1.0, 3.0]), [1.5, 1.5])


def test_pava_idempotent():
    rng = np.random.default_rng(0)
    y = rng.normal(size=40)
    once = pava(y)
    assert np.array_equal(pava(once), once)
    assert np.all(np.diff(once) >= 0)


def test_pava_validation():
    with pytest.raises(InputError):
        pava([])
    with pytest.raises(InputError):
        pava([np.nan, 0.0])
    with pytest.raises(InputError):
        pava([1.0, 2.0], weights=[1.0, 0.0])
    with pytest.raises(InputError):
        pava([1.0, 2.0], weights=[1.0])


def _projection_by_enumeration(y, w):
    # the projection is piecewise constant on contiguous blocks with
    # non-decreasing block means, so searching every block composition
    # and keeping the cheapest feasible one is an exact (if exponential)
    # oracle
    n = len(y)
    best_cost, best_vec = np.inf, None
    for cuts in itertools.product([0, 1], repeat=n - 1):
        edges = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        means = []
        for a, b in zip(edges[:-1], edges[1:]):
            means.append(np.sum(y[a:b] * w[a:b]) / np.sum(w[a:b]))
        if np.any(np.diff(means) < 0):
            continue
        vec = np.concatenate(
            [np.full(b - a, m) for (a, b), m in zip(zip(edges[:-1], edges[1:]), means)]
        )
        cost = float(np.sum(w * (y - vec) ** 2))
        if cost < best_cost:
            best_cost, best_vec = cost, vec
    return best_vec


def test_pava_matches_exhaustive_projection():
    rng = np.random.default_rng(42)
    for trial in range(60):
        n = int(rng.integers(1, 9))
        y = rng.normal(size=n)
        if trial % 2 == 0:
            w = np.ones(n)
            out = pava(y)
        else:
            w = rng.uniform(0.2, 3.0, size=n)
            out = pava(y, weights=w)
        assert np.allclose(out, _projection_by_enumeration(y, w), atol=1e-10)


# ---------------------------------------------------------------------------
# scalar baseline


def test_fit_1d_constant_design_is_barycenter():
    rng = np.random.default_rng(3)
    responses = [Empirical(np.sort(rng.normal(loc=i, size=15))) for i in range(4)]
    model = frechet_fit_1d(np.ones((4, 1)), responses, k_levels=50)
    pred = frechet_predict_1d(model, [1.0])
    grids = [quantile_grid_of(r, model.levels) for r in responses]
    bary = barycenter_1d(grids, np.full(4, 0.25))
    assert np.allclose(pred.values, bary.values, atol=1e-12)


def test_fit_1d_single_row_reproduces_response():
    resp = Empirical(np.sort(np.random.default_rng(1).normal(size=20)))
    model = frechet_fit_1d(np.array([[1.0, 0.7]]), [resp], k_levels=40)
    pred = frechet_predict_1d(model, [1.0, 0.7])
    assert np.allclose(pred.values, quantiles_of(resp, model.levels), atol=1e-10)


def test_fit_1d_square_design_interpolates():
    rng = np.random.default_rng(2)
    X = np.array([[1.0, -1.0], [1.0, 2.0]])
    responses = [Empirical(np.sort(rng.normal(size=10))) for _ in range(2)]
    model = frechet_fit_1d(X, responses, k_levels=30)
    for x, r in zip(X, responses):
        pred = frechet_predict_1d(model, x)
        assert np.allclose(pred.values, quantiles_of(r, model.levels), atol=1e-9)


def test_fit_1d_validation():
    with pytest.raises(InputError):
        frechet_fit_1d(np.ones((2, 1)), [Empirical([0.0])])
    with pytest.raises(InputError):
        frechet_fit_1d(np.ones((1, 1)), [Empirical([0.0])], k_levels=1)
    model = frechet_fit_1d(np.ones((1, 1)), [Empirical([0.0, 1.0])])
    with pytest.raises(InputError):
        frechet_predict_1d(model, [1.0, 2.0])


def test_coeff_law_point_targets_collapse():
    # rows with point-mass responses linear in t make every level carry
    # the same coefficient pair
    ts = np.array([-1.0, 0.0, 1.0, 2.0])
    X = np.column_stack([np.ones_like(ts), ts])
    responses = [Empirical([0.4 + 1.3 * t]) for t in ts]
    model = frechet_fit_1d(X, responses, k_levels=25)
    cloud = frechet_coeff_law(model)
    assert np.allclose(cloud.atoms, np.tile([0.4, 1.3], (25, 1)), atol=1e-10)


def test_coeff_law_recovers_monotone_coordinates():
    levels = np.linspace(0.001, 0.999, 60)
    a, b = ndtri(levels), np.exp(levels)
    ts = np.array([0.0, 0.5, 1.0])
    X = np.column_stack([np.ones_like(ts), ts])
    responses = [QuantileGrid(levels, a + t * b) for t in ts]
    model = frechet_fit_1d(X, responses, k_levels=60)
    assert np.allclose(model.beta[:, 0], a, atol=1e-8)
    assert np.allclose(model.beta[:, 1], b, atol=1e-8)
    cloud = frechet_coeff_law(model)
    assert np.all(np.diff(cloud.atoms[:, 0]) >= 0)
    assert cloud.d == 2


def test_model_1d_validation():
    with pytest.raises(InputError):
        FrechetModel1D(levels=[0.2, 0.1], beta=np.zeros((2, 1)))
    with pytest.raises(InputError):
        FrechetModel1D(levels=[0.1, 0.2], beta=np.zeros((3, 1)))


# ---------------------------------------------------------------------------
# Gaussian baseline


def test_fit_gauss_constant_responses():
    target = GaussianMeasure([1.0, -2.0], np.array([[2.0, 0.5], [0.5, 1.0]]))
    model = frechet_fit_gauss(np.ones((3, 1)), [target] * 3)
    pred = frechet_predict_gauss(model, [1.0])
    assert np.allclose(pred.mean, target.mean)
    assert np.allclose(pred.cov, target.cov)


def test_fit_gauss_linear_curve_is_exact():
    ts = np.array([0.0, 1.0, 2.0])
    X = np.column_stack([np.ones_like(ts), ts])
    responses = [
        GaussianMeasure([0.3 * t, 1.0 - t], np.eye(2) + 0.1 * t * np.eye(2)) for t in ts
    ]
    model = frechet_fit_gauss(X, responses)
    for x, r in zip(X, responses):
        pred = frechet_predict_gauss(model, x)
        assert np.allclose(pred.mean, r.mean, atol=1e-10)
        assert np.allclose(pred.cov, r.cov, atol=1e-10)


def test_fit_gauss_misses_quadratic_covariance():
    tpl = bivariate_template()
    ts = np.linspace(-2, 2, 9)
    X = np.column_stack([np.ones_like(ts), ts])
    model = frechet_fit_gauss(X, [tpl.law.marginal(x) for x in X])
    for t in (-2.0, 2.0):
        x = np.array([1.0, t])
        err = gaussian_w2_squared(frechet_predict_gauss(model, x), tpl.law.marginal(x))
        assert np.sqrt(err) >= 0.3


def test_predict_gauss_clamps_to_psd():
    X = np.array([[1.0, 0.0], [1.0, 1.0]])
    responses = [
        GaussianMeasure([0.0, 0.0], np.eye(2)),
        GaussianMeasure([0.0, 0.0], np.diag([0.1, 2.0])),
    ]
    model = frechet_fit_gauss(X, responses)
    pred = frechet_predict_gauss(model, [1.0, 2.0])
    # the raw linear extrapolation is diag(-0.8, 3); the repair zeroes
    # the negative eigenvalue
    assert np.allclose(pred.cov, np.diag([0.0, 3.0]), atol=1e-12)
    assert np.linalg.eigvalsh(pred.cov)[0] >= -1e-12


def test_fit_gauss_validation():
    with pytest.raises(InputError):
        frechet_fit_gauss(np.ones((2, 1)), [GaussianMeasure([0.0], [[1.0]])])
    with pytest.raises(InputError):
        frechet_fit_gauss(np.ones((1, 1)), [Empirical([0.0])])
    with pytest.raises(InputError):
        frechet_fit_gauss(
            np.ones((2, 1)),
            [GaussianMeasure([0.0], [[1.0]]), GaussianMeasure([0.0, 0.0], np.eye(2))],
        )
    with pytest.raises(InputError):
        FrechetModelGauss(mean_coef=np.zeros((2, 2)), cov_coef=np.zeros((2, 2)), d=2)
