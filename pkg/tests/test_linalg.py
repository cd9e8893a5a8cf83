"""Dense kernels: SPD square roots, pseudo-inverse, Kronecker identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wassreg.errors import InputError
from wassreg.linalg import as_design, as_spd, kron, pinv, spd_sqrt, unvec_t, vec_t


def random_spd(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + 0.1 * np.eye(dim)


def test_spd_sqrt_diagonal():
    assert np.allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_spd_sqrt_identity():
    assert np.allclose(spd_sqrt(np.eye(3)), np.eye(3))


def test_spd_sqrt_squares_back():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    root = spd_sqrt(a)
    assert np.linalg.norm(root @ root - a) <= 1e-8 * np.linalg.norm(a)


@given(st.integers(min_value=1, max_value=20), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_spd_sqrt_random(dim, seed):
    a = random_spd(np.random.default_rng(seed), dim)
    root = spd_sqrt(a)
    assert np.allclose(root, root.T)
    assert np.linalg.norm(root @ root - a) <= 1e-8 * np.linalg.norm(a)


def test_spd_sqrt_rejects_nonfinite():
    with pytest.raises(InputError):
        spd_sqrt(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_as_spd_clamps_tiny_negative():
    a = np.diag([1.0, -1e-12])
    out = as_spd(a)
    assert np.linalg.eigvalsh(out).min() >= 0.0


def test_as_spd_rejects_asymmetric():
    with pytest.raises(InputError):
        as_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_as_spd_rejects_negative_definite():
    with pytest.raises(InputError):
        as_spd(np.diag([1.0, -0.5]))


def test_pinv_identity():
    assert np.allclose(pinv(np.eye(4)), np.eye(4))


def test_pinv_zero_matrix_transposed_shape():
    out = pinv(np.zeros((3, 2)))
    assert out.shape == (2, 3)
    assert np.all(out == 0.0)


def test_pinv_column_vector():
    assert np.allclose(pinv(np.array([[1.0], [1.0]])), [[0.5, 0.5]])


@given(st.integers(min_value=1, max_value=6), st.integers(min_value=1, max_value=6),
       st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_pinv_penrose_identities(rows, cols, seed):
    a = np.random.default_rng(seed).normal(size=(rows, cols))
    ap = pinv(a)
    assert np.allclose(a @ ap @ a, a, atol=1e-8)
    assert np.allclose(ap @ a @ ap, ap, atol=1e-8)
    assert np.allclose((a @ ap).T, a @ ap, atol=1e-8)
    assert np.allclose((ap @ a).T, ap @ a, atol=1e-8)
    assert np.allclose(pinv(ap), a, atol=1e-8)


def test_pinv_rank_deficient():
    a = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    ap = pinv(a)
    assert np.allclose(a @ ap @ a, a, atol=1e-10)


def test_kron_identities():
    assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(kron(np.array([[2.0]]), b), 2 * b)


def test_kron_projects_norm():
    x = np.array([1.0, 1.0])
    left = kron(x[None, :], np.eye(2))
    assert np.allclose(left @ np.eye(4) @ left.T, 2 * np.eye(2))


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_kron_mixed_product(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(3, 2))
    c = rng.normal(size=(3, 2))
    d = rng.normal(size=(2, 3))
    assert np.allclose(kron(a, c) @ kron(b, d), kron(a @ b, c @ d))


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_vec_identity(seed):
    # column-stacking convention: vec(A B C) = (C^T kron A) vec(B)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(3, 4))
    c = rng.normal(size=(4, 2))
    vec = lambda m: m.reshape(-1, order="F")
    assert np.allclose(kron(c.T, a) @ vec(b), vec(a @ b @ c))


@given(st.integers(min_value=1, max_value=5), st.integers(min_value=1, max_value=5),
       st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_vec_t_round_trip(p, d, seed):
    b = np.random.default_rng(seed).normal(size=(p, d))
    v = vec_t(b)
    assert v.shape == (p * d,)
    assert np.allclose(unvec_t(v, p, d), b)


def test_as_design_promotes_vector():
    out = as_design([1.0, 2.0])
    assert out.shape == (2, 1)


def test_as_design_rejects_empty_and_nonfinite():
    with pytest.raises(InputError):
        as_design(np.zeros((0, 2)))
    with pytest.raises(InputError):
        as_design(np.array([[1.0], [np.inf]]))
