import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lattice_ar.errors import AsymmetryViolation, InvalidParameter, NotPositiveDefinite, SingularSystem
from lattice_ar.lattice import build_binary_weights, grid_graph, rho_bounds, row_standardize
from lattice_ar.model import (CarModel, Centroids, SarModel, car_covariance, certify, marginal_summary,
                              sar_covariance, spherical_correlation, spherical_covariance, validate_car,
                              validate_sar)

from conftest import random_pd


def test_car_identity():
    np.testing.assert_array_equal(car_covariance(CarModel(np.zeros((3, 3)), np.eye(3))).sigma, np.eye(3))


def test_car_two_by_two():
    s = car_covariance(CarModel([[0, 0.5], [0.5, 0]], np.eye(2))).sigma
    np.testing.assert_allclose(s, np.array([[1, 0.5], [0.5, 1]]) / 0.75, rtol=1e-14)


def test_car_grid_two_forms(grid_sigma):
    w = build_binary_weights(grid_graph(5, 5)).values
    alt = np.linalg.inv(np.diag(w.sum(axis=1)) - 0.9 * w)
    assert np.linalg.norm(grid_sigma.sigma - alt) / np.linalg.norm(alt) < 1e-10


def test_sar_identity_and_hand_example():
    np.testing.assert_array_equal(sar_covariance(SarModel(np.zeros((2, 2)), np.eye(2))).sigma, np.eye(2))
    s = sar_covariance(SarModel([[0, 0.5], [0, 0]], np.eye(2))).sigma
    np.testing.assert_allclose(s, [[1.25, 0.5], [0.5, 1.0]], atol=1e-15)


def test_validate_trivial():
    assert validate_car(np.zeros((3, 3)), np.eye(3)).passed
    assert validate_sar(np.zeros((3, 3)), np.eye(3)).passed


def test_validate_car_rho_too_large():
    wp, mp = row_standardize(build_binary_weights(grid_graph(3, 3)))
    rep = validate_car(1.5 * wp.values, mp)
    assert rep.failed() == ["C1"]
    assert rep["C1"].witness["min_eigenvalue"] < 0


def test_validate_car_asymmetry_and_diagonal():
    rep = validate_car([[0.1, 0.5], [0.2, 0]], [1, 2])
    assert set(rep.failed()) == {"C3", "C4"}
    assert rep["C3"].witness["indices"] == [1]
    d = rep.to_dict()
    assert {"condition", "pass", "witness"} <= set(d[0])


def test_validate_car_m_not_positive():
    rep = validate_car(np.zeros((2, 2)), [1.0, 0.0])
    assert rep.failed() == ["C2"]
    assert rep["C2"].witness["nonpositive_diagonal"] == [2]


def test_validate_sar_diagonal():
    b = np.zeros((3, 3))
    b[0, 0] = 0.2
    assert validate_sar(b, np.eye(3)).failed() == ["S3"]


def test_validate_sar_singular():
    w = build_binary_weights(grid_graph(3, 3)).values
    lam = rho_bounds(w).eigenvalues.max()
    rep = validate_sar(w / lam, np.eye(9))
    assert rep.failed() == ["S1"]


def test_car_covariance_errors():
    with pytest.raises(AsymmetryViolation):
        car_covariance(CarModel([[0, 0.5], [0.1, 0]], np.eye(2)))
    with pytest.raises(NotPositiveDefinite):
        car_covariance(CarModel([[0, 2.0], [2.0, 0]], np.eye(2)))
    with pytest.raises(InvalidParameter):
        car_covariance(CarModel([[0.5, 0], [0, 0]], np.eye(2)))


def test_sar_covariance_singular():
    with pytest.raises(SingularSystem):
        sar_covariance(SarModel([[0, 1.0], [1.0, 0]], np.eye(2)))


def test_certify():
    with pytest.raises(AsymmetryViolation):
        certify([[1, 0.5], [0.4, 1]])
    with pytest.raises(NotPositiveDefinite):
        certify([[1, 2], [2, 1]])
    c = certify(np.eye(2))
    assert c.certified and c.min_eigenvalue == 1.0


def test_spherical_values():
    d = np.array([0.0, 0.5, 1.0, 2.0])
    np.testing.assert_allclose(spherical_correlation(d, 1.0), [1.0, 0.3125, 0.0, 0.0], atol=1e-15)


def test_spherical_covariance_far_apart_is_identity():
    cent = Centroids(np.array([[0.0, 0], [10, 0], [0, 10]]))
    np.testing.assert_array_equal(spherical_covariance(cent, 1.0, 5.0).sigma, np.eye(3))
    with pytest.raises(InvalidParameter):
        spherical_covariance(cent, 1.0, 0.0)


def test_spherical_marginal_variance_constant(rng):
    cent = Centroids(rng.uniform(0, 10, size=(20, 2)))
    var, _ = marginal_summary(spherical_covariance(cent, 2.0, 4.0, 0.5))
    np.testing.assert_allclose(var, 2.5)


def test_marginal_summary():
    var, corr = marginal_summary([[4.0, 2.0], [2.0, 4.0]])
    np.testing.assert_array_equal(var, [4, 4])
    np.testing.assert_allclose(corr, [[1, 0.5], [0.5, 1]])


def test_row_standardized_car_variances_nonstationary(grid_sigma):
    var, _ = marginal_summary(grid_sigma)
    assert var.max() - var.min() > 1e-3


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 10), seed=st.integers(0, 2**32 - 1))
def test_pd_iff_positive_eigenvalues(n, seed):
    r = np.random.default_rng(seed)
    m = np.diag(r.uniform(0.2, 3.0, n))
    sigma = random_pd(r, n)
    ev = np.linalg.eigvals(sigma @ np.linalg.inv(m))
    scale = np.abs(ev).max()
    assert np.abs(ev.imag).max() <= 1e-10 * scale
    assert ev.real.min() > 1e-10 * scale
    k = random_pd(r, n)
    mh = np.sqrt(np.diag(m))
    a = (mh[:, None] * k) / mh[None, :]
    s = a @ m
    assert np.abs(s - s.T).max() <= 1e-10 * np.abs(s).max()
    assert np.linalg.eigvalsh(0.5 * (s + s.T)).min() > 0
