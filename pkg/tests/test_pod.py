import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airfoil_ddpm.pod import (
    PodError,
    compute_pod,
    fit_feature_map,
    pod_generate,
    pod_generate_many,
    predict_coefficients,
)


def random_rows(seed, n=200, dim=11):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, dim)) @ rng.normal(size=(dim, dim)) + rng.uniform(-1, 1, dim)


class TestBasis:
    def test_rank_one(self):
        rng = np.random.default_rng(0)
        direction = rng.normal(size=11)
        rows = 0.3 + rng.normal(size=(100, 1)) * direction
        b = compute_pod(rows)
        assert b.eigenvalues[0] > 0
        assert np.all(b.eigenvalues[1:] < 1e-10)

    def test_orthonormal_and_sorted(self):
        b = compute_pod(random_rows(1))
        np.testing.assert_allclose(b.modes @ b.modes.T, np.eye(11), atol=1e-12)
        assert np.all(np.diff(b.eigenvalues) <= 0)

    def test_eigenpairs_against_covariance(self):
        x = random_rows(2)
        b = compute_pod(x)
        cov = np.cov(x, rowvar=False, bias=True)
        for lam, m in zip(b.eigenvalues, b.modes):
            np.testing.assert_allclose(cov @ m, lam * m, atol=1e-9 * b.eigenvalues[0])
        assert b.eigenvalues.sum() == pytest.approx(np.trace(cov), rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_full_reconstruction(self, seed):
        x = random_rows(seed, n=40)
        b = compute_pod(x)
        assert np.max(np.abs(b.reconstruct(b.project(x)) - x)) <= 1e-8

    def test_sign_convention(self):
        b = compute_pod(random_rows(3))
        pivots = b.modes[np.arange(11), np.argmax(np.abs(b.modes), axis=1)]
        assert np.all(pivots > 0)
        b2 = compute_pod(random_rows(3))
        np.testing.assert_array_equal(b.modes, b2.modes)

    def test_too_few_rows(self):
        with pytest.raises(PodError):
            compute_pod(np.zeros((5, 11)))


class TestFeatureMap:
    def test_affine_ground_truth_recovered(self):
        rng = np.random.default_rng(4)
        x0 = random_rows(4)
        b = compute_pod(x0)
        f = rng.normal(size=(200, 3)) * [0.5, 0.01, 0.05] + [0.6, 0.02, 0.0]
        a = rng.normal(size=(3, 11))
        c = rng.normal(size=11)
        coeffs = f @ a + c
        rows = b.reconstruct(coeffs)
        fitted = fit_feature_map(b, f, rows)
        residual = np.max(np.abs(predict_coefficients(fitted, f) - coeffs))
        assert residual <= 1e-8
        f_new = rng.normal(size=(5, 3)) * [0.5, 0.01, 0.05] + [0.6, 0.02, 0.0]
        np.testing.assert_allclose(predict_coefficients(fitted, f_new), f_new @ a + c, atol=1e-8)

    def test_constant_features_give_mean(self):
        x = random_rows(5)
        b = compute_pod(x)
        fitted = fit_feature_map(b, np.tile([0.5, 0.01, 0.0], (len(x), 1)), x)
        np.testing.assert_allclose(predict_coefficients(fitted, [0.5, 0.01, 0.0])[0], b.project(x).mean(0), atol=1e-10)
        np.testing.assert_allclose(pod_generate(fitted, [0.5, 0.01, 0.0]).to_vector(), x.mean(0), atol=1e-10)

    def test_centroid_maps_to_mean(self):
        rng = np.random.default_rng(6)
        x = random_rows(6)
        f = rng.normal(size=(len(x), 3))
        fitted = fit_feature_map(compute_pod(x), f, x)
        np.testing.assert_allclose(pod_generate(fitted, f.mean(0)).to_vector(), x.mean(0), atol=1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        x = random_rows(7)
        f = rng.normal(size=(len(x), 3))
        b = compute_pod(x)
        m1 = fit_feature_map(b, f, x)
        m2 = fit_feature_map(b, f, x)
        np.testing.assert_array_equal(m1.feature_map, m2.feature_map)
        assert pod_generate(m1, f[0]) == pod_generate(m1, f[0])
        many = np.array([p.to_vector() for p in pod_generate_many(m1, f[:3])])
        one = np.array([pod_generate(m1, row).to_vector() for row in f[:3]])
        np.testing.assert_allclose(many, one, rtol=0, atol=1e-14)

    def test_unfitted_and_bad_input(self):
        b = compute_pod(random_rows(8))
        with pytest.raises(PodError):
            predict_coefficients(b, [0.5, 0.01, 0.0])
        with pytest.raises(PodError):
            fit_feature_map(b, np.ones((3, 3)), np.ones((4, 11)))
        with pytest.raises(PodError):
            fit_feature_map(b, np.full((4, 3), np.nan), np.ones((4, 11)))

    def test_json(self):
        x = random_rows(9)
        fitted = fit_feature_map(compute_pod(x), np.random.default_rng(9).normal(size=(len(x), 3)), x)
        d = json.loads(fitted.to_json())
        assert len(d["modes"]) == 11 and len(d["feature_map"]) == 4
