from __future__ import annotations

import math

import numpy as np
import pytest

import emdtrade.gmm as gmm_module
from emdtrade.gmm import (
    ClusterAssignment,
    DegenerateFitError,
    GmmConfig,
    GmmModel,
    assign_clusters,
    bic,
    fit_gmm,
    format_cluster_report,
    format_model_summary,
    n_mixture_params,
    select_g_bic,
)

LIGHT = GmmConfig(restarts=4, max_iters=200, tol=1e-6)


def two_blobs(seed, n_per=200, distance=10.0, d=2):
    rng = np.random.default_rng(seed)
    a = rng.normal(-distance / 2, 1.0, (n_per, d))
    b = rng.normal(distance / 2, 1.0, (n_per, d))
    return np.vstack([a, b])


class TestParameterCount:
    @pytest.mark.parametrize("d", [1, 2, 8])
    @pytest.mark.parametrize("g", [1, 2, 3, 4])
    def test_closed_form(self, g, d):
        assert n_mixture_params(g, d) == (g - 1) + g * d + g * d * (d + 1) // 2


class TestFitGmm:
    def test_single_component_closed_form(self):
        rng = np.random.default_rng(0)
        X = rng.normal(3.0, 2.0, (200, 2))
        cfg = GmmConfig(restarts=2, ridge=1e-6)
        model = fit_gmm(X, 1, cfg)
        np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-10)
        centered = X - X.mean(axis=0)
        scatter = centered.T @ centered / len(X)
        expected_cov = scatter + (cfg.ridge * np.trace(scatter) / 2) * np.eye(2)
        np.testing.assert_allclose(model.covariances[0], expected_cov, atol=1e-10)
        # independent closed-form Gaussian log-likelihood
        sign, logdet = np.linalg.slogdet(expected_cov)
        assert sign > 0
        inv = np.linalg.inv(expected_cov)
        maha = np.einsum("ij,jk,ik->i", centered, inv, centered)
        ll = float(np.sum(-0.5 * (2 * math.log(2 * math.pi) + logdet + maha)))
        assert model.log_likelihood == pytest.approx(ll, abs=1e-8)

    def test_well_separated_blobs(self):
        X = two_blobs(seed=1, distance=20.0)
        model = fit_gmm(X, 2, GmmConfig(restarts=4, seed=1))
        fitted = sorted(float(m[0]) for m in model.means)
        assert fitted[0] == pytest.approx(-10.0, abs=0.5)
        assert fitted[1] == pytest.approx(10.0, abs=0.5)
        assert model.weights[0] == pytest.approx(0.5, abs=0.1)
        assert model.weights[1] == pytest.approx(0.5, abs=0.1)

    def test_too_few_rows_rejected(self):
        with pytest.raises(ValueError, match="cannot fit"):
            fit_gmm(np.array([[1.0, 2.0]]), 2, LIGHT)

    def test_non_finite_rejected(self):
        X = np.ones((10, 2))
        X[3, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            fit_gmm(X, 1, LIGHT)

    def test_bitwise_determinism(self):
        X = two_blobs(seed=2)
        a = fit_gmm(X, 2, GmmConfig(seed=5, restarts=3))
        b = fit_gmm(X, 2, GmmConfig(seed=5, restarts=3))
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.covariances, b.covariances)
        assert a.log_likelihood == b.log_likelihood

    def test_loglik_monotone_within_tolerance(self):
        for seed in range(5):
            model = fit_gmm(two_blobs(seed=seed), 2, GmmConfig(seed=seed, restarts=4))
            for history in model.restart_ll_histories:
                deltas = np.diff(history)
                assert np.all(deltas >= -1e-9)


class TestSelectG:
    def test_bic_formula(self):
        model = GmmModel(
            weights=np.array([1.0]),
            means=np.zeros((1, 1)),
            covariances=np.ones((1, 1, 1)),
            log_likelihood=-100.0,
            n_params=5,
            converged=True,
            iterations=1,
        )
        assert bic(model, 100) == pytest.approx(223.0259, abs=1e-3)

    def test_single_gaussian_selects_one(self):
        rng = np.random.default_rng(10)
        X = rng.normal(0, 1, (600, 2))
        best, table = select_g_bic(X, GmmConfig(restarts=3, seed=0))
        assert best.n_components == 1
        assert set(table) == {1, 2, 3, 4}

    def test_two_blobs_selects_two(self):
        X = two_blobs(seed=11, n_per=300, distance=6.0)
        best, _ = select_g_bic(X, GmmConfig(restarts=3, seed=0))
        assert best.n_components == 2

    def test_tie_goes_to_smaller_g(self, monkeypatch):
        canned = {
            g: GmmModel(
                weights=np.full(g, 1.0 / g),
                means=np.zeros((g, 1)),
                covariances=np.ones((g, 1, 1)),
                log_likelihood=-50.0 - g * math.log(40) / 2,  # equal BIC after the penalty
                n_params=g,
                converged=True,
                iterations=1,
            )
            for g in (1, 2)
        }
        monkeypatch.setattr(gmm_module, "fit_gmm", lambda X, g, cfg: canned[g])
        best, table = select_g_bic(np.zeros((40, 1)), GmmConfig(g_range=(1, 2)))
        assert table[1] == pytest.approx(table[2], abs=1e-9)
        assert best.n_components == 1

    def test_failed_g_is_skipped(self, monkeypatch):
        real_fit = gmm_module.fit_gmm

        def flaky(X, g, cfg):
            if g >= 2:
                raise DegenerateFitError("boom")
            return real_fit(X, g, cfg)

        monkeypatch.setattr(gmm_module, "fit_gmm", flaky)
        rng = np.random.default_rng(0)
        best, table = select_g_bic(rng.normal(0, 1, (100, 2)), GmmConfig(restarts=2))
        assert best.n_components == 1
        assert set(table) == {1}

    def test_all_failures_raise(self, monkeypatch):
        def dead(X, g, cfg):
            raise DegenerateFitError("no fit")

        monkeypatch.setattr(gmm_module, "fit_gmm", dead)
        with pytest.raises(DegenerateFitError, match="no component count"):
            select_g_bic(np.zeros((50, 2)), GmmConfig())

    def test_range_exceeding_rows_rejected(self):
        with pytest.raises(ValueError, match="exceeds row count"):
            select_g_bic(np.zeros((3, 2)), GmmConfig(g_range=(1, 4)))


class TestAssignClusters:
    def fit_separated(self):
        X = two_blobs(seed=3, distance=20.0)
        return fit_gmm(X, 2, GmmConfig(seed=3, restarts=3)), X

    def test_point_at_mean_gets_confident_label(self):
        model, _ = self.fit_separated()
        x = model.means[0][None, :]
        assignment = assign_clusters(model, x, min_cluster_size=1)
        assert assignment.hard_labels[0] == 0
        assert assignment.responsibilities[0, 0] > 0.99

    def test_symmetry_plane_splits_evenly(self):
        model = GmmModel(
            weights=np.array([0.5, 0.5]),
            means=np.array([[-1.0, 0.0], [1.0, 0.0]]),
            covariances=np.stack([np.eye(2), np.eye(2)]),
            log_likelihood=0.0,
            n_params=n_mixture_params(2, 2),
            converged=True,
            iterations=1,
        )
        assignment = assign_clusters(model, np.array([[0.0, 3.0]]), min_cluster_size=1)
        np.testing.assert_allclose(assignment.responsibilities[0], [0.5, 0.5], atol=1e-9)
        assert assignment.hard_labels[0] == 0  # tie resolves to the lowest index

    def test_rows_sum_to_one(self):
        model, X = self.fit_separated()
        assignment = assign_clusters(model, X, min_cluster_size=1)
        np.testing.assert_allclose(assignment.responsibilities.sum(axis=1), 1.0, atol=1e-9)
        assert assignment.cluster_sizes.sum() == len(X)

    def test_small_cluster_flagged(self):
        model, X = self.fit_separated()
        assignment = assign_clusters(model, X, min_cluster_size=10_000)
        assert assignment.skipped == (0, 1)

    def test_dimension_mismatch_rejected(self):
        model, _ = self.fit_separated()
        with pytest.raises(ValueError, match="dimension mismatch"):
            assign_clusters(model, np.zeros((4, 5)))

    def test_component_relabeling_permutes_partition(self):
        model, X = self.fit_separated()
        base = assign_clusters(model, X, min_cluster_size=1)
        swapped = GmmModel(
            weights=model.weights[::-1].copy(),
            means=model.means[::-1].copy(),
            covariances=model.covariances[::-1].copy(),
            log_likelihood=model.log_likelihood,
            n_params=model.n_params,
            converged=model.converged,
            iterations=model.iterations,
        )
        other = assign_clusters(swapped, X, min_cluster_size=1)
        np.testing.assert_array_equal(other.hard_labels, 1 - base.hard_labels)


class TestReportFormatting:
    def test_cluster_report_shape(self):
        assignment = ClusterAssignment(
            hard_labels=np.array([0, 1]),
            responsibilities=np.array([[0.9, 0.1], [0.2, 0.8]]),
            cluster_sizes=np.array([1, 1]),
        )
        text = format_cluster_report(np.array([14, 15]), assignment)
        lines = text.splitlines()
        assert lines[0] == "row_t,hard_label,resp_0,resp_1"
        assert lines[1].startswith("14,0,")

    def test_model_summary_mentions_bic(self):
        model = fit_gmm(two_blobs(seed=4), 2, GmmConfig(seed=4, restarts=2))
        text = format_model_summary(model, {1: 100.0, 2: 90.0})
        assert "bic_by_g" in text
        assert "component 1:" in text
