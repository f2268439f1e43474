"""Tests for the comparison learners and the metric ball projection."""

import numpy as np
import pytest

from pfons.baselines import (
    project_ball_metric,
    run_baseline_exact_ons_ball,
    run_baseline_ogd,
)
from pfons.losses import QuadraticLoss, batch_values
from pfons.ons import compute_regret, offline_best
from pfons.seeding import rng_for
from pfons.sets import L2Ball, Simplex


def quadratic_stream(rng, dim, T, target, noise=0.05):
    out = []
    for _ in range(T):
        a = rng.standard_normal(dim)
        a /= np.linalg.norm(a)
        b = float(a @ target) + noise * float(rng.standard_normal())
        out.append(QuadraticLoss(a, b, radius=1.0))
    return out


def random_spd(rng, dim, eps=0.3):
    f = rng.standard_normal((dim, dim))
    return f @ f.T + eps * np.eye(dim)


class TestProjectBallMetric:
    def test_interior_point_is_returned_unchanged(self):
        mat = np.diag([2.0, 1.0])
        y = np.array([0.3, -0.4])
        out = project_ball_metric(mat, y, 1.0)
        np.testing.assert_array_equal(out, y)

    def test_euclidean_metric_projects_radially(self):
        out = project_ball_metric(np.eye(2), np.array([2.0, 0.0]), 1.0)
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-9)

    def test_result_lands_on_the_sphere(self):
        rng = np.random.default_rng(71)
        for _ in range(10):
            mat = random_spd(rng, 4)
            y = rng.standard_normal(4) * 3.0
            if np.linalg.norm(y) <= 1.0:
                continue
            out = project_ball_metric(mat, y, 1.0)
            assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-8)

    def test_variational_characterization(self):
        rng = np.random.default_rng(72)
        ball = L2Ball(3, 1.0)
        for _ in range(10):
            mat = random_spd(rng, 3)
            y = rng.standard_normal(3) * 2.5
            p = project_ball_metric(mat, y, 1.0)
            residual = mat @ (y - p)
            scale = float(np.linalg.norm(residual)) + 1.0
            for _ in range(200):
                z = ball.sample_point(rng)
                assert float(residual @ (z - p)) <= 1e-8 * scale

    def test_matches_long_frank_wolfe(self):
        rng = np.random.default_rng(73)
        ball = L2Ball(3, 1.0)
        for _ in range(2):
            mat = random_spd(rng, 3)
            y = rng.standard_normal(3) * 2.0 + np.array([1.5, 0.0, 0.0])
            p = project_ball_metric(mat, y, 1.0)

            x = ball.euclid_project(y)
            for _ in range(20_000):
                grad = mat @ (x - y)
                v = ball.loo_argmin(grad)
                d = v - x
                denom = float(d @ mat @ d)
                if denom <= 0.0:
                    break
                sigma = min(1.0, max(0.0, float((y - x) @ mat @ d) / denom))
                x = x + sigma * d
            from_solver = float((p - y) @ mat @ (p - y))
            from_fw = float((x - y) @ mat @ (x - y))
            assert from_solver <= from_fw + 1e-6

    def test_rejects_indefinite_metric(self):
        with pytest.raises(ValueError, match="positive definite"):
            project_ball_metric(np.diag([1.0, -0.5]), np.array([2.0, 0.0]), 1.0)
        with pytest.raises(ValueError, match="positive definite"):
            project_ball_metric(np.diag([1.0, 0.0]), np.array([2.0, 0.0]), 1.0)


class TestOnlineGradientDescent:
    def test_zero_gradient_stream_stays_put(self):
        simplex = Simplex(3)
        seed = 14
        x1 = simplex.sample_point(rng_for(seed, "init"))
        a = np.array([0.9, -0.3, 0.6])
        losses = [QuadraticLoss(a, float(a @ x1), radius=1.0) for _ in range(50)]
        report = run_baseline_ogd(losses, simplex, seed=seed)
        assert report.total_loss == pytest.approx(0.0, abs=1e-20)
        curve = compute_regret(report, losses, simplex, seed=seed)
        assert np.all(np.abs(curve) <= 1e-8)

    def test_learns_a_planted_target(self):
        rng = np.random.default_rng(74)
        simplex = Simplex(4)
        target = np.array([0.7, 0.1, 0.1, 0.1])
        losses = quadratic_stream(rng, 4, 800, target)
        seed = 15
        report = run_baseline_ogd(losses, simplex, seed=seed)

        x1 = simplex.sample_point(rng_for(seed, "init"))
        assert report.play_losses[0] == pytest.approx(losses[0].value(x1), rel=1e-12)
        frozen_total = float(np.sum(batch_values(losses, x1)))
        assert report.total_loss < 0.6 * frozen_total

        offline = offline_best(losses, simplex, seed=seed)
        compute_regret(report, losses, simplex, seed=seed, offline=offline)
        frozen_regret = frozen_total - float(
            np.sum(batch_values(losses, offline.x))
        )
        assert report.final_regret < 0.5 * frozen_regret

    def test_seed_determinism(self):
        rng = np.random.default_rng(75)
        simplex = Simplex(3)
        losses = quadratic_stream(rng, 3, 60, np.full(3, 1.0 / 3.0))
        first = run_baseline_ogd(losses, simplex, seed=4)
        second = run_baseline_ogd(losses, simplex, seed=4)
        np.testing.assert_array_equal(first.play_losses, second.play_losses)


class TestExactNewtonBaseline:
    def test_requires_a_ball(self):
        with pytest.raises(ValueError, match="ball"):
            run_baseline_exact_ons_ball([], Simplex(3), seed=1)

    def test_learns_on_the_ball(self):
        rng = np.random.default_rng(76)
        ball = L2Ball(3, 1.0)
        target = np.array([0.3, -0.2, 0.1])
        losses = quadratic_stream(rng, 3, 300, target, noise=0.02)
        seed = 16
        report = run_baseline_exact_ons_ball(losses, ball, seed=seed)

        x1 = ball.sample_point(rng_for(seed, "init"))
        assert report.play_losses[0] == pytest.approx(losses[0].value(x1), rel=1e-12)
        frozen_total = float(np.sum(batch_values(losses, x1)))
        assert report.total_loss < 0.6 * frozen_total

        curve = compute_regret(report, losses, ball, seed=seed)
        assert curve.shape == (300,)
        # The per-round averaged regret should have collapsed by the end.
        assert (curve[-1] - curve[-100]) < 0.2 * curve[-1] + 1e-9

    def test_regret_not_computed_guard(self):
        rng = np.random.default_rng(77)
        ball = L2Ball(2, 1.0)
        losses = quadratic_stream(rng, 2, 10, np.array([0.2, 0.2]))
        report = run_baseline_exact_ons_ball(losses, ball, seed=3)
        with pytest.raises(ValueError, match="regret"):
            _ = report.final_regret
