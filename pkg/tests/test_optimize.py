"""Solver behavior: fixed points, convergence, reproducible pathologies."""

import numpy as np
import pytest

from dppmle.kernels import (
    enumerate_distribution,
    subset_indices,
    validate_kernel,
)
from dppmle.likelihood import LikelihoodContext, gradient
from dppmle.optimize import CONVERGED, DIVERGED, MAX_ITER, newton_raphson, sgd
from dppmle.sampling import SampleBatch, make_rng, sample_batch

DENSE2 = np.array([[1.0, 1.0], [1.0, 2.0]])
DIAG3 = np.diag([7.0, 5.0, 9.0])


class TestNewton:
    def test_fixed_point_at_truth(self):
        kernel = validate_kernel(DENSE2, "ensemble")
        ctx = LikelihoodContext(enumerate_distribution(kernel))
        estimate, trace = newton_raphson(ctx, kernel, max_iter=10)
        assert trace.status == CONVERGED
        assert np.linalg.norm(estimate.entries - DENSE2) <= 1e-10

    def test_exact_diagonal_problem_decouples(self):
        # per-coordinate scalar maximizer is q/(1-q) with q the inclusion rate
        kernel = validate_kernel(DIAG3, "ensemble")
        ctx = LikelihoodContext(enumerate_distribution(kernel))
        estimate, trace = newton_raphson(ctx, np.eye(3), max_iter=100, grad_tol=1e-10)
        assert trace.status == CONVERGED
        np.testing.assert_allclose(estimate.entries, DIAG3, atol=1e-6)
        off_diag = estimate.entries[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off_diag, 0.0, atol=1e-9)

    def test_monotone_tail_near_optimum(self, rng):
        kernel = validate_kernel(DENSE2, "ensemble")
        ctx = LikelihoodContext(enumerate_distribution(kernel))
        start = DENSE2 + 0.05 * np.array([[1.0, -0.5], [-0.5, 0.8]])
        _, trace = newton_raphson(ctx, start, max_iter=50, grad_tol=1e-12)
        values = [
            v for v, g in zip(trace.objective, trace.grad_norms) if g < 0.1
        ]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_trace_lists_share_length(self):
        kernel = validate_kernel(DENSE2, "ensemble")
        ctx = LikelihoodContext(enumerate_distribution(kernel))
        _, trace = newton_raphson(ctx, np.eye(2), max_iter=30)
        assert len(trace.iterates) == len(trace.objective) == len(trace.grad_norms)

    def test_csv_schema(self):
        kernel = validate_kernel(DENSE2, "ensemble")
        ctx = LikelihoodContext(enumerate_distribution(kernel))
        _, trace = newton_raphson(ctx, np.eye(2), max_iter=5)
        lines = trace.to_csv().strip().splitlines()
        assert lines[0] == "iter,objective,grad_norm"
        assert len(lines) == len(trace.objective) + 1

    def test_empirical_dense2_converges_to_mle(self):
        kernel = validate_kernel(DENSE2, "ensemble")
        batch = sample_batch(kernel, 30_000, 0, "enumeration")
        ctx = LikelihoodContext.from_batch(batch)
        estimate, trace = newton_raphson(ctx, np.array([[0.5, 0.1], [0.1, 0.5]]))
        assert trace.status == CONVERGED
        assert np.linalg.norm(gradient(ctx, estimate.entries)) <= 1e-8
        # the maximizer sits near the truth at this sample size
        assert np.max(np.abs(estimate.entries - DENSE2)) < 0.1


class TestSgd:
    def test_one_step_all_full_draws(self):
        batch = SampleBatch(2, np.full(10, 0b11), 0, "enumeration")
        estimate, _ = sgd(batch, np.eye(2), eta=0.1, iters=1, seed=0, trace_every=10**9)
        np.testing.assert_allclose(estimate.entries, 1.05 * np.eye(2))

    def test_one_step_all_empty_draws(self):
        batch = SampleBatch(2, np.zeros(10, dtype=int), 0, "enumeration")
        estimate, _ = sgd(batch, np.eye(2), eta=0.1, iters=1, seed=0, trace_every=10**9)
        np.testing.assert_allclose(estimate.entries, 0.95 * np.eye(2))

    def test_determinism(self):
        kernel = validate_kernel(DIAG3, "ensemble")
        batch = sample_batch(kernel, 2000, 4, "enumeration")
        a, trace_a = sgd(batch, np.eye(3), eta=0.1, iters=2000, seed=11)
        b, trace_b = sgd(batch, np.eye(3), eta=0.1, iters=2000, seed=11)
        np.testing.assert_array_equal(a.entries, b.entries)
        assert trace_a.objective == trace_b.objective

    def test_diagonal_recovery(self):
        kernel = validate_kernel(DIAG3, "ensemble")
        batch = sample_batch(kernel, 30_000, 3, "enumeration")
        estimate, trace = sgd(batch, np.eye(3), eta=0.1, iters=60_000, seed=3,
                              trace_every=5000)
        assert trace.status == MAX_ITER
        np.testing.assert_allclose(estimate.entries.diagonal(), [7.0, 5.0, 9.0], atol=0.2)
        off_diag = estimate.entries[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off_diag, 0.0, atol=1e-12)

    def test_single_step_unbiasedness(self):
        # grouped by draw value, the average update reproduces the batch gradient
        kernel = validate_kernel(DENSE2, "ensemble")
        batch = sample_batch(kernel, 5000, 5, "enumeration")
        ctx = LikelihoodContext.from_batch(batch)
        point = np.array([[0.5, 0.05], [0.05, 0.6]])
        expected = gradient(ctx, point)
        rng = make_rng(77)
        picks = rng.integers(0, len(batch), size=100_000)
        pick_masks = batch.masks[picks]
        mean_update = -np.linalg.inv(point + np.eye(2))
        for mask in range(4):
            weight = np.mean(pick_masks == mask)
            if mask == 0 or weight == 0:
                continue
            idx = subset_indices(mask)
            padded = np.zeros((2, 2))
            padded[np.ix_(idx, idx)] = np.linalg.inv(point[np.ix_(idx, idx)])
            mean_update += weight * padded
        rel = np.linalg.norm(mean_update - expected) / np.linalg.norm(expected)
        assert rel <= 0.02

    def test_unstable_on_repulsive_kernel(self):
        # the plain update blows up on the strongly repulsive 2x2 benchmark
        kernel = validate_kernel(DENSE2, "ensemble")
        batch = sample_batch(kernel, 30_000, 0, "enumeration")
        _, trace = sgd(batch, np.array([[0.5, 0.1], [0.1, 0.5]]), eta=0.1,
                       iters=60_000, seed=0)
        assert trace.status == DIVERGED

    def test_eta_validation(self):
        batch = SampleBatch(2, np.zeros(5, dtype=int), 0, "enumeration")
        with pytest.raises(ValueError):
            sgd(batch, np.eye(2), eta=0.0, iters=10, seed=0)
