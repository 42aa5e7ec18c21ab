"""Asymptotic covariance of the likelihood maximizer and its Monte Carlo checks.

The root-n scaled estimation error is asymptotically centered Gaussian.
Its covariance is the inverse of the negated objective curvature at the
truth, taken on the symmetric-matrix subspace: in the vectorized chart
the curvature annihilates every antisymmetric direction exactly (the
score is a symmetric matrix almost surely), so the N^2 x N^2 "inverse"
is the symmetric-subspace pseudo-inverse. For 2x2 kernels the (a, b, c)
chart is full-rank and the covariance has the explicit closed form
implemented in :func:`covariance_2x2_explicit`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .closed_form import TwoByTwoParams, _mle_2x2_arrays, forward_probs_2x2
from .errors import ReducibleKernel, SingularHessian, ZeroB
from .kernels import (
    DistributionTable,
    KernelMatrix,
    as_array,
    enumerate_distribution,
    sign_align,
)
from .likelihood import LikelihoodContext, hessian
from .optimize import CONVERGED, newton_raphson
from .sampling import make_rng

#: Eigenvalue floor used when forming inverse square roots of covariances.
EIG_FLOOR = 1e-12

#: Vectorized-chart positions of (a, b, c) for a 2x2 kernel.
CHART_2X2_INDICES = (0, 1, 3)


def is_irreducible(kernel) -> bool:
    """Connectivity of the nonzero off-diagonal pattern.

    A kernel that permutes into diagonal blocks describes independent
    subprocesses; its curvature is singular in the cross-block directions,
    so the asymptotic covariance only exists for connected patterns.
    """
    entries = as_array(kernel)
    n = entries.shape[0]
    if n == 1:
        return True
    tol = 1e-12 * max(1.0, float(np.max(np.abs(entries))))
    adjacency = np.abs(entries) > tol
    np.fill_diagonal(adjacency, False)
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in np.nonzero(adjacency[i])[0]:
            if int(j) not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    return len(seen) == n


def symmetric_chart_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the symmetric subspace inside the N^2 chart.

    Columns are vectorized e_ii and (e_ij + e_ji)/sqrt(2) for i < j.
    """
    cols = []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        cols.append(e.reshape(-1))
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            cols.append(e.reshape(-1))
    return np.column_stack(cols)


def asymptotic_covariance(kernel_star: KernelMatrix) -> np.ndarray:
    """Covariance of the scaled estimation error, in the N^2 chart.

    Inverts the negated curvature of the expected objective on the
    symmetric subspace and embeds the result back, which is its
    Moore-Penrose pseudo-inverse there: antisymmetric directions are
    exact null directions of the curvature at theoretical tables and the
    estimator never leaves the symmetric subspace either.
    """
    if not is_irreducible(kernel_star):
        raise ReducibleKernel("kernel splits into independent blocks")
    ctx = LikelihoodContext(enumerate_distribution(kernel_star))
    curvature = hessian(ctx, kernel_star)
    n = kernel_star.n
    basis = symmetric_chart_basis(n)
    restricted = basis.T @ curvature @ basis
    restricted = (restricted + restricted.T) / 2.0
    eigs = np.linalg.eigvalsh(restricted)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(restricted))))
    if eigs.max() > -tol:
        raise SingularHessian(
            f"curvature is not negative definite on symmetric directions (max eig {eigs.max():.3e})"
        )
    inverse = np.linalg.inv(-restricted)
    cov = basis @ inverse @ basis.T
    return (cov + cov.T) / 2.0


def chart_covariance_2x2(cov_vec: np.ndarray) -> np.ndarray:
    """Extract the (a, b, c) block from a 4x4 vectorized-chart covariance."""
    idx = np.array(CHART_2X2_INDICES)
    return cov_vec[np.ix_(idx, idx)]


def covariance_2x2_explicit(params: TwoByTwoParams) -> np.ndarray:
    """Closed-form asymptotic covariance of (a, b, c) estimates, b > 0.

    Delta-method image of the multinomial covariance of the four cell
    frequencies under the map to (a, b, c); equals the inverse negated
    curvature of the expected objective in the same chart.
    """
    a, b, c = params.a, params.b, params.c
    if b <= 0.0:
        raise ZeroB("explicit covariance requires b > 0")
    d = (a + 1.0) * (c + 1.0) - b * b
    det = a * c - b * b
    s12 = a * c / (2.0 * b) + a * b + a / (2.0 * b) * det
    s23 = a * c / (2.0 * b) + b * c + c / (2.0 * b) * det
    inner = np.array(
        [
            [a + a * a, s12, a * c],
            [s12, (a * c / (b * b) - 1.0) / 4.0 * d + (a + c + 4.0 * a * c) / 4.0, s23],
            [a * c, s23, c + c * c],
        ]
    )
    return d * inner


def inverse_sqrt(matrix: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetric inverse square root with an eigenvalue floor."""
    eigs, vecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    eigs = np.maximum(eigs, floor)
    return (vecs / np.sqrt(eigs)) @ vecs.T


# ---------------------------------------------------------------------------
# Monte Carlo experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CltResult:
    """Sample moments of the scaled estimation error over replications."""

    covariance: np.ndarray
    mean: np.ndarray
    n: int
    reps: int
    failures: int
    seed: int

    @property
    def degenerate(self) -> bool:
        return self.reps - self.failures < 2


def _multinomial_tables(probs: np.ndarray, n: int, reps: int, rng) -> np.ndarray:
    """Empirical tables of ``reps`` batches of size n, one multinomial each.

    A batch of independent draws enters every estimator only through its
    empirical table, so sampling the table directly is equivalent in law
    and much faster than materializing the draws.
    """
    return rng.multinomial(n, probs, size=reps) / n


def clt_experiment(kernel_star: KernelMatrix, n: int, reps: int, seed: int) -> CltResult:
    """Empirical covariance of sqrt(n) * (aligned estimate - truth).

    2x2 kernels use the closed-form estimator (vectorized across
    replications); larger kernels run Newton from the truth on each
    replication. Estimates are aligned to the truth's sign orbit before
    differencing. Failed replications are dropped and counted.
    """
    rng = make_rng(seed)
    table = enumerate_distribution(kernel_star)
    star = kernel_star.entries
    dim = kernel_star.n**2
    if kernel_star.n == 2:
        tables = _multinomial_tables(table.probs, n, reps, rng)
        a, b, c, ok = _mle_2x2_arrays(tables[:, 0], tables[:, 1], tables[:, 2], tables[:, 3])
        # b >= 0 by construction and the truth has b >= 0, so the identity
        # diagonal is already the nearest orbit representative.
        deviations = np.sqrt(n) * (
            np.stack([a, b, b, c], axis=1) - star.reshape(-1)[None, :]
        )
        deviations = deviations[ok]
        failures = int(reps - ok.sum())
    else:
        rows = []
        failures = 0
        for counts in rng.multinomial(n, table.probs, size=reps):
            ctx = LikelihoodContext(DistributionTable(kernel_star.n, counts / n))
            estimate, trace = newton_raphson(ctx, kernel_star, max_iter=50)
            if trace.status != CONVERGED:
                failures += 1
                continue
            aligned = sign_align(estimate, kernel_star)
            rows.append(np.sqrt(n) * (aligned - star).reshape(-1))
        deviations = np.array(rows) if rows else np.zeros((0, dim))
    if deviations.shape[0] >= 2:
        covariance = np.cov(deviations, rowvar=False)
        mean = deviations.mean(axis=0)
    else:
        covariance = np.zeros((dim, dim))
        mean = deviations.mean(axis=0) if deviations.shape[0] else np.zeros(dim)
    return CltResult(covariance, mean, n, reps, failures, seed)


@dataclass(frozen=True)
class RateReport:
    """Kolmogorov distances of the standardized estimator per sample size."""

    sample_sizes: tuple[int, ...]
    kolmogorov_distances: tuple[float, ...]
    replications: int
    seed: int
    outside_band_fractions: tuple[float, ...]

    def __post_init__(self):
        if len(self.sample_sizes) != len(self.kolmogorov_distances):
            raise ValueError("one distance per sample size required")
        if any(not 0.0 <= d <= 1.0 for d in self.kolmogorov_distances):
            raise ValueError("Kolmogorov distances live in [0, 1]")

    def to_csv(self) -> str:
        lines = ["n,ks_distance,reps,seed"]
        for n, dist in zip(self.sample_sizes, self.kolmogorov_distances):
            lines.append(f"{n},{dist!r},{self.replications},{self.seed}")
        return "\n".join(lines) + "\n"


def _ks_distance_to_normal(samples: np.ndarray) -> float:
    """Exact one-sample Kolmogorov statistic against the standard normal."""
    ordered = np.sort(samples)
    m = ordered.size
    cdf = norm.cdf(ordered)
    upper = np.max(np.arange(1, m + 1) / m - cdf)
    lower = np.max(cdf - np.arange(0, m) / m)
    return float(max(upper, lower))


#: Fixed rectangle grid per coordinate: the standard normal quartiles.
GRID_POINTS = (-0.6744897501960817, 0.0, 0.6744897501960817)


def _joint_rectangle_distance(standardized: np.ndarray) -> float:
    """Max deviation of joint orthant frequencies from the normal product."""
    dim = standardized.shape[1]
    grid_cdf = {x: norm.cdf(x) for x in GRID_POINTS}
    worst = 0.0
    corners = np.array(np.meshgrid(*[GRID_POINTS] * dim)).reshape(dim, -1).T
    for corner in corners:
        empirical = float(np.mean(np.all(standardized < corner[None, :], axis=1)))
        theoretical = float(np.prod([grid_cdf[x] for x in corner]))
        worst = max(worst, abs(empirical - theoretical))
    return worst


def berry_esseen_experiment(
    params_star: TwoByTwoParams,
    sizes,
    reps: int,
    seed: int,
) -> RateReport:
    """Kolmogorov distance of the standardized estimator per sample size.

    For each size, replications draw an empirical table, estimate in the
    (a, b, c) chart, scale by sqrt(n), and whiten with the inverse square
    root of the closed-form covariance. The reported distance is the max
    of the three componentwise Kolmogorov statistics and the deviations
    over a fixed quartile grid of joint rectangles.

    Also records how often the estimate's marginal-kernel eigenvalues
    leave the band (0.05, 0.95); the asymptotic guarantees assume a
    compact eigenvalue band, which the experiment deliberately does not
    enforce.
    """
    sizes = tuple(int(n) for n in sizes)
    if any(later < earlier for earlier, later in zip(sizes, sizes[1:])):
        raise ValueError("sample sizes must be ascending")
    if params_star.b <= 0.0:
        raise ZeroB("the standardization needs the explicit covariance, which needs b > 0")
    table = forward_probs_2x2(params_star)
    truth = np.array([params_star.a, params_star.b, params_star.c])
    whitener = inverse_sqrt(covariance_2x2_explicit(params_star))
    rng = make_rng(seed)
    distances = []
    outside = []
    for n in sizes:
        tables = _multinomial_tables(table.probs, n, reps, rng)
        a, b, c, ok = _mle_2x2_arrays(tables[:, 0], tables[:, 1], tables[:, 2], tables[:, 3])
        estimates = np.stack([a, b, c], axis=1)[ok]
        deviations = np.sqrt(n) * (estimates - truth[None, :])
        standardized = deviations @ whitener.T
        component_ks = max(
            _ks_distance_to_normal(standardized[:, k]) for k in range(3)
        )
        distance = max(component_ks, _joint_rectangle_distance(standardized))
        distances.append(min(distance, 1.0))
        outside.append(_band_exit_fraction(estimates))
    return RateReport(sizes, tuple(distances), reps, seed, tuple(outside))


def _band_exit_fraction(estimates: np.ndarray, low: float = 0.05, high: float = 0.95) -> float:
    """Fraction of (a, b, c) estimates whose marginal eigenvalues leave [low, high]."""
    a, b, c = estimates[:, 0], estimates[:, 1], estimates[:, 2]
    center = (a + c) / 2.0
    radius = np.sqrt(((a - c) / 2.0) ** 2 + b**2)
    eigs = np.stack([center - radius, center + radius], axis=1)
    marginal = eigs / (1.0 + eigs)
    bad = np.any((marginal < low) | (marginal > high), axis=1)
    return float(np.mean(bad))
