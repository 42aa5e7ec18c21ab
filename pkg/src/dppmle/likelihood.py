"""Scaled log-likelihood of an L-ensemble, with exact gradient and Hessian.

The objective for a probability table p over subsets is

    sum_J p(J) log det(L_J) - log det(L + I),

maximized over symmetric positive definite kernels. Its gradient is the
symmetric matrix sum_J p(J) pad(L_J^{-1}) - (L + I)^{-1}, where pad embeds
the inverted minor back at rows and columns J. The Hessian is expressed in
the vectorized chart that lists matrix entries row-major, i.e. coordinates
(0,0), (0,1), ..., (N-1,N-1), treating off-diagonal partners as separate
coordinates.

Terms with p(J) = 0 are skipped, so kernels that are singular on
unobserved subsets remain evaluable; the empty subset contributes only
through the normalizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import EmptyBatch, SingularPrincipalMinor
from .kernels import DistributionTable, as_array, subset_indices
from .sampling import SampleBatch


def empirical_distribution(batch: SampleBatch) -> DistributionTable:
    """Empirical subset frequencies of a batch."""
    if len(batch) == 0:
        raise EmptyBatch("cannot build an empirical distribution from zero draws")
    counts = np.bincount(batch.masks, minlength=1 << batch.n_ground)
    return DistributionTable(batch.n_ground, counts / len(batch))


@dataclass(frozen=True)
class LikelihoodContext:
    """Immutable probability table (empirical or theoretical) to score against."""

    dist: DistributionTable

    @property
    def n_ground(self) -> int:
        return self.dist.n

    @cached_property
    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Masks with positive probability and their weights."""
        masks = np.nonzero(self.dist.probs > 0.0)[0]
        return masks, self.dist.probs[masks]

    @classmethod
    def from_batch(cls, batch: SampleBatch) -> "LikelihoodContext":
        return cls(empirical_distribution(batch))


def _padded_minor_inverse(entries: np.ndarray, mask: int) -> np.ndarray:
    """Inverse of the principal minor at ``mask``, zero-padded to full size."""
    idx = subset_indices(mask)
    try:
        inv = np.linalg.inv(entries[np.ix_(idx, idx)])
    except np.linalg.LinAlgError as exc:
        raise SingularPrincipalMinor(f"singular principal minor at mask {mask}", mask) from exc
    out = np.zeros_like(entries)
    out[np.ix_(idx, idx)] = inv
    return out


def log_likelihood(ctx: LikelihoodContext, kernel) -> float:
    """Scaled log-likelihood; -inf when a supported minor has det <= 0."""
    entries = as_array(kernel)
    masks, weights = ctx.support
    sign_norm, logdet_norm = np.linalg.slogdet(entries + np.eye(entries.shape[0]))
    if sign_norm <= 0:
        return -math.inf
    total = -logdet_norm
    for mask, w in zip(masks, weights):
        if mask == 0:
            continue
        idx = subset_indices(int(mask))
        sign, logdet = np.linalg.slogdet(entries[np.ix_(idx, idx)])
        if sign <= 0:
            return -math.inf
        total += w * logdet
    return float(total)


def gradient(ctx: LikelihoodContext, kernel) -> np.ndarray:
    """Gradient matrix sum_J p(J) pad(L_J^{-1}) - (L + I)^{-1}."""
    entries = as_array(kernel)
    n = entries.shape[0]
    grad = -np.linalg.inv(entries + np.eye(n))
    masks, weights = ctx.support
    for mask, w in zip(masks, weights):
        if mask == 0:
            continue
        grad += w * _padded_minor_inverse(entries, int(mask))
    return grad


def hessian(ctx: LikelihoodContext, kernel) -> np.ndarray:
    """Second derivative of the objective in the vectorized N^2 chart.

    Entry ((i,j),(k,l)) is
    -sum_J p(J) A_ik A_lj + B_ik B_lj with A = pad(L_J^{-1}) and
    B = (L + I)^{-1}; rows and columns are indexed i*N+j and k*N+l.
    Returned as an (N^2, N^2) array, symmetric as a matrix.
    """
    entries = as_array(kernel)
    n = entries.shape[0]
    norm_inv = np.linalg.inv(entries + np.eye(n))
    # tensor[i,j,k,l] = d gradient_{ij} / d L_{kl}
    tensor = np.einsum("ik,lj->ijkl", norm_inv, norm_inv)
    masks, weights = ctx.support
    for mask, w in zip(masks, weights):
        if mask == 0:
            continue
        padded = _padded_minor_inverse(entries, int(mask))
        tensor -= w * np.einsum("ik,lj->ijkl", padded, padded)
    return tensor.reshape(n * n, n * n)


def kl_gap(ctx_star: LikelihoodContext, kernel) -> float:
    """Gap between the objective's own maximum and its value at ``kernel``.

    With a theoretical table this equals the Kullback-Leibler divergence
    from the generating process to the one induced by ``kernel``; it is
    nonnegative and vanishes exactly on the sign-conjugation orbit.
    """
    masks, weights = ctx_star.support
    peak = float(np.sum(weights * np.log(weights)))
    return peak - log_likelihood(ctx_star, kernel)
