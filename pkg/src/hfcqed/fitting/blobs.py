"""Isotropic Gaussian cluster fits in the IQ plane."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import FitError
from ..shots import BlobModel, ShotSet

TRIM_SIGMAS = 4.0
MIN_SHOTS = 100


@dataclass(frozen=True)
class BlobFit:
    """Cluster centers (complex), common sigma, weights and shape diagnostics.

    Components are ordered by decreasing weight.  ``circularity[k]`` is the
    ratio of the minor to the major principal standard deviation of the
    shots assigned to component ``k``; ``sigmas[k]`` is that component's own
    isotropic width.
    """

    means: np.ndarray
    sigma: float
    weights: np.ndarray
    sigmas: np.ndarray
    circularity: np.ndarray
    n_used: int
    n_total: int

    def as_blob_model(self, ground: int = 0, excited: int = 1) -> BlobModel:
        return BlobModel(complex(self.means[ground]), complex(self.means[excited]), self.sigma)


def _truncation_factor(k: float) -> float:
    # E[r^2 | r < k sigma] / (2 sigma^2) for a 2-D isotropic Gaussian.
    x = 0.5 * k * k
    return 1.0 - x * math.exp(-x) / (-math.expm1(-x))


def _em(z, means, sigma, n_iter=200, tol=1e-10):
    K = means.size
    weights = np.full(K, 1.0 / K)
    for _ in range(n_iter):
        d2 = np.abs(z[:, None] - means[None, :]) ** 2
        logp = np.log(weights)[None, :] - d2 / (2 * sigma**2)
        logp -= logp.max(axis=1, keepdims=True)
        resp = np.exp(logp)
        resp /= resp.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        if np.any(nk <= 0):
            raise FitError("component collapse: a cluster lost all its shots")
        new_means = (resp * z[:, None]).sum(axis=0) / nk
        new_sigma = math.sqrt(float((resp * np.abs(z[:, None] - new_means[None, :]) ** 2).sum()) / (2 * z.size))
        weights = nk / z.size
        done = np.max(np.abs(new_means - means)) < tol * new_sigma and abs(new_sigma - sigma) < tol * new_sigma
        means, sigma = new_means, new_sigma
        if done or sigma == 0:
            break
    return means, sigma, weights, resp


def _initial_means(z, K):
    if K == 1:
        return np.array([np.median(z.real) + 1j * np.median(z.imag)])
    # Spread along the principal axis; rotation-equivariant up to ordering.
    c = z - z.mean()
    cov = np.cov(np.vstack([c.real, c.imag]))
    w, v = np.linalg.eigh(cov)
    axis = complex(v[0, -1], v[1, -1])
    proj = (c * np.conj(axis)).real
    qs = np.quantile(proj, np.linspace(0.1, 0.9, K))
    return z.mean() + qs * axis


def blob_fit(shots: ShotSet | np.ndarray, n_components: int = 1, trim: float = TRIM_SIGMAS) -> BlobFit:
    """Fit ``n_components`` circular Gaussians with a shared width.

    Shots farther than ``trim`` sigma from every center are dropped and the
    fit is repeated once, which removes leakage tails.  The width estimate
    is corrected for the truncation so an untailed Gaussian stays unbiased.
    """
    z = shots.iq if isinstance(shots, ShotSet) else np.asarray(shots, dtype=complex).ravel()
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if z.size < MIN_SHOTS * n_components:
        raise ValueError(f"need at least {MIN_SHOTS} shots per component")
    if np.ptp(z.real) == 0 and np.ptp(z.imag) == 0:
        raise FitError("zero-variance input")

    means = _initial_means(z, n_components)
    sigma0 = math.sqrt(0.5 * float(np.var(z.real) + np.var(z.imag))) / max(n_components, 1)
    means, sigma, weights, resp = _em(z, means, sigma0)
    keep = z
    factor = 1.0
    for _ in range(2):
        dist = np.min(np.abs(z[:, None] - means[None, :]), axis=1)
        keep = z[dist < trim * sigma]
        if keep.size < MIN_SHOTS:
            raise FitError("too few shots survive the outlier trim")
        means, sigma, weights, resp = _em(keep, means, sigma)
        factor = _truncation_factor(trim)
        sigma = sigma / math.sqrt(factor)
    if not sigma > 0:
        raise FitError("zero-variance input")
    if n_components > 1:
        sep = np.abs(means[:, None] - means[None, :])[np.triu_indices(n_components, 1)]
        if np.min(sep) < 0.5 * sigma:
            raise FitError("component collapse: cluster centers closer than sigma/2")

    labels = np.argmax(resp, axis=1)
    circ = np.empty(n_components)
    sigk = np.empty(n_components)
    for k in range(n_components):
        pts = keep[labels == k]
        if pts.size < 3:
            circ[k], sigk[k] = math.nan, math.nan
            continue
        cov = np.cov(np.vstack([pts.real, pts.imag]))
        ev = np.linalg.eigvalsh(cov)
        circ[k] = math.sqrt(max(ev[0], 0.0) / ev[1])
        sigk[k] = math.sqrt(0.5 * ev.sum() / factor)
    order = np.argsort(-weights, kind="stable")
    return BlobFit(
        means[order], float(sigma), weights[order], sigk[order], circ[order], int(keep.size), int(z.size)
    )
