"""Nonlinear observation stage: posterior moments of w from y = f(w) + noise.

The channel applies a component-wise nonlinearity ``f`` to the mixture and
adds white Gaussian noise, so the tilted posterior of every component
factorizes and the stage reduces to M independent scalar problems

    p(w | r, y)  propto  N(w; r, v) * N(y; f(w), sigma2).

The first and second moments are computed with Gauss-Hermite quadrature
initialized on the cavity Gaussian (substitution ``w = r + sqrt(2 v) t``) and
then recentred twice on the running moment estimates, with all factors
accumulated in the log domain so high-SNR sweeps do not underflow.  The
identity nonlinearity short-circuits to the conjugate closed form, in which
case the extrinsic output is exactly ``(y, sigma2)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .messages import (
    DEFAULT_EPSILON,
    GaussianMessage,
    PosteriorSummary,
    clip_alpha,
    extrinsic,
)

IDENTITY_NAMES = ("id", "identity")
NONLINEARITIES: dict[str, Callable] = {
    "id": lambda w: w,
    "identity": lambda w: w,
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class ChannelSpec:
    """Observation model: component-wise nonlinearity, noise variance, quadrature order.

    ``nonlinearity`` is either a registered name (``"id"``, ``"tanh"``) or any
    component-wise callable.  SNR is defined as ``1 / noise_variance``.
    """

    nonlinearity: Union[str, Callable] = "id"
    noise_variance: float = 1.0
    quadrature_order: int = 50

    def __post_init__(self):
        if isinstance(self.nonlinearity, str) and self.nonlinearity not in NONLINEARITIES:
            raise ValueError(
                f"unknown nonlinearity {self.nonlinearity!r}; "
                f"known names: {sorted(set(NONLINEARITIES))}"
            )
        if not (np.isfinite(self.noise_variance) and self.noise_variance > 0.0):
            raise ValueError(f"noise variance must be positive, got {self.noise_variance}")
        if int(self.quadrature_order) < 2:
            raise ValueError(f"quadrature order must be at least 2, got {self.quadrature_order}")

    @property
    def is_identity(self):
        return isinstance(self.nonlinearity, str) and self.nonlinearity in IDENTITY_NAMES

    @property
    def f(self) -> Callable:
        if callable(self.nonlinearity):
            return self.nonlinearity
        return NONLINEARITIES[self.nonlinearity]

    @property
    def snr_db(self):
        return -10.0 * np.log10(self.noise_variance)

    @classmethod
    def from_snr_db(cls, snr_db, nonlinearity="id", quadrature_order=50):
        return cls(nonlinearity, 10.0 ** (-float(snr_db) / 10.0), quadrature_order)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite abscissae and weights for the weight function exp(-t^2)."""

    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def gh_rule(order: int) -> QuadratureRule:
    """Gauss-Hermite rule of the given order (exact for polynomials up to 2Q-1)."""
    q = int(order)
    if not 2 <= q <= 200:
        raise ValueError(f"quadrature order must lie in [2, 200], got {q}")
    nodes, weights = np.polynomial.hermite.hermgauss(q)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


def _conjugate_moments(r, v, y, sigma2):
    """Closed-form moments for the identity nonlinearity (Gaussian x Gaussian)."""
    v_post = 1.0 / (1.0 / v + 1.0 / sigma2)
    m1 = v_post * (r / v + y / sigma2)
    m2 = m1 * m1 + v_post
    return m1, m2


_ADAPT_PASSES = 3


def _quadrature_moments(r, v, y, f, sigma2, rule):
    """Vectorized posterior moments over components; returns (m1, m2, fallback).

    The first pass uses the cavity substitution ``w = r + sqrt(2 v) t``; two
    further passes recentre and rescale the same rule on the running moment
    estimates, integrating the full tilted density against the moving Gaussian
    in the log domain.  Recentring is what pushes the rule from ~1e-4 to
    ~1e-9 relative accuracy when the likelihood is much narrower than the
    cavity, at the price of evaluating the nonlinearity three times per node.

    ``fallback`` marks components whose normalizer underflowed (or went
    non-finite); those freeze at the prior moments ``(r, r^2 + v)``.
    """
    t = rule.nodes[None, :]
    log_u = np.log(rule.weights)[None, :]
    center = r
    scale = np.full_like(r, v)
    bad = np.zeros(r.shape, dtype=bool)
    m1 = r.copy()
    m2 = r * r + v
    for _ in range(_ADAPT_PASSES):
        w = center[:, None] + np.sqrt(2.0 * scale)[:, None] * t
        resid = y[:, None] - f(w)
        log_terms = (
            log_u + t * t
            - (w - r[:, None]) ** 2 / (2.0 * v)
            - resid * resid / (2.0 * sigma2)
        )
        top = np.max(log_terms, axis=1, keepdims=True)
        ok_top = np.isfinite(top[:, 0])
        q = np.exp(log_terms - np.where(np.isfinite(top), top, 0.0))
        z0 = q.sum(axis=1)
        z1 = (q * w).sum(axis=1)
        z2 = (q * w * w).sum(axis=1)
        good = ok_top & np.isfinite(z0) & (z0 > 0.0) & np.isfinite(z1) & np.isfinite(z2)
        bad |= ~good
        safe = np.where(good, z0, 1.0)
        m1 = np.where(bad, r, z1 / safe)
        m2 = np.where(bad, r * r + v, z2 / safe)
        m2 = np.maximum(m2, m1 * m1)  # posterior variance never negative
        center = m1
        scale = np.maximum(m2 - m1 * m1, 1e-12 * v)
    return m1, m2, bad


def log_normalizer(r, v, y, spec: ChannelSpec):
    """Log of the tilted-density normalizer ``Z = int N(w; r, v) N(y; f(w), s2) dw``.

    Exact for the identity nonlinearity; otherwise evaluated with the same
    adaptive quadrature the moments use.  The finite-difference test suites
    differentiate this with respect to ``r`` to check Tweedie consistency.
    """
    r = float(r)
    v = float(v)
    y = float(y)
    sigma2 = spec.noise_variance
    if spec.is_identity:
        tot = v + sigma2
        return float(-0.5 * (y - r) ** 2 / tot - 0.5 * np.log(2.0 * np.pi * tot))
    rule = gh_rule(spec.quadrature_order)
    t = rule.nodes
    log_u = np.log(rule.weights)
    center, scale = r, v
    log_z = -np.inf
    for _ in range(_ADAPT_PASSES):
        w = center + np.sqrt(2.0 * scale) * t
        resid = y - spec.f(w)
        log_terms = log_u + t * t - (w - r) ** 2 / (2.0 * v) - resid * resid / (2.0 * sigma2)
        top = float(np.max(log_terms))
        q = np.exp(log_terms - top)
        z0 = float(q.sum())
        m1 = float((q * w).sum()) / z0
        m2 = float((q * w * w).sum()) / z0
        log_z = (
            top + np.log(z0) + 0.5 * np.log(2.0 * scale)
            - 0.5 * np.log(2.0 * np.pi * v) - 0.5 * np.log(2.0 * np.pi * sigma2)
        )
        center = m1
        scale = max(m2 - m1 * m1, 1e-12 * v)
    return float(log_z)


def scalar_moments(r, v, y, spec: ChannelSpec):
    """Posterior mean and second moment of one component under the tilted law.

    Both moments come from a single set of quadrature evaluations; a
    normalizer underflow falls back to the prior moments ``(r, r^2 + v)`` and
    emits a ``RuntimeWarning``.
    """
    v = float(v)
    if v <= 0.0:
        raise ValueError(f"cavity variance must be positive, got {v}")
    if spec.is_identity:
        return _conjugate_moments(float(r), v, float(y), spec.noise_variance)
    rule = gh_rule(spec.quadrature_order)
    m1, m2, bad = _quadrature_moments(
        np.array([float(r)]), v, np.array([float(y)]), spec.f, spec.noise_variance, rule
    )
    if bad[0]:
        warnings.warn(
            "quadrature normalizer underflow; returning prior moments", RuntimeWarning
        )
    return float(m1[0]), float(m2[0])


def likelihood_step(
    rw: GaussianMessage,
    y,
    spec: ChannelSpec,
    epsilon=DEFAULT_EPSILON,
) -> tuple[GaussianMessage, PosteriorSummary]:
    """One full pass of the observation stage.

    Component posterior means and the trace-averaged posterior variance are
    computed from the quadrature moments; the Onsager coefficient is their
    variance ratio (clipped) and the extrinsic output follows the universal
    update.  For the identity nonlinearity the extrinsic output is exactly
    ``(y, sigma2)``, independent of the input message.
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.shape != rw.mean.shape:
        raise ValueError(f"y has shape {y.shape}, expected {rw.mean.shape}")
    v = rw.variance
    sigma2 = spec.noise_variance

    if spec.is_identity:
        m1, m2 = _conjugate_moments(rw.mean, v, y, sigma2)
        v_post = 1.0 / (1.0 / v + 1.0 / sigma2)
        post = PosteriorSummary(m1, v_post, clip_alpha(v_post / v, epsilon))
        return GaussianMessage(y, sigma2), post

    rule = gh_rule(spec.quadrature_order)
    m1, m2, bad = _quadrature_moments(rw.mean, v, y, spec.f, sigma2, rule)
    if np.any(bad):
        warnings.warn(
            f"quadrature normalizer underflow on {int(bad.sum())} of {y.size} components",
            RuntimeWarning,
        )
    v_post = float(np.mean(m2 - m1 * m1))
    post = PosteriorSummary(m1, v_post, clip_alpha(v_post / v, epsilon))
    return extrinsic(rw, post), post
