"""Mean-variance Gaussian messages and the Onsager-corrected extrinsic update.

Every stage of the receiver speaks the same language: it receives a Gaussian
pseudo-observation ``r = x + sqrt(v) * noise`` described by a mean vector and
one shared (isotropic) variance, and answers with a message of the same form.
The extrinsic transformation removes the input's own contribution from a
posterior so that no stage feeds its input information back to itself; the
Onsager coefficient ``alpha`` (posterior variance over input variance) governs
that subtraction.

All types here are immutable values and all operations are pure functions, so
they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPSILON = 1e-6


class DivergenceError(ValueError):
    """A quantity that must be finite came out NaN/Inf (iteration diverged upstream)."""


def _finite_vector(values, what):
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if arr.ndim != 1:
        raise ValueError(f"{what} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(f"{what} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class GaussianMessage:
    """Gaussian pseudo-observation: mean vector plus a single per-component variance."""

    mean: np.ndarray
    variance: float

    def __post_init__(self):
        object.__setattr__(self, "mean", _finite_vector(self.mean, "message mean"))
        v = float(self.variance)
        if not np.isfinite(v):
            raise DivergenceError("message variance is non-finite")
        if v <= 0.0:
            raise ValueError(f"message variance must be positive, got {v}")
        object.__setattr__(self, "variance", v)

    def __len__(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class PosteriorSummary:
    """Posterior moments of one stage plus its clipped Onsager coefficient.

    ``variance`` is the raw trace-averaged posterior variance (it may be zero
    for a saturated denoiser); ``alpha`` is the variance ratio
    ``posterior / input`` already clipped into ``[eps, 1 - eps]``.  The ratio
    parameterization is interchangeable with the Fisher-information form
    ``alpha = 1 - (v_in / N) * J`` where ``J`` is the trace Fisher information
    of the pseudo-observation; the finite-difference test suites verify the
    equivalence, but the ratio is what runs.
    """

    mean: np.ndarray
    variance: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "mean", _finite_vector(self.mean, "posterior mean"))
        v = float(self.variance)
        if not np.isfinite(v):
            raise DivergenceError("posterior variance is non-finite")
        if v < 0.0:
            raise ValueError(f"posterior variance must be nonnegative, got {v}")
        a = float(self.alpha)
        if not np.isfinite(a):
            raise DivergenceError("alpha is non-finite")
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1) after clipping, got {a}")
        object.__setattr__(self, "variance", v)
        object.__setattr__(self, "alpha", a)


def clip_alpha(alpha, epsilon=DEFAULT_EPSILON):
    """Clamp an Onsager coefficient into [epsilon, 1 - epsilon].

    Interior values pass through unchanged; values at or beyond the ends are
    pulled inside so extrinsic variances stay positive and finite.  A
    non-finite ``alpha`` raises :class:`DivergenceError` since it signals
    numerical divergence upstream, not a clippable value.
    """
    eps = float(epsilon)
    if not 0.0 < eps < 0.5:
        raise ValueError(f"epsilon must lie in (0, 0.5), got {eps}")
    a = float(alpha)
    if not np.isfinite(a):
        raise DivergenceError(f"cannot clip non-finite alpha {a}")
    return min(max(a, eps), 1.0 - eps)


def extrinsic(input_msg: GaussianMessage, posterior: PosteriorSummary) -> GaussianMessage:
    """Onsager-corrected extrinsic message: posterior with the input divided out.

    With ``a = posterior.alpha`` (already clipped into (0, 1)):

        mean = (posterior.mean - a * input.mean) / (1 - a)
        variance = a / (1 - a) * input.variance

    Recombining the result with the input (see :func:`combine`) reproduces the
    posterior moments exactly, which is the defining property of the update.
    """
    a = posterior.alpha
    if not 0.0 < a < 1.0:
        raise ValueError(f"posterior alpha {a} outside (0, 1); clip before extrinsic")
    if posterior.mean.shape != input_msg.mean.shape:
        raise ValueError(
            f"dimension mismatch: posterior {posterior.mean.shape} vs input {input_msg.mean.shape}"
        )
    denom = 1.0 - a
    mean = (posterior.mean - a * input_msg.mean) / denom
    variance = a / denom * input_msg.variance
    return GaussianMessage(mean, variance)


def combine(a: GaussianMessage, b: GaussianMessage) -> GaussianMessage:
    """Precision-weighted product of two Gaussian messages.

    Used by the test suite to verify the extrinsic roundtrip identity; the
    receiver itself never multiplies messages directly.
    """
    if a.mean.shape != b.mean.shape:
        raise ValueError(f"dimension mismatch: {a.mean.shape} vs {b.mean.shape}")
    precision = 1.0 / a.variance + 1.0 / b.variance
    variance = 1.0 / precision
    mean = variance * (a.mean / a.variance + b.mean / b.variance)
    return GaussianMessage(mean, variance)
