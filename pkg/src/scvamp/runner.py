"""Outer iteration schedule of the three-stage receiver plus ablation variants.

One iteration: the coupling stage produces extrinsic messages to both sides
from the current pair of pseudo-observations; the code denoiser consumes the
x-side output and refreshes ``(r_x, v_x)``; the observation stage consumes the
w-side output and refreshes ``(r_w, v_w)``.  The two refreshes read only the
coupling outputs, so their order does not matter.  Initialization is the
non-informative ``(0, 1)`` on the x side (zero mean, unit variance for BPSK)
and ``(y, sigma2)`` on the w side.

Variants:

* ``scvamp3``           - full Onsager correction on all stages.
* ``scvamp2-mismatched``- the observation stage is frozen at the constant
                          message ``(y, sigma2)`` (exactly the identity-f
                          behaviour) regardless of the true nonlinearity.
* ``no-onsager``        - every stage forwards its posterior (mean and
                          posterior variance) instead of the extrinsic message.
* ``llr-turbo``         - coupling and observation stages keep the Onsager
                          correction, the decoder uses classical LLR
                          subtraction.

No damping is applied anywhere.  A non-finite message aborts the trial with
the divergence flag set and every bit of the frame scored as an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import Realization, TrialScenario, realize
from .coupling import coupling_posterior
from .denoiser import (
    _VARIANCE_FLOOR,
    _bernoulli_moments,
    bp_decode,
    llr_from_pseudo,
    syndrome,
)
from .likelihood import likelihood_step
from .messages import (
    DEFAULT_EPSILON,
    DivergenceError,
    GaussianMessage,
    PosteriorSummary,
    clip_alpha,
    extrinsic,
)

# posterior-forwarding variants can produce exactly-zero variances; keep legal
_FORWARD_FLOOR = 1e-30


class Variant(str, Enum):
    SCVAMP3 = "scvamp3"
    SCVAMP2_MISMATCHED = "scvamp2-mismatched"
    NO_ONSAGER = "no-onsager"
    LLR_TURBO = "llr-turbo"

    @classmethod
    def from_name(cls, name):
        for v in cls:
            if v.value == name:
                return v
        raise ValueError(f"unknown variant {name!r}; known: {[v.value for v in cls]}")


@dataclass(frozen=True)
class IterationTrace:
    """Per-iteration diagnostics: MSE, message variances, raw Onsager ratios.

    ``alphas`` holds the unclipped variance ratios (coupling x-side,
    observation stage, denoiser stage); entries are NaN when a variant does
    not compute that stage.  Length equals the number of executed iterations.
    """

    mse: np.ndarray
    v_x: np.ndarray
    v_w: np.ndarray
    alphas: np.ndarray

    def __len__(self):
        return self.mse.shape[0]


@dataclass(frozen=True)
class DecodeResult:
    hard_bits: np.ndarray
    bit_errors: int
    converged_iteration: int | None
    trace: IterationTrace
    diverged: bool = False


def hard_decision(means) -> np.ndarray:
    """Symbol decisions from posterior means; an exact zero breaks to +1."""
    return np.where(np.asarray(means) >= 0.0, 1.0, -1.0)


def _decoder_pass(rx_msg, code, bp_iterations, epsilon):
    """BP posterior plus both extrinsic flavours, from a single decode."""
    llr_in = llr_from_pseudo(rx_msg)
    llr_app = bp_decode(code, llr_in, bp_iterations)
    means, v_post = _bernoulli_moments(llr_app.values)
    alpha_raw = v_post / rx_msg.variance
    post = PosteriorSummary(means, v_post, clip_alpha(alpha_raw, epsilon))
    return llr_in, llr_app, post, alpha_raw


def run_variant(
    variant: Variant,
    y,
    scenario: TrialScenario,
    outer_iters: int = 20,
    bp_iters: int = 20,
    *,
    early_stop: bool = False,
    epsilon: float = DEFAULT_EPSILON,
    truth: Realization | None = None,
) -> DecodeResult:
    """Run one receiver variant for ``outer_iters`` iterations on one frame.

    ``truth`` defaults to re-drawing the transmit side from the scenario seed,
    which is exactly what produced ``y`` in a simulation; it supplies the
    transmitted symbols for the MSE trace and the codeword for error counts.
    """
    if int(outer_iters) < 1:
        raise ValueError(f"outer_iters must be >= 1, got {outer_iters}")
    variant = Variant(variant)
    if truth is None:
        truth = realize(scenario)
    y = np.asarray(y, dtype=np.float64)
    code, mix, spec = scenario.code, scenario.h, scenario.spec
    n = code.n
    onsager = variant is not Variant.NO_ONSAGER

    mse, vxs, vws, alphas = [], [], [], []
    x_hat = np.zeros(n)
    prev_hard = None
    converged_at = None
    diverged = False

    try:
        rx_msg = GaussianMessage(np.zeros(n), 1.0)
        rw_msg = GaussianMessage(y, spec.noise_variance)
        for t in range(1, int(outer_iters) + 1):
            x_post_c, w_post_c = coupling_posterior(rx_msg, rw_msg, mix, epsilon)
            alpha_c_raw = x_post_c.variance / rx_msg.variance
            if onsager:
                to_denoiser = extrinsic(rx_msg, x_post_c)
                to_observer = extrinsic(rw_msg, w_post_c)
            else:
                to_denoiser = GaussianMessage(
                    x_post_c.mean, max(x_post_c.variance, _FORWARD_FLOOR)
                )
                to_observer = GaussianMessage(
                    w_post_c.mean, max(w_post_c.variance, _FORWARD_FLOOR)
                )

            if variant is Variant.LLR_TURBO:
                llr_in, llr_app, post_b, alpha_b_raw = _decoder_pass(
                    to_denoiser, code, bp_iters, epsilon
                )
                ext_means, ext_var = _bernoulli_moments(llr_app.values - llr_in.values)
                rx_msg = GaussianMessage(ext_means, max(ext_var, _VARIANCE_FLOOR))
            else:
                _, _, post_b, alpha_b_raw = _decoder_pass(to_denoiser, code, bp_iters, epsilon)
                if onsager:
                    rx_msg = extrinsic(to_denoiser, post_b)
                else:
                    rx_msg = GaussianMessage(
                        post_b.mean, max(post_b.variance, _FORWARD_FLOOR)
                    )
            x_hat = post_b.mean

            if variant is Variant.SCVAMP2_MISMATCHED:
                rw_msg = GaussianMessage(y, spec.noise_variance)
                alpha_a_raw = np.nan
            else:
                ext_w, post_a = likelihood_step(to_observer, y, spec, epsilon)
                alpha_a_raw = post_a.variance / to_observer.variance
                if onsager:
                    rw_msg = ext_w
                else:
                    rw_msg = GaussianMessage(
                        post_a.mean, max(post_a.variance, _FORWARD_FLOOR)
                    )

            mse.append(float(np.mean((x_hat - truth.symbols) ** 2)))
            vxs.append(rx_msg.variance)
            vws.append(rw_msg.variance)
            alphas.append((alpha_c_raw, alpha_a_raw, alpha_b_raw))

            hard = hard_decision(x_hat)
            if (
                converged_at is None
                and prev_hard is not None
                and np.array_equal(hard, prev_hard)
                and not syndrome(code, (hard < 0).astype(np.uint8)).any()
            ):
                converged_at = t
            prev_hard = hard
            if early_stop and converged_at is not None:
                break
    except DivergenceError:
        diverged = True

    trace = IterationTrace(
        np.asarray(mse), np.asarray(vxs), np.asarray(vws),
        np.asarray(alphas).reshape(len(mse), 3),
    )
    hard = hard_decision(x_hat)
    hard_bits = (hard < 0).astype(np.uint8)
    if diverged:
        bit_errors = n
    else:
        bit_errors = int(np.count_nonzero(hard_bits != truth.codeword))
    return DecodeResult(hard_bits, bit_errors, converged_at, trace, diverged)


def run_scvamp3(y, scenario, outer_iters=20, bp_iters=20, **kwargs) -> DecodeResult:
    """Full three-stage receiver with Onsager correction everywhere."""
    return run_variant(Variant.SCVAMP3, y, scenario, outer_iters, bp_iters, **kwargs)


def run_scvamp2_mismatched(y, scenario, outer_iters=20, bp_iters=20, **kwargs) -> DecodeResult:
    """Two-stage baseline that treats the channel as linear (y = H x + z)."""
    return run_variant(Variant.SCVAMP2_MISMATCHED, y, scenario, outer_iters, bp_iters, **kwargs)


def run_no_onsager(y, scenario, outer_iters=20, bp_iters=20, **kwargs) -> DecodeResult:
    """Ablation: posteriors forwarded directly, no extrinsic subtraction."""
    return run_variant(Variant.NO_ONSAGER, y, scenario, outer_iters, bp_iters, **kwargs)


def run_llr_turbo(y, scenario, outer_iters=20, bp_iters=20, **kwargs) -> DecodeResult:
    """Ablation: classical LLR subtraction in the decoder stage."""
    return run_variant(Variant.LLR_TURBO, y, scenario, outer_iters, bp_iters, **kwargs)
