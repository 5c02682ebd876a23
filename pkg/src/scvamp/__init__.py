"""Three-stage score-based VAMP receiver for LDPC-coded nonlinear channels.

The receiver factors inference on ``y = f(H x) + z`` into a linear coupling
stage (LMMSE over ``w = H x``), a nonlinear observation stage (Gauss-Hermite
posterior moments of ``w`` from ``y``), and an LDPC BP denoiser for the code
constraint, all exchanging Onsager-corrected mean-variance messages.
"""

from .channel import (
    Realization,
    TrialScenario,
    bpsk,
    gen_h_blockdiag,
    gen_h_iid,
    load_matrix_text,
    realize,
    save_matrix_text,
    substream,
    transmit,
)
from .codes import builtin_code_ids, load_builtin
from .coupling import MixingMatrix, coupling_posterior, coupling_step, precompute
from .denoiser import (
    LLR_MAX,
    AlistParseError,
    LdpcCode,
    LlrVector,
    bp_decode,
    denoiser_step,
    denoiser_step_llr_subtraction,
    encode,
    llr_from_pseudo,
    load_alist,
    parse_alist,
    serialize_alist,
    syndrome,
)
from .experiment import (
    BerPoint,
    SweepConfig,
    ber_sweep,
    build_scenario,
    load_code,
    mse_trace_experiment,
    wilson_interval,
)
from .likelihood import (
    ChannelSpec,
    QuadratureRule,
    gh_rule,
    likelihood_step,
    log_normalizer,
    scalar_moments,
)
from .messages import (
    DEFAULT_EPSILON,
    DivergenceError,
    GaussianMessage,
    PosteriorSummary,
    clip_alpha,
    combine,
    extrinsic,
)
from .runner import (
    DecodeResult,
    IterationTrace,
    Variant,
    hard_decision,
    run_llr_turbo,
    run_no_onsager,
    run_scvamp2_mismatched,
    run_scvamp3,
    run_variant,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
