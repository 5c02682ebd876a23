"""Monte Carlo BER sweeps and MSE-convergence traces with CSV output.

Trials are indexed by (snr, seed).  Every variant run at a given (snr, seed)
consumes the identical channel realization, and each variant keeps drawing
seeds in order until it has collected ``min_errors`` errors or the seed cap
binds.  Work may be dispatched to a process pool in fixed-size seed blocks,
but results are always consumed strictly in seed order, so the output is
byte-identical at any worker count (results computed past a variant's
stopping seed are discarded).

CSV schemas (one header line, optional '#' metadata comments above it):

    ber mode:       snr_db,variant,code,n,k,h_mode,nonlinearity,frames,bits,
                    bit_errors,frame_errors,diverged,ber,fer,seed_base
    mse-trace mode: iteration,variant,mean_mse,median_mse,trials
"""

from __future__ import annotations

import multiprocessing
import os
import time
from dataclasses import dataclass

import numpy as np

from .channel import TrialScenario, gen_h_blockdiag, gen_h_iid, realize, substream
from .codes import load_builtin
from .denoiser import LdpcCode, load_alist
from .likelihood import ChannelSpec
from .runner import Variant, run_variant

_BLOCK_SIZE = 16  # fixed dispatch granularity, independent of worker count


@dataclass(frozen=True)
class SweepConfig:
    snr_db_list: tuple
    code: str  # "builtin:<id>" or a path to an alist file
    h_mode: str  # "iid:MxN" or "blockdiag:B"
    variants: tuple = (Variant.SCVAMP3,)
    nonlinearity: str = "id"
    outer_iters: int = 20
    bp_iters: int = 20
    min_errors: int = 500
    max_seeds: int = 2000
    master_seed: int = 0
    output_path: str | None = None
    workers: int = 1
    error_unit: str = "bit"
    quadrature_order: int = 50
    mse_trials: int = 50
    experiment: str = "ber"
    deterministic: bool = False
    capacity_db: float | None = None
    early_stop: bool = False

    def __post_init__(self):
        if not self.snr_db_list:
            raise ValueError("snr_db_list must not be empty")
        if self.min_errors < 1 or self.max_seeds < 1:
            raise ValueError("min_errors and max_seeds must be at least 1")
        if self.error_unit not in ("bit", "frame"):
            raise ValueError(f"error_unit must be 'bit' or 'frame', got {self.error_unit!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        object.__setattr__(
            self, "variants", tuple(Variant(v) for v in self.variants)
        )


@dataclass
class BerPoint:
    snr_db: float
    variant: Variant
    bit_errors: int = 0
    bits_simulated: int = 0
    frame_errors: int = 0
    frames: int = 0
    diverged_frames: int = 0

    @property
    def ber(self):
        return self.bit_errors / self.bits_simulated if self.bits_simulated else 0.0

    @property
    def fer(self):
        return self.frame_errors / self.frames if self.frames else 0.0


def parse_h_mode(text):
    """Parse 'iid:MxN' or 'blockdiag:B' into a structured tuple."""
    kind, _, rest = text.partition(":")
    if kind == "iid":
        m_txt, _, n_txt = rest.partition("x")
        try:
            return ("iid", int(m_txt), int(n_txt))
        except ValueError:
            raise ValueError(f"malformed iid mode {text!r}, expected iid:MxN")
    if kind == "blockdiag":
        try:
            return ("blockdiag", int(rest))
        except ValueError:
            raise ValueError(f"malformed blockdiag mode {text!r}, expected blockdiag:B")
    raise ValueError(f"unknown H mode {text!r}; use iid:MxN or blockdiag:B")


def load_code(spec_text):
    """Resolve a code reference to (code, label) from builtin ids or a path."""
    if spec_text.startswith("builtin:"):
        code_id = spec_text.split(":", 1)[1]
        return load_builtin(code_id), code_id
    code = load_alist(spec_text)
    return code, os.path.splitext(os.path.basename(spec_text))[0]


def build_scenario(code: LdpcCode, h_mode, snr_db, nonlinearity, quadrature_order, seed):
    """Scenario for one (snr, seed) trial; H is redrawn per seed from its sub-stream."""
    mode = parse_h_mode(h_mode) if isinstance(h_mode, str) else h_mode
    rng_h = substream(seed, "H")
    if mode[0] == "iid":
        _, m, n = mode
        if n != code.n:
            raise ValueError(f"H has {n} columns but the code length is {code.n}")
        mix = gen_h_iid(m, n, rng_h)
    else:
        _, block = mode
        if code.n % block != 0:
            raise ValueError(f"code length {code.n} is not divisible by block size {block}")
        mix = gen_h_blockdiag(block, code.n // block, rng_h)
    spec = ChannelSpec.from_snr_db(snr_db, nonlinearity, quadrature_order)
    return TrialScenario(code, mix, spec, int(seed))


# -- worker plumbing ---------------------------------------------------------

_POOL_STATE: dict = {}


def _pool_init(code, config):
    _POOL_STATE["code"] = code
    _POOL_STATE["config"] = config


def _seed_outcomes(code, config, snr_db, seed, variant_values):
    """(bit_errors, frame_error, diverged) per requested variant for one seed."""
    scenario = build_scenario(
        code, config.h_mode, snr_db, config.nonlinearity, config.quadrature_order, seed
    )
    truth = realize(scenario)
    out = {}
    for value in variant_values:
        res = run_variant(
            Variant(value), truth.y, scenario, config.outer_iters, config.bp_iters,
            early_stop=config.early_stop, truth=truth,
        )
        out[value] = (res.bit_errors, int(res.bit_errors > 0), int(res.diverged))
    return out


def _pool_task(args):
    snr_db, seed, variant_values = args
    return _seed_outcomes(_POOL_STATE["code"], _POOL_STATE["config"], snr_db, seed,
                          variant_values)


def _iterate_blocks(pool, code, config, snr_db, consume):
    """Dispatch seeds in fixed blocks; ``consume(seed, outcomes) -> still_active``.

    ``consume`` is called strictly in seed order and returns the variants that
    remain active; dispatching stops once none are.
    """
    active = list(config.variants)
    next_seed = 0
    while active and next_seed < config.max_seeds:
        block = range(next_seed, min(next_seed + _BLOCK_SIZE, config.max_seeds))
        values = tuple(v.value for v in active)
        tasks = [(snr_db, config.master_seed + s, values) for s in block]
        if pool is None:
            results = [_seed_outcomes(code, config, *task[:2], task[2]) for task in tasks]
        else:
            results = pool.map(_pool_task, tasks)
        for seed, outcomes in zip(block, results):
            active = consume(seed, outcomes)
            if not active:
                break
        next_seed = block.stop


def ber_sweep(config: SweepConfig):
    """Adaptive-seeding BER sweep; returns BerPoints and writes the CSV if asked."""
    code, code_label = load_code(config.code)
    pool = None
    try:
        if config.workers > 1:
            pool = multiprocessing.get_context().Pool(
                config.workers, initializer=_pool_init, initargs=(code, config)
            )
        points = []
        for snr_db in config.snr_db_list:
            tallies = {v: BerPoint(snr_db, v) for v in config.variants}

            def consume(seed, outcomes, tallies=tallies):
                still = []
                for variant in config.variants:
                    if variant.value not in outcomes:
                        continue
                    tally = tallies[variant]
                    metric = (
                        tally.bit_errors if config.error_unit == "bit" else tally.frame_errors
                    )
                    if metric >= config.min_errors:
                        continue  # stopped earlier in this block; discard
                    bits_err, frame_err, diverged = outcomes[variant.value]
                    tally.frames += 1
                    tally.bits_simulated += code.n
                    tally.bit_errors += bits_err
                    tally.frame_errors += frame_err
                    tally.diverged_frames += diverged
                    metric = (
                        tally.bit_errors if config.error_unit == "bit" else tally.frame_errors
                    )
                    if metric < config.min_errors:
                        still.append(variant)
                return still

            _iterate_blocks(pool, code, config, snr_db, consume)
            points.extend(tallies[v] for v in config.variants)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    if config.output_path:
        _write_ber_csv(config, code, code_label, points)
    return points


def mse_trace_experiment(config: SweepConfig):
    """Per-iteration mean/median MSE across a fixed trial count at one SNR.

    Iteration 0 is the initialization (zero estimate), whose MSE is exactly 1
    for BPSK.  Returns {variant: (mean_per_iter, median_per_iter)} and writes
    the CSV if an output path is configured.
    """
    if len(config.snr_db_list) != 1:
        raise ValueError("mse trace runs at exactly one SNR")
    snr_db = config.snr_db_list[0]
    code, _ = load_code(config.code)
    iters = config.outer_iters
    per_variant = {v: np.ones((config.mse_trials, iters + 1)) for v in config.variants}

    def one_seed(seed):
        scenario = build_scenario(
            code, config.h_mode, snr_db, config.nonlinearity, config.quadrature_order,
            config.master_seed + seed,
        )
        truth = realize(scenario)
        out = {}
        for variant in config.variants:
            res = run_variant(
                variant, truth.y, scenario, iters, config.bp_iters, truth=truth
            )
            out[variant] = res.trace.mse
        return out

    for seed in range(config.mse_trials):
        traces = one_seed(seed)
        for variant, mse in traces.items():
            # index 0 already holds the exact init MSE of 1; a trace cut short
            # by divergence keeps its last recorded value for the remaining rows
            per_variant[variant][seed, 1:1 + mse.shape[0]] = mse
            if mse.shape[0] and mse.shape[0] < iters:
                per_variant[variant][seed, 1 + mse.shape[0]:] = mse[-1]

    summary = {
        v: (np.mean(arr, axis=0), np.median(arr, axis=0)) for v, arr in per_variant.items()
    }
    if config.output_path:
        _write_mse_csv(config, summary)
    return summary


# -- CSV emission ------------------------------------------------------------

def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _metadata_lines(config):
    lines = []
    if not config.deterministic:
        lines.append(f"# generated {time.strftime('%Y-%m-%dT%H:%M:%S')}")
    if config.capacity_db is not None:
        lines.append(f"# capacity_db={config.capacity_db:g}")
    return lines


def _write_ber_csv(config, code, code_label, points):
    lines = _metadata_lines(config)
    lines.append(
        "snr_db,variant,code,n,k,h_mode,nonlinearity,frames,bits,bit_errors,"
        "frame_errors,diverged,ber,fer,seed_base"
    )
    for p in points:
        lines.append(
            f"{p.snr_db:g},{p.variant.value},{code_label},{code.n},{code.k},"
            f"{config.h_mode},{config.nonlinearity},{p.frames},{p.bits_simulated},"
            f"{p.bit_errors},{p.frame_errors},{p.diverged_frames},"
            f"{p.ber:.6e},{p.fer:.6e},{config.master_seed}"
        )
    _atomic_write(config.output_path, "\n".join(lines) + "\n")


def _write_mse_csv(config, summary):
    lines = _metadata_lines(config)
    lines.append("iteration,variant,mean_mse,median_mse,trials")
    for variant, (mean, median) in summary.items():
        for it in range(mean.shape[0]):
            lines.append(
                f"{it},{variant.value},{mean[it]:.10e},{median[it]:.10e},{config.mse_trials}"
            )
    _atomic_write(config.output_path, "\n".join(lines) + "\n")


def wilson_interval(errors, trials, z=1.96):
    """Wilson score interval for a binomial rate; (0, 1) bounds on no data."""
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1.0 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)
