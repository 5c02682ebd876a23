"""Forward-model simulation: channel matrices, BPSK, nonlinear transmission.

One 64-bit master seed fully determines a trial.  Named sub-streams ("H",
"bits", "noise") are derived from it with independent spawn keys, so ablation
variants can share exactly the same channel realization while the algorithm
under test changes, and trials with disjoint seeds are independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import MixingMatrix, precompute
from .denoiser import LdpcCode, encode
from .likelihood import ChannelSpec

_STREAMS = {"H": 0, "bits": 1, "noise": 2}


def substream(seed, name):
    """Generator for one named purpose, deterministically derived from the seed."""
    if name not in _STREAMS:
        raise ValueError(f"unknown stream {name!r}; known: {sorted(_STREAMS)}")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(_STREAMS[name],)))


@dataclass(frozen=True)
class TrialScenario:
    """Everything one Monte Carlo trial depends on: code, matrix, channel, seed."""

    code: LdpcCode
    h: MixingMatrix
    spec: ChannelSpec
    seed: int

    def __post_init__(self):
        if self.h.n != self.code.n:
            raise ValueError(
                f"matrix has {self.h.n} columns but the code length is {self.code.n}"
            )

    @property
    def snr(self):
        return 1.0 / self.spec.noise_variance


@dataclass(frozen=True)
class Realization:
    """The drawn transmit side of one trial (shared across algorithm variants)."""

    info_bits: np.ndarray
    codeword: np.ndarray
    symbols: np.ndarray
    mixed: np.ndarray  # w = H x, kept for diagnostics
    y: np.ndarray


def gen_h_iid(m, n, rng) -> MixingMatrix:
    """Dense matrix with i.i.d. Gaussian entries of variance 1/m."""
    entries = rng.normal(0.0, 1.0 / np.sqrt(m), size=(int(m), int(n)))
    return precompute(entries)


def gen_h_blockdiag(block_size, repeats, rng) -> MixingMatrix:
    """Square matrix with one shared B x B Gaussian block repeated on the diagonal.

    The block entries have variance 1/B, so the per-symbol sub-channel does
    not depend on how many times the block is repeated.
    """
    b = int(block_size)
    r = int(repeats)
    if b < 1 or r < 1:
        raise ValueError("block size and repeat count must be at least 1")
    block = rng.normal(0.0, 1.0 / np.sqrt(b), size=(b, b))
    full = np.zeros((b * r, b * r))
    for i in range(r):
        sl = slice(i * b, (i + 1) * b)
        full[sl, sl] = block
    return precompute(full, block_size=b)


def bpsk(bits) -> np.ndarray:
    """Map bits to symbols with the convention bit 0 -> +1, bit 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def transmit(x, scenario: TrialScenario):
    """Push symbols through y = f(H x) + z; returns (y, w) with w = H x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (scenario.h.n,):
        raise ValueError(f"symbol vector has shape {x.shape}, expected ({scenario.h.n},)")
    w = scenario.h.entries @ x
    noise = substream(scenario.seed, "noise").normal(
        0.0, np.sqrt(scenario.spec.noise_variance), size=scenario.h.m
    )
    return scenario.spec.f(w) + noise, w


def realize(scenario: TrialScenario) -> Realization:
    """Draw the full transmit side of a trial from the scenario seed."""
    info = substream(scenario.seed, "bits").integers(0, 2, size=scenario.code.k, dtype=np.uint8)
    codeword = encode(scenario.code, info)
    x = bpsk(codeword)
    y, w = transmit(x, scenario)
    return Realization(info, codeword, x, w, y)


def save_matrix_text(path, h) -> None:
    """Dump a matrix in the debug text format: header 'M N', then row-major entries."""
    h = np.asarray(h, dtype=np.float64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{h.shape[0]} {h.shape[1]}\n")
        for row in h:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_matrix_text(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("matrix file must start with a 'M N' header line")
        m, n = int(header[0]), int(header[1])
        values = np.array(fh.read().split(), dtype=np.float64)
    if values.size != m * n:
        raise ValueError(f"matrix file body has {values.size} entries, expected {m * n}")
    return values.reshape(m, n)
