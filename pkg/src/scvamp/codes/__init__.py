"""Bundled rate-1/2 regular (3,6) LDPC codes in alist form.

Generated once with :mod:`scvamp.codegen` (4-cycle free, full rank) and
shipped as package data; user-supplied alist files are accepted everywhere a
builtin id is.
"""

from __future__ import annotations

from importlib import resources

from ..denoiser import LdpcCode, parse_alist

BUILTIN_CODES = {
    "r12-n128": "r12_n128.alist",
    "r12-n256": "r12_n256.alist",
    "r12-n512": "r12_n512.alist",
    "r12-n1056": "r12_n1056.alist",
    "r12-n2304": "r12_n2304.alist",
}


def builtin_code_ids():
    return sorted(BUILTIN_CODES)


def load_builtin(code_id) -> LdpcCode:
    if code_id not in BUILTIN_CODES:
        raise ValueError(f"unknown builtin code {code_id!r}; known: {builtin_code_ids()}")
    text = resources.files(__package__).joinpath(BUILTIN_CODES[code_id]).read_text("ascii")
    return parse_alist(text)
