"""Key sizing, key expansion and chunk planning.

A message of n bits whose collision entropy is at least t bits can be
encrypted with a key of ``n - t + 2*eps_exp`` bits, where the security
parameter is eps = 2**-eps_exp.  The key k is expanded to an n-bit pad by
multiplying it with a public random string X in GF(2^N), N >= n, and the
ciphertext is the message XOR the first n bits of that pad.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

from .bitpoly import BitPolynomial, poly_from_bytes
from .errors import (
    DegenerateKeyError,
    InvalidEstimateError,
    LengthError,
    ParameterError,
)
from .modred import SparseIrreducible, reduce, reduce_parallel
from .unbalanced import simplemult, simplemult_parallel

__all__ = [
    "DEFAULT_EPS_EXP",
    "SEED_BYTES",
    "EseParams",
    "ChunkPlan",
    "PhaseTimes",
    "OtpFallbackWarning",
    "key_length",
    "ese_params",
    "expand_key",
    "encrypt_chunk",
    "plan_chunks",
    "plan_for_key_budget",
    "generate_public_string",
    "key_consumption_rate",
    "MB",
    "MiB",
]

DEFAULT_EPS_EXP = 128
SEED_BYTES = 32
MB = 10**6  # rates and key sizes are reported in decimal megabytes
MiB = 1 << 20  # chunk sizes are given in binary units


class OtpFallbackWarning(UserWarning):
    """The entropy bound is too weak for a key shorter than the message."""


@dataclass(frozen=True)
class EseParams:
    """Message bits n, entropy bound t, eps = 2**-eps_exp and key bits ell."""

    n: int
    t: int
    eps_exp: int
    ell: int

    @property
    def otp(self) -> bool:
        """True when the key is as long as the message (plain one-time pad)."""
        return self.ell >= self.n

    @property
    def key_bytes(self) -> int:
        return (self.ell + 7) // 8


def _check_eps(eps_exp: int) -> None:
    if eps_exp < 1:
        raise ParameterError(f"eps_exp must be a positive integer, got {eps_exp}")


def key_length(n: int, t: int | float, eps_exp: int = DEFAULT_EPS_EXP) -> int:
    """Key bits for an n-bit message with collision entropy >= t bits.

    n - t + 2*eps_exp, never more than n (a one-time pad is always enough).
    Fractional t is rounded down, which can only lengthen the key.
    """
    _check_eps(eps_exp)
    if n < 0:
        raise ParameterError("message length must be non-negative")
    if t > n:
        raise InvalidEstimateError(
            f"entropy bound t={t} exceeds message length n={n}; "
            "the estimate is inconsistent (use a one-time pad for this file)"
        )
    if t < 0:
        raise InvalidEstimateError(f"entropy bound t={t} is negative")
    ell = n - math.floor(t) + 2 * eps_exp
    return min(ell, n)


def ese_params(n: int, t: int | float, eps_exp: int = DEFAULT_EPS_EXP) -> EseParams:
    ell = key_length(n, t, eps_exp)
    return EseParams(n=n, t=math.floor(t), eps_exp=eps_exp, ell=ell)


@dataclass
class PhaseTimes:
    """Wall-clock seconds spent per stage, accumulated over chunks."""

    mult: float = 0.0
    red: float = 0.0
    xor: float = 0.0
    other: float = 0.0

    @property
    def total(self) -> float:
        return self.mult + self.red + self.xor + self.other

    def __iadd__(self, other: "PhaseTimes") -> "PhaseTimes":
        self.mult += other.mult
        self.red += other.red
        self.xor += other.xor
        self.other += other.other
        return self


def expand_key(k: BitPolynomial, X: BitPolynomial, f: SparseIrreducible, *,
               workers: int = 1, times: PhaseTimes | None = None) -> BitPolynomial:
    """The pad (X * k) mod f, of deg f bits.  Linear in k over XOR."""
    n = f.degree
    if X.bit_len != n:
        raise ParameterError(f"public string has {X.bit_len} bits, modulus degree is {n}")
    if k.is_zero():
        raise DegenerateKeyError("key is zero; it would expand to a zero pad")
    if k.degree >= n:
        raise LengthError(f"key of degree {k.degree} is not a field element mod degree {n}")
    t0 = time.perf_counter()
    if workers > 1:
        prod = simplemult_parallel(X, k, workers)
    else:
        prod = simplemult(X, k)
    t1 = time.perf_counter()
    pad = reduce_parallel(prod, f, workers) if workers > 1 else reduce(prod, f)
    t2 = time.perf_counter()
    if times is not None:
        times.mult += t1 - t0
        times.red += t2 - t1
    return pad


def encrypt_chunk(m: BitPolynomial, k: BitPolynomial, X: BitPolynomial, f: SparseIrreducible,
                  *, workers: int = 1, times: PhaseTimes | None = None) -> BitPolynomial:
    """m XOR the first |m| bits of the expanded key.  Decryption is the same call."""
    if m.bit_len > f.degree:
        raise LengthError(f"message of {m.bit_len} bits exceeds field degree {f.degree}")
    pad = expand_key(k, X, f, workers=workers, times=times)
    t0 = time.perf_counter()
    c = m ^ pad.truncate(m.bit_len)
    if times is not None:
        times.xor += time.perf_counter() - t0
    return c


@dataclass(frozen=True)
class ChunkPlan:
    """Per-chunk parameters for one file; chunk boundaries are byte aligned."""

    chunk_size_bits: int
    per_chunk_params: tuple[EseParams, ...] = field(default_factory=tuple)

    @property
    def chunk_count(self) -> int:
        return len(self.per_chunk_params)

    @property
    def total_bits(self) -> int:
        return sum(p.n for p in self.per_chunk_params)

    @property
    def total_key_bits(self) -> int:
        return sum(p.ell for p in self.per_chunk_params)

    @property
    def total_key_bytes(self) -> int:
        """Key material actually sliced: each chunk's key rounded up to bytes."""
        return sum(p.key_bytes for p in self.per_chunk_params)

    @property
    def otp_chunks(self) -> int:
        return sum(p.otp for p in self.per_chunk_params)


def _chunk_lengths(file_bits: int, chunk_bits: int) -> list[int]:
    if chunk_bits <= 0:
        raise ParameterError("chunk size must be positive")
    full, rest = divmod(file_bits, chunk_bits)
    return [chunk_bits] * full + ([rest] if rest else [])


def _ratio(x) -> Fraction:
    """Exact value of a ratio; floats are taken at their shortest decimal form."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def plan_chunks(file_bits: int, chunk_bits: int, entropy_ratio, data_ratio=1.0,
                eps_exp: int = DEFAULT_EPS_EXP, *, warn: bool = True) -> ChunkPlan:
    """Split a file into chunks and size every chunk's key.

    ``entropy_ratio / data_ratio`` is the fraction of each chunk credited as
    entropy: t = floor(n * entropy_ratio / data_ratio).  With compression
    ratios, data_ratio is the ratio of the stored format and entropy_ratio
    the estimate for the best available compressor.
    """
    _check_eps(eps_exp)
    er, dr = _ratio(entropy_ratio), _ratio(data_ratio)
    if not 0 < er:
        raise InvalidEstimateError(f"entropy ratio must be positive, got {entropy_ratio}")
    if er > dr or dr > 1:
        raise InvalidEstimateError(
            f"need 0 < entropy_ratio <= data_ratio <= 1, got {entropy_ratio} and {data_ratio}"
        )
    if chunk_bits < 2 * eps_exp:
        raise ParameterError(f"chunk of {chunk_bits} bits is below the {2 * eps_exp}-bit key floor")
    frac = er / dr
    params = tuple(ese_params(n, math.floor(n * frac), eps_exp)
                   for n in _chunk_lengths(file_bits, chunk_bits))
    plan = ChunkPlan(chunk_bits, params)
    if warn and plan.otp_chunks:
        warnings.warn(
            f"{plan.otp_chunks} chunk(s) get no key saving and are encrypted as a one-time pad",
            OtpFallbackWarning,
            stacklevel=2,
        )
    return plan


def plan_for_key_budget(file_bits: int, chunk_bits: int, key_bits: int,
                        eps_exp: int = DEFAULT_EPS_EXP, *, warn: bool = True) -> ChunkPlan:
    """Plan that spends about ``key_bits`` of key on the whole file.

    The entropy fraction is chosen so that the per-chunk keys sum to
    key_bits; rounding each chunk's t down adds at most one bit per chunk.
    """
    _check_eps(eps_exp)
    if file_bits == 0:
        return ChunkPlan(chunk_bits, ())
    count = len(_chunk_lengths(file_bits, chunk_bits))
    floor_bits = 2 * eps_exp * count
    if key_bits < floor_bits:
        raise ParameterError(
            f"a key budget of {key_bits} bits is below the {floor_bits}-bit floor "
            f"for {count} chunk(s)"
        )
    frac = max(Fraction(0), 1 - Fraction(key_bits - floor_bits, file_bits))
    if frac == 0:
        params = tuple(ese_params(n, 0, eps_exp) for n in _chunk_lengths(file_bits, chunk_bits))
        return ChunkPlan(chunk_bits, params)
    return plan_chunks(file_bits, chunk_bits, frac, 1, eps_exp, warn=warn)


def generate_public_string(mode: str, seed: bytes | None, n: int) -> BitPolynomial:
    """n-bit public random string.

    ``mode="seed"``: SHAKE256 output for the 32-byte seed, so the same seed
    always gives the same string.  ``mode="embedded"``: fresh bytes from the
    operating system, to be stored alongside the ciphertext.
    """
    if n < 1:
        raise ParameterError("public string needs at least one bit")
    nbytes = (n + 7) // 8
    if mode == "seed":
        if seed is None or len(seed) != SEED_BYTES:
            raise ParameterError(f"seed mode needs a {SEED_BYTES}-byte seed")
        data = hashlib.shake_256(bytes(seed)).digest(nbytes)
    elif mode == "embedded":
        data = os.urandom(nbytes)
    else:
        raise ParameterError(f"unknown public-string mode {mode!r}")
    return poly_from_bytes(data, n)


def key_consumption_rate(enc_rate: float, key_bits: float, msg_bits: float) -> float:
    """Key used per unit time while encrypting at enc_rate (same unit as enc_rate)."""
    if msg_bits <= 0:
        raise ParameterError("message length must be positive")
    return enc_rate * key_bits / msg_bits
