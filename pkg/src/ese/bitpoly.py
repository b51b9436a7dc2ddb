"""Bit-packed polynomials over GF(2).

A :class:`BitPolynomial` is an immutable array of 64-bit words plus a declared
capacity ``bit_len``.  Coefficient ``i`` is bit ``i % 64`` of word ``i // 64``,
and the byte mapping is the same little-endian order: byte ``b`` bit ``j`` is
coefficient ``8*b + j``.  That byte mapping is also the on-disk convention of
the ciphertext container.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .errors import LengthError

__all__ = [
    "BitPolynomial",
    "poly_from_bytes",
    "poly_to_bytes",
    "add",
    "shift_left",
    "mul_base",
]

WORD_BITS = 64


def _nwords(bits: int) -> int:
    return (bits + WORD_BITS - 1) // WORD_BITS


def _top_mask(bit_len: int) -> np.uint64:
    rem = bit_len % WORD_BITS
    return np.uint64((1 << rem) - 1) if rem else np.uint64(0xFFFFFFFFFFFFFFFF)


class BitPolynomial:
    """Immutable element of GF(2)[x] with a fixed bit capacity.

    ``degree`` is the index of the highest set coefficient, or ``None`` for
    the zero polynomial.  Equality compares coefficients only, so two values
    with different capacities but the same bits are equal.
    """

    __slots__ = ("_words", "_bit_len", "_degree")

    def __init__(self, words, bit_len: int):
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim != 1:
            raise ValueError("words must be one-dimensional")
        if bit_len < 0:
            raise ValueError("bit_len must be non-negative")
        need = _nwords(bit_len)
        if words.size != need:
            if words.size > need and not words[need:].any():
                words = words[:need]
            else:
                raise ValueError(f"{words.size} words given for bit_len {bit_len}")
        if need and words[-1] & ~_top_mask(bit_len):
            raise ValueError("bits set at or above bit_len")
        self._init(words, bit_len)

    def _init(self, words, bit_len):
        if words.flags.writeable:
            words = words.copy() if words.base is not None else words
            words.flags.writeable = False
        self._words = words
        self._bit_len = bit_len
        self._degree = -2  # not computed yet

    @classmethod
    def _wrap(cls, words: np.ndarray, bit_len: int) -> "BitPolynomial":
        # trusted constructor: words already sized and masked
        obj = cls.__new__(cls)
        obj._init(words, bit_len)
        return obj

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, bit_len: int = 0) -> "BitPolynomial":
        return cls._wrap(np.zeros(_nwords(bit_len), np.uint64), bit_len)

    @classmethod
    def from_int(cls, value: int, bit_len: int | None = None) -> "BitPolynomial":
        """Build from the integer whose bit i is the coefficient of x**i."""
        if value < 0:
            raise ValueError("negative integers have no polynomial form")
        if bit_len is None:
            bit_len = max(value.bit_length(), 1)
        if value.bit_length() > bit_len:
            raise LengthError(f"value needs {value.bit_length()} bits, capacity is {bit_len}")
        raw = value.to_bytes(_nwords(bit_len) * 8, "little")
        return cls._wrap(np.frombuffer(raw, dtype="<u8").astype(np.uint64), bit_len)

    @classmethod
    def from_exponents(cls, exponents, bit_len: int | None = None) -> "BitPolynomial":
        exps = list(exponents)
        if bit_len is None:
            bit_len = max(exps) + 1 if exps else 1
        words = np.zeros(_nwords(bit_len), np.uint64)
        for e in exps:
            if not 0 <= e < bit_len:
                raise LengthError(f"exponent {e} outside capacity {bit_len}")
            words[e // 64] ^= np.uint64(1 << (e % 64))
        return cls._wrap(words, bit_len)

    # -- views --------------------------------------------------------------

    @property
    def words(self) -> np.ndarray:
        """Read-only word array (length ceil(bit_len / 64))."""
        return self._words

    @property
    def bit_len(self) -> int:
        return self._bit_len

    @property
    def degree(self) -> int | None:
        if self._degree == -2:
            d = int(K.top_bit(self._words)) if self._words.size else -1
            self._degree = None if d < 0 else d
        return self._degree

    def is_zero(self) -> bool:
        return self.degree is None

    def to_int(self) -> int:
        return int.from_bytes(self._words.astype("<u8").tobytes(), "little")

    def exponents(self) -> list[int]:
        """Exponents of the nonzero terms, highest first."""
        value = self.to_int()
        out = []
        while value:
            e = value.bit_length() - 1
            out.append(e)
            value ^= 1 << e
        return out

    def coefficient(self, i: int) -> int:
        if i < 0 or i >= self._bit_len:
            return 0
        return int(self._words[i // 64] >> np.uint64(i % 64)) & 1

    def truncate(self, bit_len: int) -> "BitPolynomial":
        """Keep only the coefficients below ``bit_len``."""
        if bit_len >= self._bit_len:
            return self
        words = self._words[: _nwords(bit_len)].copy()
        if words.size:
            words[-1] &= _top_mask(bit_len)
        return BitPolynomial._wrap(words, bit_len)

    def resized(self, bit_len: int) -> "BitPolynomial":
        """Same value with a different capacity (must still fit)."""
        deg = self.degree
        if deg is not None and deg >= bit_len:
            raise LengthError(f"degree {deg} does not fit in {bit_len} bits")
        words = np.zeros(_nwords(bit_len), np.uint64)
        n = min(words.size, self._words.size)
        words[:n] = self._words[:n]
        return BitPolynomial._wrap(words, bit_len)

    # -- operators ----------------------------------------------------------

    def __xor__(self, other: "BitPolynomial") -> "BitPolynomial":
        return add(self, other)

    __add__ = __xor__

    def __lshift__(self, s: int) -> "BitPolynomial":
        return shift_left(self, s)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitPolynomial):
            return NotImplemented
        if self.degree != other.degree:
            return False
        if self.degree is None:
            return True
        n = self.degree // 64 + 1
        return bool(np.array_equal(self._words[:n], other._words[:n]))

    def __hash__(self) -> int:
        if self.degree is None:
            return hash((None,))
        return hash(self._words[: self.degree // 64 + 1].tobytes())

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __repr__(self) -> str:
        if self.degree is None:
            return f"BitPolynomial(0, bit_len={self._bit_len})"
        if self.degree < 64:
            return f"BitPolynomial({_terms(self.exponents())}, bit_len={self._bit_len})"
        return f"BitPolynomial(degree={self.degree}, bit_len={self._bit_len})"


def _terms(exps) -> str:
    parts = []
    for e in exps:
        parts.append("1" if e == 0 else "x" if e == 1 else f"x^{e}")
    return " + ".join(parts) or "0"


def poly_from_bytes(data, bit_len: int | None = None) -> BitPolynomial:
    """Interpret ``data`` as coefficients (byte b, bit j -> x**(8b + j)).

    Bits at or above ``bit_len`` in the last byte are ignored.
    """
    data = bytes(data) if not isinstance(data, (bytes, bytearray, memoryview)) else data
    avail = 8 * len(data)
    if bit_len is None:
        bit_len = avail
    if bit_len > avail:
        raise LengthError(f"bit_len {bit_len} exceeds the {avail} bits supplied")
    nw = _nwords(bit_len)
    nbytes = (bit_len + 7) // 8
    buf = bytearray(nw * 8)
    buf[:nbytes] = memoryview(data)[:nbytes]
    words = np.frombuffer(bytes(buf), dtype="<u8").astype(np.uint64)
    if nw:
        words[-1] &= _top_mask(bit_len)
    return BitPolynomial._wrap(words, bit_len)


def poly_to_bytes(p: BitPolynomial) -> bytes:
    """Inverse of :func:`poly_from_bytes`: ceil(bit_len / 8) bytes."""
    return p.words.astype("<u8").tobytes()[: (p.bit_len + 7) // 8]


def add(a: BitPolynomial, b: BitPolynomial) -> BitPolynomial:
    """Coefficient-wise XOR; capacity is the larger of the two."""
    if a.bit_len < b.bit_len:
        a, b = b, a
    words = a.words.copy()
    words[: b.words.size] ^= b.words
    return BitPolynomial._wrap(words, a.bit_len)


def shift_left(a: BitPolynomial, s: int) -> BitPolynomial:
    """a * x**s, growing the capacity by s."""
    if s < 0:
        raise ValueError("shift must be non-negative")
    bit_len = a.bit_len + s
    words = np.zeros(_nwords(bit_len), np.uint64)
    K.shl_xor_into(words, a.words, s)
    return BitPolynomial._wrap(words, bit_len)


def product_capacity(a_bits: int, b_bits: int) -> int:
    return a_bits + b_bits - 1 if a_bits and b_bits else 0


def mul_base(a: BitPolynomial, b: BitPolynomial, *, hw: bool | None = None,
             threshold: int | None = None) -> BitPolynomial:
    """Exact carryless product for balanced, in-core operands.

    Karatsuba over a quadratic word loop.  Operands of different lengths are
    zero-extended to a common length, so this is the right tool only when the
    two are of similar size; use :func:`ese.unbalanced.simplemult` otherwise.
    ``hw=False`` forces the portable word product.
    """
    bit_len = product_capacity(a.bit_len, b.bit_len)
    if a.is_zero() or b.is_zero():
        return BitPolynomial.zero(bit_len)
    hw = K.use_hardware() if hw is None else hw
    threshold = threshold or K.default_threshold()
    out = K.mul_balanced(a.words, b.words, hw, threshold)
    words = np.ascontiguousarray(out[: _nwords(bit_len)])
    return BitPolynomial._wrap(words, bit_len)
