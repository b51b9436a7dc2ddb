"""Block-wise multiplication of a long polynomial by a short one.

The long operand p is cut into blocks p_i of exactly ``1 + deg q`` bits, so

    p * q = sum_i  p_i * q * x**(i * (1 + deg q))

and every block product is a balanced multiplication of two operands the size
of q.  Neighbouring shifted products overlap by ``deg q`` bits, so they are
accumulated with XOR.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .bitpoly import BitPolynomial, _nwords, product_capacity
from .errors import DegenerateKeyError, ParameterError

__all__ = ["BlockView", "blocks", "simplemult", "simplemult_parallel"]


@dataclass(frozen=True)
class BlockView:
    """Block ``index`` of ``source``: bits [index*block_bits, (index+1)*block_bits)."""

    source: BitPolynomial
    index: int
    block_bits: int

    @property
    def start(self) -> int:
        return self.index * self.block_bits

    def poly(self) -> BitPolynomial:
        """The block as a polynomial of capacity block_bits (zero-padded at the end)."""
        out = np.zeros(_nwords(self.block_bits) + 1, np.uint64)
        width = max(0, min(self.block_bits, self.source.bit_len - self.start))
        K.extract_bits(self.source.words, self.start, width, out)
        return BitPolynomial._wrap(out[: _nwords(self.block_bits)].copy(), self.block_bits)


def block_count(p_bits: int, block_bits: int) -> int:
    return -(-p_bits // block_bits) if p_bits else 0


def blocks(p: BitPolynomial, q: BitPolynomial) -> list[BlockView]:
    """All blocks of p for the key q, in index order."""
    bb = _block_bits(q)
    return [BlockView(p, i, bb) for i in range(block_count(p.bit_len, bb))]


def _block_bits(q: BitPolynomial) -> int:
    if q.is_zero():
        raise DegenerateKeyError("multiplier is zero; a zero key would give a zero pad")
    return q.degree + 1


def _setup(p, q, hw, threshold):
    bb = _block_bits(q)
    qw = q.words[: _nwords(bb)].copy()
    hw = K.use_hardware() if hw is None else hw
    threshold = threshold or K.default_threshold()
    return bb, qw, hw, threshold


def simplemult(p: BitPolynomial, q: BitPolynomial, *, hw: bool | None = None,
               threshold: int | None = None) -> BitPolynomial:
    """Exact product p * q computed block by block (capacity |p| + |q| - 1)."""
    bb, qw, hw, threshold = _setup(p, q, hw, threshold)
    bit_len = product_capacity(p.bit_len, q.bit_len)
    out = np.zeros(_nwords(bit_len), np.uint64)
    if not p.is_zero():
        n = block_count(p.degree + 1, bb)
        K.blocks_into(p.words, p.bit_len, qw, bb, 0, n, out, 0, hw, threshold)
    return BitPolynomial._wrap(out, bit_len)


def _block_ranges(n: int, workers: int) -> list[tuple[int, int]]:
    step = -(-n // workers)
    return [(i, min(i + step, n)) for i in range(0, n, step)]


def simplemult_parallel(p: BitPolynomial, q: BitPolynomial, workers: int, *,
                        hw: bool | None = None, threshold: int | None = None) -> BitPolynomial:
    """Same product as :func:`simplemult`, with block ranges spread over threads.

    Each thread accumulates a contiguous range of blocks into its own
    word-aligned buffer; the buffers are XORed into the result afterwards.
    """
    if workers < 1:
        raise ParameterError("workers must be at least 1")
    bb, qw, hw, threshold = _setup(p, q, hw, threshold)
    bit_len = product_capacity(p.bit_len, q.bit_len)
    out = np.zeros(_nwords(bit_len), np.uint64)
    if p.is_zero():
        return BitPolynomial._wrap(out, bit_len)
    n = block_count(p.degree + 1, bb)
    ranges = _block_ranges(n, workers)
    if len(ranges) == 1:
        K.blocks_into(p.words, p.bit_len, qw, bb, 0, n, out, 0, hw, threshold)
        return BitPolynomial._wrap(out, bit_len)

    def run(rng):
        i0, i1 = rng
        base_word = (i0 * bb) >> 6
        end_bit = min(i1 * bb + bb - 1 + bb, bit_len)
        local = np.zeros(_nwords(end_bit) - base_word + 1, np.uint64)
        K.blocks_into(p.words, p.bit_len, qw, bb, i0, i1, local, base_word * 64, hw, threshold)
        return base_word, local

    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        parts = list(pool.map(run, ranges))
    for base_word, local in parts:
        K.xor_into_at(out, local, base_word)
    return BitPolynomial._wrap(out, bit_len)
