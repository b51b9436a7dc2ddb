"""Compiled word-level kernels for GF(2)[x] arithmetic.

Polynomials are little-endian arrays of uint64 words: coefficient i lives in
word ``i // 64`` at bit ``i % 64``.  Accumulating kernels XOR into an output
array that the caller allocates and zeroes.

The 64x64 carryless word product is chosen inside the multiplication kernels
by a boolean ``hw`` flag: PCLMULQDQ when the host has it, otherwise the portable
shift-and-mask routine.
"""

import os

import numpy as np
from llvmlite import binding, ir
from numba import njit, types, uint64
from numba.core import cgutils
from numba.extending import intrinsic

__all__ = [
    "HAS_PCLMUL",
    "clmul64_hw",
    "clmul64_sw",
    "use_hardware",
    "default_threshold",
]


def _host_has_pclmul():
    if os.environ.get("ESE_PORTABLE_CLMUL"):
        return False
    try:
        return bool(binding.get_host_cpu_features().get("pclmul", False))
    except Exception:  # pragma: no cover - exotic llvmlite builds
        return False


HAS_PCLMUL = _host_has_pclmul()


@intrinsic
def _pclmulqdq(typingctx, a, b):
    sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        i64 = ir.IntType(64)
        v2 = ir.VectorType(i64, 2)
        fnty = ir.FunctionType(v2, [v2, v2, ir.IntType(8)])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "llvm.x86.pclmulqdq")
        zero = ir.Constant(ir.IntType(32), 0)
        one = ir.Constant(ir.IntType(32), 1)
        undef = ir.Constant(v2, ir.Undefined)
        va = builder.insert_element(undef, args[0], zero)
        vb = builder.insert_element(undef, args[1], zero)
        r = builder.call(fn, [va, vb, ir.Constant(ir.IntType(8), 0)])
        lo = builder.extract_element(r, zero)
        hi = builder.extract_element(r, one)
        return context.make_tuple(builder, signature.return_type, (lo, hi))

    return sig, codegen


@njit(inline="always", cache=True)
def clmul64_sw(a, b):
    # shift-and-mask: no data-dependent branches
    lo = a & (uint64(0) - (b & uint64(1)))
    hi = uint64(0)
    for i in range(1, 64):
        mask = uint64(0) - ((b >> uint64(i)) & uint64(1))
        lo ^= (a << uint64(i)) & mask
        hi ^= (a >> uint64(64 - i)) & mask
    return lo, hi


if HAS_PCLMUL:

    @njit(inline="always", cache=True)
    def clmul64_hw(a, b):
        return _pclmulqdq(a, b)

else:
    # never emit the instruction on hosts that lack it
    clmul64_hw = clmul64_sw


@njit(inline="always")
def _mulword(a, b, hw):
    if hw:
        return clmul64_hw(a, b)
    return clmul64_sw(a, b)


def use_hardware():
    """Default for the ``hw`` flag of the multiplication kernels."""
    return HAS_PCLMUL


def default_threshold():
    """Karatsuba cutoff in words, measured on the benchmark host."""
    return 48 if HAS_PCLMUL else 8


# -- bit movement -----------------------------------------------------------


@njit(nogil=True, cache=True)
def shl_xor_into(dst, src, shift):
    """dst ^= src * x**shift, dropping words past the end of dst."""
    ws = shift >> 6
    bs = shift & 63
    n = dst.size
    if bs == 0:
        for i in range(src.size):
            k = ws + i
            if k >= n:
                break
            dst[k] ^= src[i]
    else:
        left = uint64(bs)
        right = uint64(64 - bs)
        for i in range(src.size):
            v = src[i]
            k = ws + i
            if k >= n:
                break
            dst[k] ^= v << left
            if k + 1 < n:
                dst[k + 1] ^= v >> right


@njit(nogil=True, cache=True)
def xor_into_at(dst, src, word_offset):
    n = min(src.size, dst.size - word_offset)
    for i in range(n):
        dst[word_offset + i] ^= src[i]


@njit(nogil=True, cache=True)
def extract_bits(src, start, nbits, dst):
    """dst <- bits [start, start + nbits) of src, zero above nbits."""
    ws = start >> 6
    bs = start & 63
    nw = (nbits + 63) >> 6
    ns = src.size
    for i in range(nw):
        k = ws + i
        v = uint64(0)
        if k < ns:
            v = src[k] >> uint64(bs)
            if bs and k + 1 < ns:
                v |= src[k + 1] << uint64(64 - bs)
        dst[i] = v
    rem = nbits & 63
    if rem and nw > 0:
        dst[nw - 1] &= (uint64(1) << uint64(rem)) - uint64(1)
    for i in range(nw, dst.size):
        dst[i] = 0


@njit(nogil=True, cache=True)
def clear_bits(buf, lo, hi):
    """Zero bits [lo, hi) of buf."""
    if hi <= lo:
        return
    wl = lo >> 6
    wh = (hi - 1) >> 6
    lmask = ~((uint64(1) << uint64(lo & 63)) - uint64(1))
    top = hi & 63
    hmask = ((uint64(1) << uint64(top)) - uint64(1)) if top else ~uint64(0)
    if wl == wh:
        buf[wl] &= ~(lmask & hmask)
        return
    buf[wl] &= ~lmask
    for i in range(wl + 1, wh):
        buf[i] = 0
    buf[wh] &= ~hmask


@njit(nogil=True, cache=True)
def top_bit(words):
    """Index of the highest set bit, or -1 for an all-zero array."""
    for i in range(words.size - 1, -1, -1):
        w = words[i]
        if w:
            b = 63
            while not (w >> uint64(b)) & uint64(1):
                b -= 1
            return i * 64 + b
    return -1


@njit(inline="always")
def _spread32(x):
    x = (x | (x << uint64(16))) & uint64(0x0000FFFF0000FFFF)
    x = (x | (x << uint64(8))) & uint64(0x00FF00FF00FF00FF)
    x = (x | (x << uint64(4))) & uint64(0x0F0F0F0F0F0F0F0F)
    x = (x | (x << uint64(2))) & uint64(0x3333333333333333)
    x = (x | (x << uint64(1))) & uint64(0x5555555555555555)
    return x


@njit(nogil=True, cache=True)
def square_into(a, out):
    """out <- a**2 (out has at least 2 * a.size words; it is overwritten)."""
    lo32 = uint64(0xFFFFFFFF)
    for i in range(a.size):
        w = a[i]
        out[2 * i] = _spread32(w & lo32)
        out[2 * i + 1] = _spread32(w >> uint64(32))
    for i in range(2 * a.size, out.size):
        out[i] = 0


# -- multiplication ---------------------------------------------------------


@njit(nogil=True, cache=True)
def school_into(a, b, out, hw):
    """out ^= a * b by the quadratic word loop; out needs a.size + b.size words."""
    lb = b.size
    for i in range(a.size):
        ai = a[i]
        if ai == 0:
            continue
        for j in range(lb):
            lo, hi = _mulword(ai, b[j], hw)
            out[i + j] ^= lo
            out[i + j + 1] ^= hi


@njit(nogil=True, cache=True)
def kara_into(a, b, out, hw, threshold):
    """out ^= a * b for equal-length operands (Karatsuba over the word loop)."""
    size = a.size
    if size <= threshold:
        school_into(a, b, out, hw)
        return
    m = (size + 1) // 2
    h = size - m
    a0 = a[:m]
    a1 = a[m:]
    b0 = b[:m]
    b1 = b[m:]
    z0 = np.zeros(2 * m, np.uint64)
    kara_into(a0, b0, z0, hw, threshold)
    z2 = np.zeros(2 * h, np.uint64)
    kara_into(a1, b1, z2, hw, threshold)
    sa = a0.copy()
    sb = b0.copy()
    for i in range(h):
        sa[i] ^= a1[i]
        sb[i] ^= b1[i]
    z1 = np.zeros(2 * m, np.uint64)
    kara_into(sa, sb, z1, hw, threshold)
    for i in range(2 * m):
        z1[i] ^= z0[i]
    for i in range(2 * h):
        z1[i] ^= z2[i]
    for i in range(2 * m):
        out[i] ^= z0[i]
    for i in range(2 * m):
        out[m + i] ^= z1[i]
    for i in range(2 * h):
        out[2 * m + i] ^= z2[i]


@njit(nogil=True, cache=True)
def mul_balanced(a, b, hw, threshold):
    """Product of two word arrays, zero-extending the shorter to equal length."""
    size = max(a.size, b.size)
    out = np.zeros(2 * size, np.uint64)
    if a.size == 0 or b.size == 0:
        return out[: a.size + b.size]
    # always recurse on fresh writable arrays: one specialisation of the
    # recursive kernel keeps numba's on-disk cache loadable
    pa = np.zeros(size, np.uint64)
    pb = np.zeros(size, np.uint64)
    pa[: a.size] = a
    pb[: b.size] = b
    kara_into(pa, pb, out, hw, threshold)
    return out[: a.size + b.size]


@njit(nogil=True, cache=True)
def blocks_into(p, pbits, q, block_bits, i0, i1, out, base_bit, hw, threshold):
    """XOR the products p_i * q * x**(i * block_bits), i in [i0, i1), into out.

    out holds bit ``base_bit`` (a multiple of 64) at position 0.  q has exactly
    ceil(block_bits / 64) words so every block product is balanced; it must
    be writable (see mul_balanced).
    """
    nb = q.size
    blk = np.zeros(nb + 1, np.uint64)
    prod = np.zeros(2 * nb, np.uint64)
    for i in range(i0, i1):
        start = i * block_bits
        width = min(block_bits, pbits - start)
        if width <= 0:
            break
        extract_bits(p, start, width, blk)
        nonzero = False
        for j in range(nb):
            if blk[j]:
                nonzero = True
                break
        if not nonzero:
            continue
        prod[:] = 0
        kara_into(blk[:nb], q, prod, hw, threshold)
        shl_xor_into(out, prod, start - base_bit)


# -- reduction ----------------------------------------------------------------


@njit(nogil=True, cache=True)
def fold_reduce(buf, top, n, shifts, tmp):
    """Reduce buf (bits below ``top`` possibly set) modulo a sparse modulus.

    ``shifts`` holds n - e for every non-leading exponent e.  Bits are folded
    top-down in spans no wider than the smallest shift, so each position at
    or above n is visited exactly once.  tmp needs ceil(min span / 64) + 1
    words.
    """
    smin = shifts[0]
    for s in shifts:
        if s < smin:
            smin = s
    while top > n:
        width = min(top - n, smin)
        lo = top - width
        extract_bits(buf, lo, width, tmp)
        clear_bits(buf, lo, top)
        nonzero = False
        for i in range(tmp.size):
            if tmp[i]:
                nonzero = True
                break
        if nonzero:
            for s in shifts:
                shl_xor_into(buf, tmp, lo - s)
        top = lo


@njit(nogil=True, cache=True)
def shl_xor_tail(dst, src, shift):
    """Like shl_xor_into, but leave the first target word alone.

    Returns the value that would have been XORed into word ``shift >> 6``.
    Workers writing adjacent word ranges share exactly that word, so the
    caller merges it afterwards and no two threads store to the same word.
    """
    ws = shift >> 6
    bs = shift & 63
    n = dst.size
    first = uint64(0)
    if src.size == 0:
        return first
    if bs == 0:
        first = src[0]
        for i in range(1, src.size):
            k = ws + i
            if k >= n:
                break
            dst[k] ^= src[i]
        return first
    left = uint64(bs)
    right = uint64(64 - bs)
    first = src[0] << left
    for i in range(src.size):
        v = src[i]
        k = ws + i
        if i > 0 and k < n:
            dst[k] ^= v << left
        if k + 1 < n:
            dst[k + 1] ^= v >> right
    return first


@njit(nogil=True, cache=True)
def sqr_mod_repeat(h, count, n, shifts):
    """h <- h**(2**count) mod f, for sparse f given by its fold shifts."""
    nw = h.size
    sq = np.zeros(2 * nw + 1, np.uint64)
    smin = shifts[0]
    for s in shifts:
        if s < smin:
            smin = s
    tmp = np.zeros(((min(n, smin) + 63) >> 6) + 1, np.uint64)
    for _ in range(count):
        square_into(h, sq)
        fold_reduce(sq, 2 * n - 1, n, shifts, tmp)
        for i in range(nw):
            h[i] = sq[i]
    return h


# -- small-factor sieve -------------------------------------------------------


@njit(nogil=True, cache=True)
def x_power_cycle(g, deg, out):
    """out[i] <- x**i mod g until the cycle closes; returns the order of x.

    g (degree ``deg``, constant term 1) is given in bit form.
    """
    top = np.int64(1) << deg
    v = np.int64(1)
    i = 0
    while True:
        out[i] = v
        i += 1
        v <<= 1
        if v & top:
            v ^= g
        if v == 1:
            return i


@njit(nogil=True, cache=True)
def has_small_factor(exps, degs, orders, offsets, table, max_deg):
    """True if some tabulated g with deg g <= max_deg divides sum x**e."""
    for j in range(degs.size):
        if degs[j] > max_deg:
            break
        o = orders[j]
        base = offsets[j]
        v = 0
        for e in exps:
            v ^= table[base + e % o]
        if v == 0:
            return True
    return False
