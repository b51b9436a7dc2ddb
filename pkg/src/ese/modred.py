"""Sparse irreducible moduli over GF(2) and reduction by folding.

Moduli are trinomials or pentanomials stored as descending exponent lists.
:func:`find_irreducible` searches for the sparsest modulus of an exact degree;
that search costs about ``n`` modular squarings per candidate and so is only
practical up to a few thousand bits.  For the very large field degrees needed
when whole file chunks are encrypted, :func:`modulus_at_least` instead builds a
modulus ``g(x**t)`` from a small primitive sparse ``g`` whose irreducibility
follows from the order of ``x`` modulo ``g``; its degree ``m*t`` is the
smallest member of that family not below the requested size.
"""

from __future__ import annotations

import fcntl
import math
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from sympy import factorint

from . import _kernels as K
from .bitpoly import BitPolynomial, _nwords
from .errors import ModulusSearchError, ParameterError

__all__ = [
    "SparseIrreducible",
    "find_irreducible",
    "is_irreducible",
    "modulus_at_least",
    "field_modulus",
    "reduce",
    "reduce_parallel",
    "ModulusCache",
    "DEFAULT_SEARCH_LIMIT",
]

# Exact-degree search is attempted automatically up to this degree.
DEFAULT_SEARCH_LIMIT = 4096
# Above this degree, moduli of the form g(x**t) are verified structurally.
_RABIN_LIMIT = 1 << 14
# Per-pass span below which reduce_parallel just runs the sequential fold.
_PARALLEL_MIN_BITS = 1 << 15


@dataclass(frozen=True)
class SparseIrreducible:
    """Modulus given by its exponents, highest first (degree first, 0 last)."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        object.__setattr__(self, "exponents", exps)
        if len(exps) < 2 or exps[-1] != 0 or exps[0] < 1:
            raise ParameterError(f"exponent list must run from the degree down to 0: {exps}")
        if any(a <= b for a, b in zip(exps, exps[1:])):
            raise ParameterError(f"exponents must be strictly descending: {exps}")
        if len(exps) % 2 == 0:
            raise ParameterError(f"even weight {len(exps)} is divisible by x+1: {exps}")

    @property
    def degree(self) -> int:
        return self.exponents[0]

    @property
    def weight(self) -> int:
        return len(self.exponents)

    @property
    def shifts(self) -> np.ndarray:
        """n - e for every non-leading exponent e (the fold distances)."""
        n = self.degree
        return np.array([n - e for e in self.exponents[1:]], dtype=np.int64)

    def to_poly(self) -> BitPolynomial:
        return BitPolynomial.from_exponents(self.exponents, self.degree + 1)

    def to_int(self) -> int:
        return sum(1 << e for e in self.exponents)

    def __str__(self) -> str:
        return " + ".join("1" if e == 0 else "x" if e == 1 else f"x^{e}" for e in self.exponents)


# -- small-degree helpers on Python ints (bit i = coefficient of x**i) --------


def _int_mod(a: int, f: int) -> int:
    df = f.bit_length()
    while a.bit_length() >= df:
        a ^= f << (a.bit_length() - df)
    return a


def _int_mulmod(a: int, b: int, f: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a.bit_length() == f.bit_length():
            a ^= f
    return out


def _int_powmod_x(e: int, f: int) -> int:
    """x**e mod f by square-and-multiply."""
    result, base = 1, _int_mod(2, f)
    while e:
        if e & 1:
            result = _int_mulmod(result, base, f)
        base = _int_mulmod(base, base, f)
        e >>= 1
    return result


def _int_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _int_mod(a, b)
    return a


@lru_cache(maxsize=None)
def _prime_factors(n: int) -> tuple[int, ...]:
    return tuple(sorted(factorint(n)))


# -- irreducibility ---------------------------------------------------------


def _exponents_of(f) -> tuple[int, ...]:
    if isinstance(f, SparseIrreducible):
        return f.exponents
    if isinstance(f, BitPolynomial):
        return tuple(f.exponents())
    if isinstance(f, int):
        return tuple(BitPolynomial.from_int(f).exponents())
    return tuple(sorted((int(e) for e in f), reverse=True))


def _rabin(exps: tuple[int, ...]) -> bool:
    # x**(2**n) = x mod f, and gcd(x**(2**(n/d)) - x, f) = 1 for primes d | n
    n = exps[0]
    shifts = np.array([n - e for e in exps[1:]], dtype=np.int64)
    h = np.zeros(_nwords(n), np.uint64)
    h[0] = 2
    checkpoints = sorted(n // d for d in _prime_factors(n))
    saved = []
    done = 0
    for k in checkpoints:
        K.sqr_mod_repeat(h, k - done, n, shifts)
        done = k
        saved.append(h.copy())
    K.sqr_mod_repeat(h, n - done, n, shifts)
    if h[0] != 2 or h[1:].any():
        return False
    f_int = sum(1 << e for e in exps)
    for s in saved:
        v = int.from_bytes(s.astype("<u8").tobytes(), "little") ^ 2
        if _int_gcd(f_int, v) != 1:
            return False
    return True


def _order_of_x(g: int, m: int) -> int:
    """Multiplicative order of x modulo the irreducible g of degree m."""
    order = (1 << m) - 1
    for p in _prime_factors(order):
        while order % p == 0 and _int_powmod_x(order // p, g) == 1:
            order //= p
    return order


def _lifted_irreducible(exps: tuple[int, ...], t: int) -> bool:
    # g(x**t) with g irreducible of degree m and order e is irreducible iff
    # every prime factor of t divides e and gcd(t, (2**m - 1) / e) = 1.
    base = tuple(e // t for e in exps)
    m = base[0]
    if not is_irreducible(base):
        return False
    e = _order_of_x(sum(1 << b for b in base), m)
    if any(e % p for p in _prime_factors(t)):
        return False
    return math.gcd(t, ((1 << m) - 1) // e) == 1


def is_irreducible(f) -> bool:
    """True iff f is irreducible over GF(2).

    f may be a :class:`SparseIrreducible`, a :class:`BitPolynomial`, an int
    in bit form, or an iterable of exponents.
    """
    exps = _exponents_of(f)
    if not exps or exps[0] < 1:
        raise ParameterError("irreducibility needs degree at least 1")
    n = exps[0]
    if n == 1:
        return True
    if exps[-1] != 0 or len(exps) % 2 == 0:
        return False  # divisible by x, or by x + 1
    t = math.gcd(*exps)
    if t > 1 and n > _RABIN_LIMIT and exps[0] // t <= 128:
        return _lifted_irreducible(exps, t)
    return _rabin(exps)


# -- exact-degree search ----------------------------------------------------


def _candidates(n: int):
    for a in range(1, n // 2 + 1):
        # x^n + x^a + 1 is irreducible iff its reciprocal x^n + x^(n-a) + 1 is
        yield (n, a, 0)
    for a in range(3, n):
        for b in range(2, a):
            for c in range(1, b):
                yield (n, a, b, c, 0)


# Irreducible factors up to this degree are ruled out by table lookup before
# a candidate gets the full test.
_SIEVE_DEGREE = 12


@lru_cache(maxsize=1)
def _sieve_tables():
    degs, orders, chunks = [], [], []
    for d in range(1, _SIEVE_DEGREE + 1):
        for g in range((1 << d) + 1, 1 << (d + 1), 2):
            if not is_irreducible(g):
                continue
            cycle = np.empty(1 << d, np.int64)
            o = K.x_power_cycle(g, d, cycle)
            degs.append(d)
            orders.append(o)
            chunks.append(cycle[:o])
    offsets = np.cumsum([0] + orders[:-1]).astype(np.int64)
    return (np.array(degs, np.int64), np.array(orders, np.int64), offsets,
            np.concatenate(chunks))


def _sparse_irreducible(exps: tuple[int, ...]) -> bool:
    # exps: odd weight, constant term present
    degs, orders, offsets, table = _sieve_tables()
    if K.has_small_factor(np.array(exps, np.int64), degs, orders, offsets, table, exps[0] // 2):
        return False
    return _rabin(exps)


_memo: dict[int, SparseIrreducible] = {}
_memo_lock = threading.Lock()


def find_irreducible(n: int, *, cache: "ModulusCache | None" = None,
                     max_candidates: int | None = None) -> SparseIrreducible:
    """Sparsest irreducible of degree exactly n.

    The trinomial x^n + x^a + 1 with the smallest a if one exists, otherwise
    the pentanomial x^n + x^a + x^b + x^c + 1 with the lexicographically
    smallest (a, b, c).  Results are memoised in-process and, if ``cache`` is
    given, on disk.
    """
    if n < 2:
        raise ParameterError(f"modulus degree must be at least 2, got {n}")
    with _memo_lock:
        hit = _memo.get(n)
    if cache is not None:
        stored = cache.get(n)
        if hit is not None and stored is None:
            cache.put(hit)
        hit = hit or stored
    if hit is not None:
        return hit
    found = None
    for count, exps in enumerate(_candidates(n)):
        if max_candidates is not None and count >= max_candidates:
            break
        if _sparse_irreducible(exps):
            found = SparseIrreducible(exps)
            break
    if found is None:
        raise ModulusSearchError(f"no sparse irreducible found for degree {n}")
    with _memo_lock:
        _memo[n] = found
    if cache is not None:
        cache.put(found)
    return found


# -- lifted moduli g(x**t) ----------------------------------------------------

# First primitive sparse polynomial of each degree m, in the search order of
# find_irreducible (trinomials, then pentanomials).  Regenerated and checked
# by the test suite via _primitive_base.
_BASES: dict[int, tuple[int, ...]] = {
    2: (2, 1, 0), 3: (3, 1, 0), 4: (4, 1, 0), 5: (5, 2, 0), 6: (6, 1, 0),
    7: (7, 1, 0), 8: (8, 4, 3, 2, 0), 9: (9, 4, 0), 10: (10, 3, 0),
    11: (11, 2, 0), 12: (12, 6, 4, 1, 0), 13: (13, 4, 3, 1, 0),
    14: (14, 5, 3, 1, 0), 15: (15, 1, 0), 16: (16, 5, 3, 2, 0),
    17: (17, 3, 0), 18: (18, 7, 0), 19: (19, 5, 2, 1, 0), 20: (20, 3, 0),
    21: (21, 2, 0), 22: (22, 1, 0), 23: (23, 5, 0), 24: (24, 4, 3, 1, 0),
    25: (25, 3, 0), 26: (26, 6, 2, 1, 0), 27: (27, 5, 2, 1, 0),
    28: (28, 3, 0), 29: (29, 2, 0), 30: (30, 6, 4, 1, 0), 31: (31, 3, 0),
    32: (32, 7, 6, 2, 0), 33: (33, 13, 0), 34: (34, 8, 4, 3, 0),
    35: (35, 2, 0), 36: (36, 11, 0), 37: (37, 6, 4, 1, 0),
    38: (38, 6, 5, 1, 0), 39: (39, 4, 0), 40: (40, 5, 4, 3, 0),
    41: (41, 3, 0), 42: (42, 7, 4, 3, 0), 43: (43, 6, 4, 3, 0),
    44: (44, 6, 5, 2, 0), 45: (45, 4, 3, 1, 0), 46: (46, 8, 7, 6, 0),
    47: (47, 5, 0), 48: (48, 9, 7, 4, 0), 49: (49, 9, 0),
    50: (50, 4, 3, 2, 0), 51: (51, 6, 3, 1, 0), 52: (52, 3, 0),
    53: (53, 6, 2, 1, 0), 54: (54, 8, 6, 3, 0), 55: (55, 24, 0),
    56: (56, 7, 4, 2, 0), 57: (57, 7, 0), 58: (58, 19, 0),
    59: (59, 7, 4, 2, 0), 60: (60, 1, 0), 61: (61, 5, 2, 1, 0),
    62: (62, 6, 5, 3, 0), 63: (63, 1, 0), 64: (64, 4, 3, 1, 0),
}


def _primitive_base(m: int) -> tuple[int, ...]:
    """First candidate of degree m (search order) whose root generates GF(2^m)*."""
    for exps in _candidates(m):
        if not _sparse_irreducible(exps):
            continue
        if _order_of_x(sum(1 << e for e in exps), m) == (1 << m) - 1:
            return exps
    raise ModulusSearchError(f"no primitive sparse polynomial of degree {m}")


def _min_smooth_at_least(target: int, primes: tuple[int, ...], bound: int) -> int | None:
    """Smallest product of powers of ``primes`` in [target, bound], or None."""
    best = bound + 1

    def walk(i: int, cur: int) -> None:
        nonlocal best
        if cur >= target:
            best = min(best, cur)
            return
        if i == len(primes):
            return
        p = primes[i]
        v = cur
        while v < best:
            if v >= target:
                best = v
                return
            walk(i + 1, v)
            v *= p

    walk(0, 1)
    return best if best <= bound else None


@lru_cache(maxsize=256)
def modulus_at_least(n: int) -> SparseIrreducible:
    """Irreducible g(x**t) of the smallest available degree m*t >= n."""
    if n < 2:
        raise ParameterError(f"modulus degree must be at least 2, got {n}")
    best: tuple[int, int, tuple[int, ...]] | None = None
    # try richer prime sets first so the bound tightens early
    order = sorted(_BASES, key=lambda m: -len(_prime_factors((1 << m) - 1)))
    for m in order:
        target = -(-n // m)
        bound = (best[0] // m) if best else 4 * target + 4
        t = _min_smooth_at_least(target, _prime_factors((1 << m) - 1), bound)
        if t is None:
            continue
        deg = m * t
        base = _BASES[m]
        key = (deg, len(base))
        if best is None or key < (best[0], len(best[2])):
            best = (deg, t, base)
    assert best is not None
    _, t, base = best
    return SparseIrreducible(tuple(e * t for e in base))


def field_modulus(n: int, *, cache: "ModulusCache | None" = None,
                  search_limit: int = DEFAULT_SEARCH_LIMIT) -> SparseIrreducible:
    """Modulus for an n-bit field element.

    An exact-degree modulus when one is cached or n <= search_limit;
    otherwise the smallest lifted modulus of degree >= n.
    """
    if n < 2:
        raise ParameterError(f"modulus degree must be at least 2, got {n}")
    if n <= search_limit:
        return find_irreducible(n, cache=cache)
    with _memo_lock:
        hit = _memo.get(n)
    if hit is None and cache is not None:
        hit = cache.get(n)
    if hit is not None:
        return hit
    return modulus_at_least(n)


# -- reduction --------------------------------------------------------------


def _as_modulus(f) -> SparseIrreducible:
    if isinstance(f, SparseIrreducible):
        return f
    exps = _exponents_of(f)
    if len(exps) % 2 == 0:
        raise ParameterError("reduction modulus has even weight")
    return SparseIrreducible(exps)


def _check(r: BitPolynomial, f: SparseIrreducible) -> int:
    n = f.degree
    if n < 2:
        raise ParameterError(f"modulus degree must be at least 2, got {n}")
    return n


def reduce(r: BitPolynomial, f) -> BitPolynomial:
    """r mod f, as an element of capacity deg f."""
    f = _as_modulus(f)
    n = _check(r, f)
    deg = r.degree
    if deg is None:
        return BitPolynomial.zero(n)
    if deg < n:
        return r.resized(n)
    shifts = f.shifts
    buf = r.words[: deg // 64 + 1].copy()
    tmp = np.zeros(_nwords(min(int(shifts.min()), deg + 1 - n)) + 1, np.uint64)
    K.fold_reduce(buf, deg + 1, n, shifts, tmp)
    out = np.zeros(_nwords(n), np.uint64)
    m = min(out.size, buf.size)
    out[:m] = buf[:m]
    return BitPolynomial._wrap(out, n)


def _word_ranges(nwords: int, parts: int) -> list[tuple[int, int]]:
    step = -(-nwords // parts)
    return [(i, min(i + step, nwords)) for i in range(0, nwords, step)]


def reduce_parallel(r: BitPolynomial, f, workers: int) -> BitPolynomial:
    """Same result as :func:`reduce`, with each fold pass split over threads.

    Each pass lifts the top span (at most the smallest fold distance wide)
    out of the buffer, then for every fold distance the threads XOR disjoint
    word ranges of that span into place.  Neighbouring ranges share one
    target word, which each thread hands back instead of storing; those are
    merged once the threads finish, so no word is written concurrently and
    the result does not depend on scheduling or worker count.
    """
    if workers < 1:
        raise ParameterError("workers must be at least 1")
    f = _as_modulus(f)
    n = _check(r, f)
    deg = r.degree
    shifts = f.shifts
    smin = int(shifts.min())
    if workers == 1 or deg is None or deg < n or smin < _PARALLEL_MIN_BITS:
        return reduce(r, f)
    buf = r.words[: deg // 64 + 1].copy()
    top = deg + 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while top > n:
            width = min(top - n, smin)
            lo = top - width
            span = np.zeros(_nwords(width), np.uint64)
            K.extract_bits(buf, lo, width, span)
            K.clear_bits(buf, lo, top)
            ranges = _word_ranges(span.size, workers)
            for s in shifts:
                base = lo - int(s)
                jobs = [
                    pool.submit(K.shl_xor_tail, buf, span[w0:w1], base + 64 * w0)
                    for w0, w1 in ranges
                ]
                for (w0, _), job in zip(ranges, jobs):
                    buf[(base + 64 * w0) >> 6] ^= np.uint64(job.result())
            top = lo
    out = np.zeros(_nwords(n), np.uint64)
    m = min(out.size, buf.size)
    out[:m] = buf[:m]
    return BitPolynomial._wrap(out, n)


# -- on-disk cache ----------------------------------------------------------


def default_cache_path() -> Path:
    env = os.environ.get("ESE_MODULUS_CACHE")
    if env:
        return Path(env)
    root = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(root) / "ese" / "moduli.txt"


class ModulusCache:
    """Text file of found moduli, one ``degree:e1,e2,...,0`` record per line.

    Readers never lock; a writer takes an exclusive lock on a sidecar file,
    re-reads, merges and atomically replaces the cache file.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else default_cache_path()
        self._entries: dict[int, SparseIrreducible] | None = None

    @staticmethod
    def _parse(text: str) -> dict[int, SparseIrreducible]:
        entries = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            deg, _, rest = line.partition(":")
            try:
                mod = SparseIrreducible(tuple(int(e) for e in rest.split(",")))
            except (ValueError, ParameterError):
                continue
            if mod.degree == int(deg):
                entries[mod.degree] = mod
        return entries

    def _load(self) -> dict[int, SparseIrreducible]:
        try:
            return self._parse(self.path.read_text())
        except FileNotFoundError:
            return {}

    def entries(self) -> dict[int, SparseIrreducible]:
        if self._entries is None:
            self._entries = self._load()
        return dict(self._entries)

    def get(self, n: int) -> SparseIrreducible | None:
        if self._entries is None:
            self._entries = self._load()
        return self._entries.get(n)

    def put(self, mod: SparseIrreducible) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lock_path = self.path.with_name(self.path.name + ".lock")
        with open(lock_path, "w") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            entries = self._load()
            entries[mod.degree] = mod
            lines = [f"{d}:{','.join(map(str, m.exponents))}" for d, m in sorted(entries.items())]
            fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=".moduli-")
            with os.fdopen(fd, "w") as fh:
                fh.write("\n".join(lines) + "\n")
            os.replace(tmp, self.path)
            self._entries = entries
