"""Benchmark harness: operand-size sweeps and end-to-end chunk sweeps.

Every point is timed ``reps`` times in sequence and the median is reported.
Reports are delimited text with a header row that names the units.
"""

from __future__ import annotations

import io
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .bitpoly import BitPolynomial, mul_base
from .container import EncryptConfig, encrypt_stream
from .core import MB, PhaseTimes, key_consumption_rate
from .errors import ParameterError
from .modred import field_modulus, reduce, reduce_parallel
from .unbalanced import simplemult, simplemult_parallel

__all__ = [
    "BenchRecord",
    "E2ERecord",
    "time_median",
    "random_poly",
    "bench_mult",
    "bench_reduce",
    "bench_e2e",
    "format_records",
    "MULT_OPS",
    "REDUCE_OPS",
]

MULT_OPS = ("base", "simplemult", "parallel")
REDUCE_OPS = ("reduce", "parallel")


@dataclass(frozen=True)
class BenchRecord:
    op: str
    msg_bits: int
    key_bits: int
    workers: int
    reps: int
    seconds: float  # median over reps

    @property
    def enc_rate(self) -> float:
        """Message MB processed per second."""
        return self.msg_bits / 8 / MB / self.seconds if self.seconds > 0 else float("inf")

    @property
    def key_rate(self) -> float:
        return key_consumption_rate(self.enc_rate, self.key_bits, self.msg_bits)

    HEADER = ("op", "msg_bits", "key_bits", "workers", "reps", "median_s",
              "enc_rate_MB/s", "key_cons_MB/s")

    def row(self) -> tuple:
        return (self.op, self.msg_bits, self.key_bits, self.workers, self.reps,
                f"{self.seconds:.6f}", f"{self.enc_rate:.4f}", f"{self.key_rate:.6f}")


@dataclass(frozen=True)
class E2ERecord:
    file_bytes: int
    chunk_bytes: int
    chunks: int
    key_bits_per_chunk: int
    key_bits_total: int
    workers: int
    reps: int
    mult_s: float
    red_s: float
    xor_s: float
    other_s: float
    total_s: float  # wall clock of the median run

    @property
    def enc_rate(self) -> float:
        """Plaintext MB per second (MB = 10**6 bytes)."""
        return self.file_bytes / MB / self.total_s if self.total_s > 0 else float("inf")

    @property
    def key_rate(self) -> float:
        """Key MB per second."""
        return key_consumption_rate(self.enc_rate, self.key_bits_total, 8 * self.file_bytes)

    @property
    def key_rate_bits(self) -> float:
        """Key bits per second."""
        return self.key_rate * MB * 8

    HEADER = ("file_bytes", "chunk_bytes", "chunks", "key_bits_per_chunk", "key_bits_total",
              "workers", "reps", "mult_s", "red_s", "xor_s", "other_s", "total_s",
              "enc_rate_MB/s", "key_cons_MB/s", "key_cons_bit/s")

    def row(self) -> tuple:
        return (self.file_bytes, self.chunk_bytes, self.chunks, self.key_bits_per_chunk,
                self.key_bits_total, self.workers, self.reps,
                *(f"{v:.6f}" for v in (self.mult_s, self.red_s, self.xor_s, self.other_s,
                                       self.total_s)),
                f"{self.enc_rate:.4f}", f"{self.key_rate:.6f}", f"{self.key_rate_bits:.1f}")


def format_records(records: Iterable, sep: str = ",") -> str:
    records = list(records)
    if not records:
        return ""
    lines = [sep.join(records[0].HEADER)]
    lines += [sep.join(str(v) for v in r.row()) for r in records]
    return "\n".join(lines) + "\n"


def time_median(fn: Callable[[], object], reps: int) -> float:
    if reps < 1:
        raise ParameterError("repetitions must be at least 1")
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def random_poly(bits: int, rng: np.random.Generator) -> BitPolynomial:
    """Uniform polynomial of exactly ``bits`` bits with the top coefficient set."""
    nw = (bits + 63) // 64
    w = rng.integers(0, 1 << 64, nw, dtype=np.uint64, endpoint=False) if nw else np.zeros(0, np.uint64)
    rem = bits % 64
    if rem:
        w[-1] &= np.uint64((1 << rem) - 1)
    w[-1] |= np.uint64(1 << ((bits - 1) % 64))
    return BitPolynomial(w, bits)


def _mult_bytes(op: str, msg_bits: int, key_bits: int) -> int:
    # rough peak working set of one measurement
    if op == "base":
        return 12 * max(msg_bits, key_bits) // 8
    return 4 * (msg_bits + key_bits) // 8


def bench_mult(msg_bits: Iterable[int], key_bits: Iterable[int], workers: Iterable[int] = (1,),
               *, reps: int = 5, ops: Iterable[str] = MULT_OPS,
               memory_budget: int | None = None, seed: int = 0,
               notice: Callable[[str], None] | None = None) -> list[BenchRecord]:
    """Time whole-operand base multiplication, simplemult and its parallel form."""
    ops = tuple(ops)
    for op in ops:
        if op not in MULT_OPS:
            raise ParameterError(f"unknown multiplication op {op!r}")
    if reps < 3:
        raise ParameterError("use at least 3 repetitions")
    rng = np.random.default_rng(seed)
    out = []
    for mb in msg_bits:
        for kb in key_bits:
            p, q = random_poly(mb, rng), random_poly(kb, rng)
            for op in ops:
                if memory_budget is not None and _mult_bytes(op, mb, kb) > memory_budget:
                    if notice:
                        notice(f"skipped {op} at {mb}x{kb} bits: exceeds the memory budget")
                    continue
                ws = tuple(workers) if op == "parallel" else (1,)
                for w in ws:
                    if op == "base":
                        fn = lambda: mul_base(p, q)
                    elif op == "simplemult":
                        fn = lambda: simplemult(p, q)
                    else:
                        fn = lambda w=w: simplemult_parallel(p, q, w)
                    out.append(BenchRecord(op, mb, kb, w, reps, time_median(fn, reps)))
    return out


def bench_reduce(msg_bits: Iterable[int], key_bits: Iterable[int], workers: Iterable[int] = (1,),
                 *, reps: int = 5, ops: Iterable[str] = REDUCE_OPS,
                 memory_budget: int | None = None, seed: int = 0,
                 notice: Callable[[str], None] | None = None) -> list[BenchRecord]:
    """Time reduction of a (msg + key)-bit product modulo a field modulus of msg bits."""
    ops = tuple(ops)
    for op in ops:
        if op not in REDUCE_OPS:
            raise ParameterError(f"unknown reduction op {op!r}")
    if reps < 3:
        raise ParameterError("use at least 3 repetitions")
    rng = np.random.default_rng(seed)
    out = []
    for mb in msg_bits:
        f = field_modulus(mb)
        for kb in key_bits:
            if memory_budget is not None and 3 * (f.degree + kb) // 8 > memory_budget:
                if notice:
                    notice(f"skipped reduction at {mb}+{kb} bits: exceeds the memory budget")
                continue
            r = random_poly(f.degree + kb - 1, rng)
            for op in ops:
                ws = tuple(workers) if op == "parallel" else (1,)
                for w in ws:
                    fn = (lambda: reduce(r, f)) if op == "reduce" else (lambda w=w: reduce_parallel(r, f, w))
                    out.append(BenchRecord(op, mb, kb, w, reps, time_median(fn, reps)))
    return out


class _NullSink(io.RawIOBase):
    def writable(self) -> bool:
        return True

    def write(self, b) -> int:
        return len(b)


def bench_e2e(file_bytes: int, chunk_bytes: Iterable[int], entropy_ratio: float,
              data_ratio: float = 1.0, *, workers: int = 1, reps: int = 5,
              eps_exp: int = 128, x_mode: str = "seed", seed: int = 0,
              memory_budget: int | None = None,
              notice: Callable[[str], None] | None = None) -> list[E2ERecord]:
    """Encrypt a synthetic random file once per chunk size and split the time by phase."""
    if reps < 3:
        raise ParameterError("use at least 3 repetitions")
    rng = np.random.default_rng(seed)
    plaintext = rng.integers(0, 256, file_bytes, dtype=np.uint8).tobytes()
    out = []
    for cb in chunk_bytes:
        if memory_budget is not None and 8 * min(cb, file_bytes) > memory_budget:
            if notice:
                notice(f"skipped chunk size {cb}: exceeds the memory budget")
            continue
        cfg = EncryptConfig(chunk_bytes=cb, eps_exp=eps_exp, x_mode=x_mode, workers=workers,
                            entropy_ratio=entropy_ratio, data_ratio=data_ratio)
        plan = cfg.plan(file_bytes)
        key = rng.integers(0, 256, plan.total_key_bytes, dtype=np.uint8).tobytes()
        runs = []
        for _ in range(reps):
            rep = encrypt_stream(io.BytesIO(plaintext), _NullSink(), io.BytesIO(key), cfg)
            runs.append(rep)
        runs.sort(key=lambda r: r.elapsed)
        med = runs[len(runs) // 2]
        t: PhaseTimes = med.times
        per_chunk = plan.per_chunk_params[0].ell if plan.chunk_count else 0
        out.append(E2ERecord(file_bytes, cb, plan.chunk_count, per_chunk, plan.total_key_bits,
                             workers, reps, t.mult, t.red, t.xor,
                             med.elapsed - t.mult - t.red - t.xor, med.elapsed))
    return out
