"""Ciphertext container and the chunked file pipeline.

Layout (all integers little-endian)::

    "ESE1"  version:u8 = 1  eps_exp:u8  reserved:u16 = 0
    plaintext_bits:u64  chunk_bits:u64  chunk_count:u32
    per chunk:
        n:u64  ell:u64  weight:u16  exponents:u64 * weight
        x_mode:u8 (0 = seed, 1 = embedded)
        32-byte seed | ceil(N / 8) bytes of X     (N = modulus degree)
        ceil(n / 8) ciphertext bytes

Bit i of a field is bit i % 8 of byte i // 8.  A chunk with weight 0 was
encrypted as a one-time pad (ell = n); it carries no public string (a zero
seed in seed mode, no bytes in embedded mode).
"""

from __future__ import annotations

import io
import os
import stat
import struct
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import BinaryIO, Iterator

from .bitpoly import poly_from_bytes, poly_to_bytes
from .core import (
    DEFAULT_EPS_EXP,
    SEED_BYTES,
    ChunkPlan,
    PhaseTimes,
    encrypt_chunk,
    generate_public_string,
    plan_chunks,
    plan_for_key_budget,
    MB,
)
from .errors import ContainerFormatError, InsufficientKeyError, ParameterError
from .modred import (
    DEFAULT_SEARCH_LIMIT,
    ModulusCache,
    SparseIrreducible,
    field_modulus,
    is_irreducible,
)

__all__ = [
    "MAGIC",
    "VERSION",
    "X_SEED",
    "X_EMBEDDED",
    "ChunkRecord",
    "CiphertextContainer",
    "EncryptConfig",
    "EncryptionReport",
    "encrypt_stream",
    "decrypt_stream",
    "encrypt_file",
    "decrypt_file",
    "read_header",
    "iter_chunks",
]

MAGIC = b"ESE1"
VERSION = 1
X_SEED = 0
X_EMBEDDED = 1
_MODES = {"seed": X_SEED, "embedded": X_EMBEDDED}
_HEADER = struct.Struct("<4sBBHQQI")
_CHUNK_HEAD = struct.Struct("<QQH")


@dataclass(frozen=True)
class ChunkRecord:
    n: int
    ell: int
    exponents: tuple[int, ...]
    x_mode: int
    x_data: bytes  # seed, or the public string bytes
    ciphertext: bytes

    @property
    def otp(self) -> bool:
        return not self.exponents

    @property
    def field_degree(self) -> int:
        return self.exponents[0] if self.exponents else 0

    def to_bytes(self) -> bytes:
        head = _CHUNK_HEAD.pack(self.n, self.ell, len(self.exponents))
        exps = struct.pack(f"<{len(self.exponents)}Q", *self.exponents)
        return b"".join((head, exps, bytes([self.x_mode]), self.x_data, self.ciphertext))


@dataclass(frozen=True)
class Header:
    eps_exp: int
    plaintext_bits: int
    chunk_bits: int
    chunk_count: int

    def to_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, VERSION, self.eps_exp, 0, self.plaintext_bits,
                            self.chunk_bits, self.chunk_count)


def _read_exact(fp: BinaryIO, n: int, what: str) -> bytes:
    data = fp.read(n)
    if data is None or len(data) != n:
        raise ContainerFormatError(f"truncated container while reading {what}")
    return data


def read_header(fp: BinaryIO) -> Header:
    magic, version, eps_exp, reserved, pbits, cbits, count = _HEADER.unpack(
        _read_exact(fp, _HEADER.size, "header"))
    if magic != MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported container version {version}")
    if reserved != 0:
        raise ContainerFormatError("reserved header bytes are not zero")
    if eps_exp < 1:
        raise ContainerFormatError("eps_exp must be positive")
    return Header(eps_exp, pbits, cbits, count)


@lru_cache(maxsize=1024)
def _verified(exps: tuple[int, ...]) -> bool:
    return is_irreducible(exps)


def read_chunk(fp: BinaryIO, *, verify: bool = True) -> ChunkRecord:
    n, ell, weight = _CHUNK_HEAD.unpack(_read_exact(fp, _CHUNK_HEAD.size, "chunk header"))
    exps = struct.unpack(f"<{weight}Q", _read_exact(fp, 8 * weight, "modulus"))
    mode = _read_exact(fp, 1, "public-string mode")[0]
    if weight == 0:
        if ell != n:
            raise ContainerFormatError("a chunk without modulus must use a key as long as the chunk")
    else:
        try:
            SparseIrreducible(exps)
        except ParameterError as exc:
            raise ContainerFormatError(f"malformed modulus: {exc}") from None
        if exps[0] < n or ell > n:
            raise ContainerFormatError("chunk length, key length and modulus degree disagree")
        if verify and not _verified(tuple(exps)):
            raise ContainerFormatError(f"modulus of degree {exps[0]} is not irreducible")
    if mode == X_SEED:
        x_data = _read_exact(fp, SEED_BYTES, "seed")
    elif mode == X_EMBEDDED:
        x_data = _read_exact(fp, (exps[0] + 7) // 8 if weight else 0, "public string")
    else:
        raise ContainerFormatError(f"unknown public-string mode {mode}")
    ct = _read_exact(fp, (n + 7) // 8, "ciphertext")
    return ChunkRecord(n, ell, tuple(exps), mode, x_data, ct)


def iter_chunks(fp: BinaryIO, header: Header, *, verify: bool = True) -> Iterator[ChunkRecord]:
    total = 0
    for _ in range(header.chunk_count):
        rec = read_chunk(fp, verify=verify)
        total += rec.n
        yield rec
    if total != header.plaintext_bits:
        raise ContainerFormatError(
            f"chunks hold {total} bits but the header declares {header.plaintext_bits}")


@dataclass
class CiphertextContainer:
    """In-memory form of a whole container."""

    eps_exp: int
    plaintext_bits: int
    chunk_bits: int
    chunks: list[ChunkRecord] = field(default_factory=list)

    @property
    def chunk_count(self) -> int:
        return len(self.chunks)

    def header(self) -> Header:
        return Header(self.eps_exp, self.plaintext_bits, self.chunk_bits, len(self.chunks))

    def to_bytes(self) -> bytes:
        return self.header().to_bytes() + b"".join(c.to_bytes() for c in self.chunks)

    @classmethod
    def from_bytes(cls, data: bytes, *, verify: bool = True) -> "CiphertextContainer":
        fp = io.BytesIO(data)
        h = read_header(fp)
        chunks = list(iter_chunks(fp, h, verify=verify))
        if fp.read(1):
            raise ContainerFormatError("trailing bytes after the last chunk")
        return cls(h.eps_exp, h.plaintext_bits, h.chunk_bits, chunks)


@dataclass
class EncryptConfig:
    """How to size keys and chunks.

    Give either ``entropy_ratio`` (with ``data_ratio``, default 1) or
    ``key_bits`` (a total key budget for the file).
    """

    chunk_bytes: int = 16 * (1 << 20)
    eps_exp: int = DEFAULT_EPS_EXP
    x_mode: str = "seed"
    workers: int = 1
    entropy_ratio: float | None = None
    data_ratio: float = 1.0
    key_bits: int | None = None
    modulus_cache: ModulusCache | None = None
    search_limit: int = DEFAULT_SEARCH_LIMIT

    def plan(self, plaintext_bytes: int) -> ChunkPlan:
        if self.x_mode not in _MODES:
            raise ParameterError(f"unknown public-string mode {self.x_mode!r}")
        if not 1 <= self.eps_exp <= 255:
            raise ParameterError("eps_exp must be in 1..255 to fit the container")
        if self.chunk_bytes < 1:
            raise ParameterError("chunk size must be positive")
        bits, cbits = 8 * plaintext_bytes, 8 * self.chunk_bytes
        if (self.entropy_ratio is None) == (self.key_bits is None):
            raise ParameterError("give exactly one of an entropy ratio or a key budget")
        if self.key_bits is not None:
            return plan_for_key_budget(bits, cbits, self.key_bits, self.eps_exp)
        return plan_chunks(bits, cbits, self.entropy_ratio, self.data_ratio, self.eps_exp)


@dataclass
class EncryptionReport:
    plan: ChunkPlan
    plaintext_bytes: int
    key_bits_used: int = 0
    key_bytes_read: int = 0
    key_slices: list[tuple[int, int]] = field(default_factory=list)  # (offset, length) in bytes
    times: PhaseTimes = field(default_factory=PhaseTimes)
    elapsed: float = 0.0

    @property
    def enc_rate(self) -> float:
        """Plaintext MB (10**6 bytes) per second of wall-clock time."""
        return self.plaintext_bytes / MB / self.elapsed if self.elapsed > 0 else float("inf")

    @property
    def key_rate(self) -> float:
        """Key MB per second consumed at enc_rate."""
        return self.key_bits_used / 8 / MB / self.elapsed if self.elapsed > 0 else float("inf")


def _stream_size(fp: BinaryIO) -> int | None:
    """Bytes left in fp when that is knowable without consuming it."""
    try:
        st = os.fstat(fp.fileno())
        if stat.S_ISREG(st.st_mode):
            return st.st_size - fp.tell()
        return None
    except (AttributeError, OSError, io.UnsupportedOperation):
        pass
    try:
        pos = fp.tell()
        end = fp.seek(0, io.SEEK_END)
        fp.seek(pos)
        return end - pos
    except (AttributeError, OSError, io.UnsupportedOperation):
        return None


def _read_key(key_src: BinaryIO, nbytes: int, consumed: int, required_bits: int) -> bytes:
    parts, got = [], 0
    while got < nbytes:
        data = key_src.read(nbytes - got)
        if not data:
            raise InsufficientKeyError(required_bits, 8 * (consumed + got))
        parts.append(data)
        got += len(data)
    return b"".join(parts)


def _as_stream(obj) -> BinaryIO:
    if isinstance(obj, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(obj))
    return obj


def encrypt_stream(src: BinaryIO, dst: BinaryIO, key_src: BinaryIO, config: EncryptConfig,
                   *, size: int | None = None) -> EncryptionReport:
    """Encrypt ``size`` bytes of src (default: all of it) into a container on dst.

    Key material is read sequentially from key_src, one fresh slice per
    chunk.  When key_src is a regular file or buffer its length is checked
    before anything is written.
    """
    start = time.perf_counter()
    if size is None:
        size = _stream_size(src)
        if size is None:
            raise ParameterError("plaintext size is unknown; pass size for non-seekable input")
    plan = config.plan(size)
    available = _stream_size(key_src)
    if available is not None and available < plan.total_key_bytes:
        raise InsufficientKeyError(8 * plan.total_key_bytes, 8 * available)
    report = EncryptionReport(plan=plan, plaintext_bytes=size)
    header = Header(config.eps_exp, 8 * size, 8 * config.chunk_bytes, plan.chunk_count)
    dst.write(header.to_bytes())
    mode = _MODES[config.x_mode]
    required = 8 * plan.total_key_bytes
    for params in plan.per_chunk_params:
        nbytes = params.n // 8
        data = _read_exact_plain(src, nbytes)
        t0 = time.perf_counter()
        key = _read_key(key_src, params.key_bytes, report.key_bytes_read, required)
        report.key_slices.append((report.key_bytes_read, params.key_bytes))
        report.key_bytes_read += params.key_bytes
        report.key_bits_used += params.ell
        m = poly_from_bytes(data, params.n)
        k = poly_from_bytes(key, params.ell)
        if params.otp:
            t1 = time.perf_counter()
            c = m ^ k
            report.times.xor += time.perf_counter() - t1
            exps, x_data = (), bytes(SEED_BYTES) if mode == X_SEED else b""
            report.times.other += t1 - t0
        else:
            f = field_modulus(params.n, cache=config.modulus_cache,
                              search_limit=config.search_limit)
            if mode == X_SEED:
                x_data = os.urandom(SEED_BYTES)
                X = generate_public_string("seed", x_data, f.degree)
            else:
                X = generate_public_string("embedded", None, f.degree)
                x_data = poly_to_bytes(X)
            report.times.other += time.perf_counter() - t0
            c = encrypt_chunk(m, k, X, f, workers=config.workers, times=report.times)
            exps = f.exponents
        dst.write(ChunkRecord(params.n, params.ell, exps, mode, x_data, poly_to_bytes(c)).to_bytes())
    report.elapsed = time.perf_counter() - start
    return report


def _read_exact_plain(src: BinaryIO, n: int) -> bytes:
    parts, got = [], 0
    while got < n:
        data = src.read(n - got)
        if not data:
            raise ParameterError(f"plaintext ended early: expected {n} more bytes")
        parts.append(data)
        got += len(data)
    return b"".join(parts)


def decrypt_stream(src: BinaryIO, dst: BinaryIO, key_src: BinaryIO, *, workers: int = 1,
                   verify: bool = True) -> int:
    """Decrypt a container from src into dst; returns the plaintext byte count."""
    header = read_header(src)
    consumed = 0
    written = 0
    for rec in iter_chunks(src, header, verify=verify):
        kbytes = (rec.ell + 7) // 8
        key = _read_key(key_src, kbytes, consumed, 8 * (consumed + kbytes))
        consumed += kbytes
        c = poly_from_bytes(rec.ciphertext, rec.n)
        k = poly_from_bytes(key, rec.ell)
        if rec.otp:
            m = c ^ k
        else:
            f = SparseIrreducible(rec.exponents)
            if rec.x_mode == X_SEED:
                X = generate_public_string("seed", rec.x_data, f.degree)
            else:
                X = poly_from_bytes(rec.x_data, f.degree)
            m = encrypt_chunk(c, k, X, f, workers=workers)
        out = poly_to_bytes(m)
        dst.write(out)
        written += len(out)
    return written


def encrypt_file(plaintext, key_material, config: EncryptConfig) -> CiphertextContainer:
    """Encrypt an in-memory or file-like plaintext; returns the parsed container."""
    sink = io.BytesIO()
    encrypt_stream(_as_stream(plaintext), sink, _as_stream(key_material), config)
    return CiphertextContainer.from_bytes(sink.getvalue(), verify=False)


def decrypt_file(container, key_material, *, workers: int = 1) -> bytes:
    """Inverse of :func:`encrypt_file`; accepts a container, bytes or a stream."""
    if isinstance(container, CiphertextContainer):
        container = container.to_bytes()
    out = io.BytesIO()
    decrypt_stream(_as_stream(container), out, _as_stream(key_material), workers=workers)
    return out.getvalue()
