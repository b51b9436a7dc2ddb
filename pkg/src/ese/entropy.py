"""Entropy estimation by lossless compression.

The compressed size of a file bounds its information content from above, so
``compressed / original`` is used as an estimate of the entropy ratio.  For a
corpus the per-file ratios are summarised by mean, sample standard deviation
and the heuristic ``mean - stddev``.

Statistics are computed exactly on the ratios as fractions of byte counts and
rounded once, so they are reproducible from the per-file table.
"""

from __future__ import annotations

import bz2
import json
import lzma
import math
import os
import random
import shlex
import struct
import subprocess
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

from .core import DEFAULT_EPS_EXP, EseParams, _ratio, ese_params
from .errors import CompressorError, InvalidEstimateError, ParameterError

__all__ = [
    "CompressorAdapter",
    "BuiltinAdapter",
    "CommandAdapter",
    "FileRatio",
    "EntropyReport",
    "builtin_adapters",
    "load_adapters",
    "get_adapter",
    "compress_ratio",
    "estimate_entropy_corpus",
    "report_from_table",
    "recommend_key_params",
    "recommend_whole_file",
    "ADAPTER_CONFIG_ENV",
]

ADAPTER_CONFIG_ENV = "ESE_COMPRESSORS"


class CompressorAdapter:
    """A lossless compressor: ``compress`` and its inverse ``decompress``.

    Subclasses provide ``name`` and ``lossless`` attributes.
    """

    name: str
    lossless: bool

    def compress(self, data: bytes) -> bytes:
        raise NotImplementedError

    def decompress(self, data: bytes) -> bytes:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


_STORE_HEADER = struct.Struct("<4sQ")


def _store(data: bytes) -> bytes:
    return _STORE_HEADER.pack(b"STOR", len(data)) + data


def _unstore(blob: bytes) -> bytes:
    magic, n = _STORE_HEADER.unpack_from(blob)
    if magic != b"STOR" or len(blob) != _STORE_HEADER.size + n:
        raise CompressorError("not a stored blob")
    return blob[_STORE_HEADER.size:]


@dataclass(repr=False)
class BuiltinAdapter(CompressorAdapter):
    """In-process compressor from the standard library."""

    name: str
    _compress: Callable[[bytes], bytes]
    _decompress: Callable[[bytes], bytes]
    lossless: bool = True

    def compress(self, data: bytes) -> bytes:
        return self._compress(data)

    def decompress(self, data: bytes) -> bytes:
        return self._decompress(data)


def builtin_adapters() -> dict[str, CompressorAdapter]:
    return {
        "store": BuiltinAdapter("store", _store, _unstore),
        "zlib": BuiltinAdapter("zlib", lambda d: zlib.compress(d, 9), zlib.decompress),
        "bz2": BuiltinAdapter("bz2", lambda d: bz2.compress(d, 9), bz2.decompress),
        "lzma": BuiltinAdapter(
            "lzma",
            lambda d: lzma.compress(d, preset=9 | lzma.PRESET_EXTREME),
            lzma.decompress,
        ),
    }


@dataclass(repr=False)
class CommandAdapter(CompressorAdapter):
    """External compressor driven by command templates.

    Templates use ``{input}`` and ``{output}`` placeholders for file paths,
    e.g. ``"xz -9 -c {input} > {output}"``; they run through the shell.
    """

    name: str
    compress_cmd: str
    decompress_cmd: str | None = None
    lossless: bool = True
    timeout: float | None = None

    def _run(self, template: str, data: bytes) -> bytes:
        with tempfile.TemporaryDirectory(prefix="ese-") as tmp:
            src = os.path.join(tmp, "input")
            dst = os.path.join(tmp, "output")
            Path(src).write_bytes(data)
            cmd = template.format(input=shlex.quote(src), output=shlex.quote(dst))
            proc = subprocess.run(cmd, shell=True, capture_output=True, timeout=self.timeout)
            if proc.returncode != 0:
                err = proc.stderr.decode(errors="replace").strip()
                raise CompressorError(f"{self.name}: command failed ({proc.returncode}): {err}")
            try:
                return Path(dst).read_bytes()
            except FileNotFoundError:
                raise CompressorError(f"{self.name}: command produced no output file") from None

    def compress(self, data: bytes) -> bytes:
        return self._run(self.compress_cmd, data)

    def decompress(self, data: bytes) -> bytes:
        if not self.decompress_cmd:
            raise CompressorError(f"{self.name}: no decompress command configured")
        return self._run(self.decompress_cmd, data)


def load_adapters(path: str | os.PathLike) -> dict[str, CompressorAdapter]:
    """Read command adapters from a JSON file.

    The file holds a list of objects with keys ``name``, ``compress``,
    optional ``decompress`` and optional ``lossless`` (default true).
    Adapters declared lossy are refused.
    """
    try:
        entries = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ParameterError(f"cannot read compressor config {path}: {exc}") from None
    adapters = {}
    for e in entries:
        if not isinstance(e, dict) or "name" not in e or "compress" not in e:
            raise ParameterError(f"compressor entry needs 'name' and 'compress': {e!r}")
        if not e.get("lossless", True):
            raise ParameterError(f"compressor {e['name']!r} is lossy; only lossless ones are allowed")
        adapters[e["name"]] = CommandAdapter(e["name"], e["compress"], e.get("decompress"))
    return adapters


def get_adapter(name: str, config: str | os.PathLike | None = None) -> CompressorAdapter:
    """Built-in adapter by name, or one from the config file (or $ESE_COMPRESSORS)."""
    adapters = builtin_adapters()
    config = config or os.environ.get(ADAPTER_CONFIG_ENV)
    if config:
        adapters.update(load_adapters(config))
    try:
        return adapters[name]
    except KeyError:
        raise ParameterError(
            f"unknown compressor {name!r}; available: {', '.join(sorted(adapters))}") from None


def _read(file) -> tuple[str, bytes]:
    if isinstance(file, (bytes, bytearray)):
        return "<bytes>", bytes(file)
    if isinstance(file, tuple):
        name, data = file
        return str(name), bytes(data)
    p = Path(file)
    return str(p), p.read_bytes()


def compress_ratio(file, c: CompressorAdapter) -> float:
    """Compressed size over original size, for bytes or a path."""
    return float(_measure(file, c).ratio_exact)


@dataclass(frozen=True)
class FileRatio:
    name: str
    size: int
    compressed: int

    @property
    def ratio_exact(self) -> Fraction:
        return Fraction(self.compressed, self.size)

    @property
    def ratio(self) -> float:
        return float(self.ratio_exact)


def _measure(file, c: CompressorAdapter) -> FileRatio:
    name, data = _read(file)
    if not data:
        raise ParameterError(f"{name}: empty file has no compression ratio")
    if not c.lossless:
        raise CompressorError(f"{c.name} is not lossless")
    try:
        blob = c.compress(data)
    except CompressorError as exc:
        raise CompressorError(f"{name}: {exc}") from None
    except Exception as exc:  # library compressors raise assorted types
        raise CompressorError(f"{name}: {c.name} failed: {exc}") from None
    return FileRatio(name, len(data), len(blob))


def _sqrt(x: Fraction) -> Fraction | float:
    """Exact root when x is a square of a fraction, else the float root."""
    rn, rd = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if rn * rn == x.numerator and rd * rd == x.denominator:
        return Fraction(rn, rd)
    return math.sqrt(x)


@dataclass
class EntropyReport:
    compressor: str
    files: list[FileRatio] = field(default_factory=list)
    audited: str | None = None

    def __post_init__(self):
        self.files = sorted(self.files, key=lambda f: f.name)
        if not self.files:
            raise ParameterError("a corpus needs at least one file")
        if self.heuristic_ratio <= 0:
            raise InvalidEstimateError(
                f"heuristic ratio {self.heuristic_ratio:.6g} is not positive; the corpus is "
                "too small or too varied for the mean-minus-stddev rule")

    def _mean(self) -> Fraction:
        return sum((f.ratio_exact for f in self.files), Fraction(0)) / len(self.files)

    def _var(self) -> Fraction:
        if len(self.files) < 2:
            return Fraction(0)
        m = self._mean()
        return sum(((f.ratio_exact - m) ** 2 for f in self.files), Fraction(0)) / (len(self.files) - 1)

    @property
    def mean_ratio(self) -> float:
        return float(self._mean())

    @property
    def stddev_ratio(self) -> float:
        """Sample (n - 1) standard deviation; 0 for a single file."""
        return float(_sqrt(self._var()))

    def heuristic_exact(self) -> Fraction:
        """mean - stddev; exact when the root is, else from the float root."""
        sd = _sqrt(self._var())
        return self._mean() - (sd if isinstance(sd, Fraction) else Fraction(sd))

    @property
    def heuristic_ratio(self) -> float:
        """mean - stddev, rounded once when the root is exact."""
        sd = _sqrt(self._var())
        if isinstance(sd, Fraction):
            return float(self._mean() - sd)
        return float(self._mean()) - sd

    @property
    def min_ratio(self) -> float:
        return min(f.ratio for f in self.files)

    @property
    def max_ratio(self) -> float:
        return max(f.ratio for f in self.files)

    def to_text(self, sep: str = ",") -> str:
        lines = [sep.join(("filename", "bytes", "compressed_bytes", "ratio"))]
        for f in self.files:
            lines.append(sep.join((f.name, str(f.size), str(f.compressed), f"{f.ratio:.6f}")))
        lines.append(
            f"# compressor={self.compressor} files={len(self.files)} "
            f"mean={self.mean_ratio:.6f} stddev={self.stddev_ratio:.6f} "
            f"heuristic={self.heuristic_ratio:.6f}"
        )
        return "\n".join(lines) + "\n"


def report_from_table(rows: Iterable[tuple[str, int, int]], compressor: str = "table") -> EntropyReport:
    """Report from (filename, bytes, compressed bytes) rows."""
    files = []
    for name, size, comp in rows:
        if size <= 0 or comp <= 0:
            raise ParameterError(f"{name}: sizes must be positive")
        files.append(FileRatio(str(name), int(size), int(comp)))
    return EntropyReport(compressor, files)


def estimate_entropy_corpus(files, c: CompressorAdapter, *, workers: int = 1,
                            audit: bool = True, seed: int | None = None) -> EntropyReport:
    """Compress every file and summarise the ratios.

    One randomly chosen file is decompressed and compared with the original
    to spot-check that the compressor is lossless.
    """
    files = list(files)
    if not files:
        raise ParameterError("a corpus needs at least one file")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda f: _measure(f, c), files))
    audited = None
    if audit:
        name, data = _read(random.Random(seed).choice(files))
        try:
            back = c.decompress(c.compress(data))
        except CompressorError:
            raise
        except Exception as exc:
            raise CompressorError(f"{name}: {c.name} round trip failed: {exc}") from None
        if back != data:
            raise CompressorError(f"{name}: {c.name} is not lossless (round trip differs)")
        audited = name
    return EntropyReport(c.name, results, audited)


def recommend_key_params(report: EntropyReport, payload_bits: int,
                         eps_exp: int = DEFAULT_EPS_EXP, data_ratio: float = 1.0) -> EseParams:
    """Key parameters for a payload from a corpus estimate.

    The payload is assumed stored at ``data_ratio`` of the raw size (1.0 if
    it is raw), so its entropy is t = payload_bits * heuristic / data_ratio.
    """
    if payload_bits <= 0:
        raise ParameterError("payload must be non-empty")
    frac = report.heuristic_exact() / _ratio(data_ratio)
    if frac > 1:
        raise InvalidEstimateError(
            f"estimated entropy exceeds the payload (ratio {float(frac):.4f} > 1); "
            "encrypt the whole file with a one-time pad instead")
    return ese_params(payload_bits, math.floor(payload_bits * frac), eps_exp)


def recommend_whole_file(payload_bits: int, entropy_bits: int,
                         eps_exp: int = DEFAULT_EPS_EXP) -> EseParams:
    """Key parameters when the best compressed size of the very file is known."""
    if payload_bits <= 0:
        raise ParameterError("payload must be non-empty")
    if entropy_bits > payload_bits:
        raise InvalidEstimateError(
            "the compressed estimate is larger than the payload; "
            "encrypt the whole file with a one-time pad instead")
    return ese_params(payload_bits, entropy_bits, eps_exp)
