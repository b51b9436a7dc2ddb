"""Command-line front end: ``ese <command> ...``.

Exit status is 0 on success, 2 for usage errors, 10 for I/O errors and the
``exit_code`` of the library exception otherwise (see :mod:`ese.errors`).
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import warnings
from pathlib import Path

from . import __version__
from .bench import bench_e2e, bench_mult, bench_reduce, format_records
from .container import EncryptConfig, decrypt_stream, encrypt_stream
from .core import DEFAULT_EPS_EXP, MB, MiB, OtpFallbackWarning
from .entropy import (
    ADAPTER_CONFIG_ENV,
    estimate_entropy_corpus,
    get_adapter,
    recommend_key_params,
)
from .errors import EseError, ParameterError
from .modred import ModulusCache, find_irreducible, is_irreducible, modulus_at_least

IO_ERROR_EXIT = 10

_UNITS = {
    "": 1, "b": 1, "k": 1000, "kb": 1000, "mb": MB, "gb": 10**9, "tb": 10**12,
    "kib": 1 << 10, "mib": MiB, "gib": 1 << 30, "tib": 1 << 40,
}

CAVEAT = ("note: compression bounds the Shannon entropy; the key length formula needs "
          "collision entropy, which can be lower")


def parse_size(text: str) -> int:
    """'256MiB', '5MB', '1.5GiB', '2^20' or a plain integer (bytes or bits)."""
    s = text.strip().replace("_", "")
    m = re.fullmatch(r"(\d+)\s*\^\s*(\d+)", s)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    m = re.fullmatch(r"(\d+(?:\.\d+)?)\s*([A-Za-z]*)", s)
    if not m or m.group(2).lower() not in _UNITS:
        raise argparse.ArgumentTypeError(f"cannot parse size {text!r}")
    value = float(m.group(1)) * _UNITS[m.group(2).lower()]
    if value != int(value):
        raise argparse.ArgumentTypeError(f"size {text!r} is not a whole number")
    return int(value)


def parse_sweep(text: str) -> list[int]:
    """Comma list of sizes; 'a..b' doubles from a up to b, 'a..b:k' multiplies by 2**k."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, rest = part.partition("..")
            hi, _, step = rest.partition(":")
            a, b, k = parse_size(lo), parse_size(hi), int(step or 1)
            if a < 1 or b < a or k < 1:
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            while a <= b:
                out.append(a)
                a <<= k
        elif part:
            out.append(parse_size(part))
    if not out:
        raise argparse.ArgumentTypeError("empty sweep")
    return out


def parse_ints(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _ratio(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("ratios must be in (0, 1]")
    return v


def _fmt_bits(bits: int) -> str:
    return f"{bits} bits ({bits / 8 / MB:.4f} MB, {bits / 8 / MiB:.4f} MiB)"


def _modulus_cache(args) -> ModulusCache | None:
    if getattr(args, "no_cache", False):
        return None
    return ModulusCache(args.modulus_cache)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands ---------------------------------------------------------------


def cmd_encrypt(args) -> int:
    cfg = EncryptConfig(
        chunk_bytes=args.chunk_size,
        eps_exp=args.eps_exp,
        x_mode=args.x_mode,
        workers=args.threads,
        entropy_ratio=args.entropy_ratio,
        data_ratio=args.data_ratio,
        key_bits=8 * args.key_file_length if args.key_file_length is not None else None,
        modulus_cache=_modulus_cache(args),
    )
    size = os.path.getsize(args.input)
    plan = cfg.plan(size)
    print(f"plaintext: {size} bytes in {plan.chunk_count} chunk(s) of up to "
          f"{args.chunk_size} bytes ({args.chunk_size / MiB:g} MiB)")
    if plan.chunk_count:
        print(f"per-chunk key: {_fmt_bits(plan.per_chunk_params[0].ell)}")
    print(f"total key: {_fmt_bits(plan.total_key_bits)}; key material needed: "
          f"{plan.total_key_bytes} bytes")
    if args.plan_only:
        return 0
    if not args.key or not args.output:
        raise ParameterError("--key and --output are required unless --plan-only is given")
    with open(args.input, "rb") as src, open(args.key, "rb") as key, \
            open(args.output, "wb") as dst:
        report = encrypt_stream(src, dst, key, cfg, size=size)
    print(f"total key bits consumed: {report.key_bits_used}")
    print(f"encryption rate: {report.enc_rate:.3f} MB/s")
    print(f"key consumption rate: {report.key_rate:.6f} MB/s "
          f"({report.key_rate * 8 * MB:.1f} bit/s)")
    if args.entropy_ratio is not None:
        print(CAVEAT)
    return 0


def cmd_decrypt(args) -> int:
    with open(args.input, "rb") as src, open(args.key, "rb") as key, \
            open(args.output, "wb") as dst:
        n = decrypt_stream(src, dst, key, workers=args.threads)
    print(f"decrypted {n} bytes")
    return 0


def _corpus(paths: list[str]) -> list[str]:
    files = []
    for p in paths:
        if os.path.isdir(p):
            for root, _, names in os.walk(p):
                files.extend(os.path.join(root, n) for n in names)
        else:
            files.append(p)
    return sorted(files)


def cmd_estimate(args) -> int:
    adapter = get_adapter(args.compressor, args.compressors_config)
    report = estimate_entropy_corpus(_corpus(args.files), adapter, workers=args.workers,
                                     audit=not args.no_audit, seed=args.seed)
    _emit(report.to_text(), args.output)
    if report.audited:
        print(f"# lossless check passed on {report.audited}", file=sys.stderr)
    if args.payload_size is not None:
        params = recommend_key_params(report, 8 * args.payload_size, args.eps_exp,
                                      args.data_ratio)
        print(f"# recommended key for {args.payload_size} bytes: {_fmt_bits(params.ell)} "
              f"(optimistic floor {2 * args.eps_exp} bits, one-time pad {8 * args.payload_size} bits)",
              file=sys.stderr)
    print("# " + CAVEAT, file=sys.stderr)
    if args.figure:
        from .plotting import plot_entropy

        plot_entropy(report, args.figure)
    return 0


def cmd_find_poly(args) -> int:
    cache = _modulus_cache(args)
    for n in args.degrees:
        if args.at_least:
            f = modulus_at_least(n)
        else:
            f = find_irreducible(n, cache=cache, max_candidates=args.max_candidates)
        ok = is_irreducible(f)
        print(f"{f.degree}:{','.join(map(str, f.exponents))}" + ("" if ok else "  # NOT IRREDUCIBLE"))
        if not ok:
            return 9
    return 0


def _notice(msg: str) -> None:
    print(f"# {msg}", file=sys.stderr)


def _bench(args, fn) -> int:
    records = fn(args.msg_bits, args.key_bits, args.workers, reps=args.reps, ops=args.ops,
                 memory_budget=args.memory_budget, seed=args.seed, notice=_notice)
    _emit(format_records(records), args.output)
    if args.figure and records:
        from .plotting import plot_sweep

        plot_sweep(records, args.figure, title=args.command)
    return 0


def cmd_bench_mult(args) -> int:
    return _bench(args, bench_mult)


def cmd_bench_reduce(args) -> int:
    return _bench(args, bench_reduce)


def cmd_bench_e2e(args) -> int:
    records = bench_e2e(args.file_size, args.chunk_sizes, args.entropy_ratio, args.data_ratio,
                        workers=args.workers, reps=args.reps, eps_exp=args.eps_exp,
                        x_mode=args.x_mode, seed=args.seed, memory_budget=args.memory_budget,
                        notice=_notice)
    _emit(format_records(records), args.output)
    if args.figure and records:
        from .plotting import plot_e2e

        plot_e2e(records, args.figure)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ese", description="Entropically secure encryption toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def cache_opts(sp):
        sp.add_argument("--modulus-cache", metavar="PATH",
                        help="modulus cache file (default: $ESE_MODULUS_CACHE or ~/.cache/ese/moduli.txt)")
        sp.add_argument("--no-cache", action="store_true", help="do not read or write the modulus cache")

    e = sub.add_parser("encrypt", help="encrypt a file into a container")
    e.add_argument("input")
    e.add_argument("-k", "--key", help="key material (file or named pipe)")
    e.add_argument("-o", "--output", help="container to write")
    e.add_argument("--chunk-size", type=parse_size, default=16 * MiB, help="bytes per chunk (default 16MiB)")
    e.add_argument("--eps-exp", type=int, default=DEFAULT_EPS_EXP, help="eps = 2^-EPS_EXP (default 128)")
    e.add_argument("--x-mode", choices=("seed", "embedded"), default="seed",
                   help="store a seed for the public string, or the string itself")
    e.add_argument("--threads", type=int, default=1)
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--entropy-ratio", type=_ratio,
                   help="estimated compressed/original ratio of the content")
    g.add_argument("--key-file-length", type=parse_size, metavar="SIZE",
                   help="spend this much key (bytes) on the whole file instead")
    e.add_argument("--data-ratio", type=_ratio, default=1.0,
                   help="ratio of the stored format the ratio refers to (default 1)")
    e.add_argument("--plan-only", action="store_true", help="print the key plan and stop")
    cache_opts(e)
    e.set_defaults(func=cmd_encrypt)

    d = sub.add_parser("decrypt", help="decrypt a container")
    d.add_argument("input")
    d.add_argument("-k", "--key", required=True)
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--threads", type=int, default=1)
    d.set_defaults(func=cmd_decrypt)

    s = sub.add_parser("estimate", help="compression-based entropy estimate of a corpus")
    s.add_argument("files", nargs="+", help="files or directories")
    s.add_argument("--compressor", default="lzma", help="store, zlib, bz2, lzma or a configured name")
    s.add_argument("--compressors-config", metavar="JSON",
                   help=f"external compressor definitions (default: ${ADAPTER_CONFIG_ENV})")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed", type=int, default=None, help="seed for picking the audited file")
    s.add_argument("--no-audit", action="store_true")
    s.add_argument("--payload-size", type=parse_size, help="recommend a key for this many bytes")
    s.add_argument("--data-ratio", type=_ratio, default=1.0)
    s.add_argument("--eps-exp", type=int, default=DEFAULT_EPS_EXP)
    s.add_argument("--output", "-o")
    s.add_argument("--figure", help="write a ratio plot to this image file")
    s.set_defaults(func=cmd_estimate)

    f = sub.add_parser("find-poly", help="find sparse irreducible moduli")
    f.add_argument("degrees", nargs="+", type=parse_size)
    f.add_argument("--at-least", action="store_true",
                   help="smallest structured modulus of degree >= N instead of exactly N")
    f.add_argument("--max-candidates", type=int, default=None)
    cache_opts(f)
    f.set_defaults(func=cmd_find_poly)

    def bench_opts(sp, ops, default_ops):
        sp.add_argument("--msg-bits", type=parse_sweep, required=True, help="e.g. 2^20..2^26")
        sp.add_argument("--key-bits", type=parse_sweep, required=True, help="e.g. 2^7..2^13")
        sp.add_argument("--workers", type=parse_ints, default=[1], help="e.g. 1,4")
        sp.add_argument("--ops", type=lambda t: [o.strip() for o in t.split(",")],
                        default=list(default_ops), help=f"subset of {','.join(ops)}")
        common(sp)

    def common(sp):
        sp.add_argument("--reps", type=int, default=5)
        sp.add_argument("--memory-budget", type=parse_size, default=None,
                        help="skip points whose working set exceeds this many bytes")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output", "-o")
        sp.add_argument("--figure", help="write a plot to this image file")

    bm = sub.add_parser("bench-mult", help="time multiplication over a size sweep")
    bench_opts(bm, ("base", "simplemult", "parallel"), ("base", "simplemult", "parallel"))
    bm.set_defaults(func=cmd_bench_mult)

    br = sub.add_parser("bench-reduce", help="time reduction over a size sweep")
    bench_opts(br, ("reduce", "parallel"), ("reduce", "parallel"))
    br.set_defaults(func=cmd_bench_reduce)

    be = sub.add_parser("bench-e2e", help="time end-to-end encryption over chunk sizes")
    be.add_argument("--file-size", type=parse_size, required=True)
    be.add_argument("--chunk-sizes", type=parse_sweep, required=True, help="e.g. 16MiB,32MiB")
    be.add_argument("--entropy-ratio", type=_ratio, required=True)
    be.add_argument("--data-ratio", type=_ratio, default=1.0)
    be.add_argument("--workers", type=int, default=1)
    be.add_argument("--eps-exp", type=int, default=DEFAULT_EPS_EXP)
    be.add_argument("--x-mode", choices=("seed", "embedded"), default="seed")
    common(be)
    be.set_defaults(func=cmd_bench_e2e)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", OtpFallbackWarning)
            status = args.func(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return status
    except EseError as exc:
        print(f"ese {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ese {args.command}: {exc}", file=sys.stderr)
        return IO_ERROR_EXIT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
