"""Figures for benchmark and entropy reports (matplotlib, file output only)."""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchRecord, E2ERecord  # noqa: E402
from .entropy import EntropyReport  # noqa: E402

__all__ = ["plot_sweep", "plot_e2e", "plot_entropy"]


def _save(fig, path: str | os.PathLike) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(records: list[BenchRecord], path: str | os.PathLike, title: str = "") -> None:
    """Median time against the swept operand size, one line per (op, workers).

    The x axis is key bits when the message size is fixed, else message bits.
    """
    by_key = len({r.key_bits for r in records}) > len({r.msg_bits for r in records})
    series = defaultdict(list)
    for r in records:
        series[(r.op, r.workers)].append((r.key_bits if by_key else r.msg_bits, r.seconds))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (op, w), pts in sorted(series.items()):
        pts.sort()
        label = op if op != "parallel" else f"{op} ({w} workers)"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("key length (bits)" if by_key else "message length (bits)")
    ax.set_ylabel("median time (s)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_e2e(records: list[E2ERecord], path: str | os.PathLike) -> None:
    """Per-phase time bars and encryption rate against chunk size."""
    records = sorted(records, key=lambda r: r.chunk_bytes)
    labels = [f"{r.chunk_bytes / (1 << 20):g}" for r in records]
    x = range(len(records))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    bottom = [0.0] * len(records)
    for name in ("mult_s", "red_s", "xor_s", "other_s"):
        vals = [getattr(r, name) for r in records]
        ax1.bar(x, vals, bottom=bottom, label=name[:-2])
        bottom = [b + v for b, v in zip(bottom, vals)]
    ax1.set_xticks(list(x), labels)
    ax1.set_xlabel("chunk size (MiB)")
    ax1.set_ylabel("time (s)")
    ax1.legend()
    ax2.plot(list(x), [r.enc_rate for r in records], marker="o")
    ax2.set_xticks(list(x), labels)
    ax2.set_xlabel("chunk size (MiB)")
    ax2.set_ylabel("encryption rate (MB/s)")
    ax2.grid(True, alpha=0.3)
    _save(fig, path)


def plot_entropy(report: EntropyReport, path: str | os.PathLike) -> None:
    """Per-file compression ratios with the mean and the mean - stddev line."""
    fig, ax = plt.subplots(figsize=(max(6.4, 0.35 * len(report.files)), 4.2))
    ratios = [f.ratio for f in report.files]
    ax.bar(range(len(ratios)), ratios, color="tab:blue")
    ax.axhline(report.mean_ratio, color="tab:green", label=f"mean {report.mean_ratio:.4f}")
    ax.axhline(report.heuristic_ratio, color="tab:red", linestyle="--",
               label=f"mean - stddev {report.heuristic_ratio:.4f}")
    ax.set_xticks(range(len(ratios)), [os.path.basename(f.name) for f in report.files],
                  rotation=60, ha="right", fontsize=7)
    ax.set_ylabel(f"compressed / original ({report.compressor})")
    ax.legend()
    _save(fig, path)
