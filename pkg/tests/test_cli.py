import argparse
import os
import subprocess
import sys

import pytest

from ese.cli import CAVEAT, main, parse_ints, parse_size, parse_sweep
from ese.entropy import get_adapter, estimate_entropy_corpus


@pytest.fixture(autouse=True)
def _cache(tmp_path, monkeypatch):
    monkeypatch.setenv("ESE_MODULUS_CACHE", str(tmp_path / "moduli.txt"))


def test_parse_size():
    assert parse_size("256MiB") == 256 << 20
    assert parse_size("5MB") == 5 * 10**6
    assert parse_size("1.5KiB") == 1536
    assert parse_size("2^20") == 1 << 20
    assert parse_size("1_000") == 1000
    for bad in ("abc", "1.3B", "5XB"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_size(bad)


def test_parse_sweep_and_ints():
    assert parse_sweep("2^4..2^7") == [16, 32, 64, 128]
    assert parse_sweep("2^4..2^8:2") == [16, 64, 256]
    assert parse_sweep("1KiB,3") == [1024, 3]
    assert parse_ints("1,2, 4") == [1, 2, 4]
    for bad in ("8..4", ""):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_sweep(bad)
    for bad in ("a", "0", ""):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_ints(bad)


def _files(tmp_path, size=5000, key=10_000):
    pt, key_path = tmp_path / "pt", tmp_path / "key"
    pt.write_bytes(os.urandom(size))
    key_path.write_bytes(os.urandom(key))
    return pt, key_path


def test_encrypt_decrypt_roundtrip(tmp_path, capsys):
    pt, key = _files(tmp_path)
    ct, back = tmp_path / "ct", tmp_path / "back"
    rc = main(["encrypt", str(pt), "-k", str(key), "-o", str(ct), "--chunk-size", "2KiB",
               "--entropy-ratio", "0.6", "--x-mode", "embedded"])
    out = capsys.readouterr().out
    assert rc == 0
    for needle in ("per-chunk key:", "total key bits consumed:", "encryption rate:",
                   "key consumption rate:", "bit/s", CAVEAT):
        assert needle in out
    assert main(["decrypt", str(ct), "-k", str(key), "-o", str(back), "--threads", "2"]) == 0
    assert back.read_bytes() == pt.read_bytes()


def test_encrypt_with_key_budget(tmp_path, capsys):
    pt, key = _files(tmp_path, size=8192, key=3000)
    ct, back = tmp_path / "ct", tmp_path / "back"
    assert main(["encrypt", str(pt), "-k", str(key), "-o", str(ct), "--chunk-size", "4KiB",
                 "--key-file-length", "2000"]) == 0
    out = capsys.readouterr().out
    assert CAVEAT not in out
    assert main(["decrypt", str(ct), "-k", str(key), "-o", str(back)]) == 0
    assert back.read_bytes() == pt.read_bytes()


def test_plan_only_reports_chunk_keys(tmp_path, capsys):
    big = tmp_path / "big"
    with open(big, "wb") as fh:
        fh.truncate(1 << 30)
    assert main(["encrypt", str(big), "--chunk-size", "256MiB", "--entropy-ratio", "0.043",
                 "--data-ratio", "0.049", "--plan-only"]) == 0
    out = capsys.readouterr().out
    assert "4 chunk(s)" in out
    assert "31.3470 MiB" in out


@pytest.mark.parametrize("args,code", [
    (["--entropy-ratio", "0.5"], 5),              # key too short
    (["--entropy-ratio", "0.5", "--data-ratio", "0.4"], 6),
    (["--entropy-ratio", "0.5", "--chunk-size", "10"], 3),
    (["--entropy-ratio", "2"], 2),                # argparse rejects ratio > 1
    ([], 2),                                      # ratio or budget is required
])
def test_encrypt_exit_codes(tmp_path, args, code):
    pt, _ = _files(tmp_path)
    key = tmp_path / "short"
    key.write_bytes(b"\x01" * 10)
    argv = ["encrypt", str(pt), "-k", str(key), "-o", str(tmp_path / "ct")] + args
    if code == 2:
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    else:
        assert main(argv) == code


def test_zero_key_exit_code(tmp_path):
    pt, _ = _files(tmp_path)
    key = tmp_path / "zero"
    key.write_bytes(bytes(10_000))
    assert main(["encrypt", str(pt), "-k", str(key), "-o", str(tmp_path / "ct"),
                 "--entropy-ratio", "0.5"]) == 4


def test_decrypt_exit_codes(tmp_path):
    junk = tmp_path / "junk"
    junk.write_bytes(b"not a container")
    key = tmp_path / "k"
    key.write_bytes(b"k")
    assert main(["decrypt", str(junk), "-k", str(key), "-o", str(tmp_path / "o")]) == 7
    assert main(["decrypt", str(tmp_path / "missing"), "-k", str(key),
                 "-o", str(tmp_path / "o")]) == 10


def test_estimate_output_is_the_report(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(3):
        (corpus / f"f{i}.txt").write_bytes((b"abc%d" % i) * (500 + 100 * i) + os.urandom(50))
    fig = tmp_path / "e.png"
    assert main(["estimate", str(corpus), "--compressor", "zlib", "--seed", "0",
                 "--payload-size", "1MB", "--figure", str(fig)]) == 0
    cap = capsys.readouterr()
    files = sorted(str(p) for p in corpus.iterdir())
    want = estimate_entropy_corpus(files, get_adapter("zlib"), audit=False).to_text()
    assert cap.out == want
    assert "recommended key" in cap.err and CAVEAT in cap.err
    assert fig.read_bytes()[:4] == b"\x89PNG"
    out = tmp_path / "r.csv"
    assert main(["estimate", str(corpus), "--compressor", "zlib", "-o", str(out)]) == 0
    assert out.read_text() == want


def test_estimate_errors(tmp_path):
    f = tmp_path / "a"
    f.write_bytes(b"x" * 100)
    assert main(["estimate", str(f), "--compressor", "nope"]) == 3
    g = tmp_path / "b"
    g.write_bytes(os.urandom(100))
    # one highly compressible and one random file: mean - stddev < 0
    assert main(["estimate", str(f), str(g), "--compressor", "zlib"]) == 6


def test_find_poly(capsys, tmp_path):
    assert main(["find-poly", "8", "127", "--modulus-cache", str(tmp_path / "c.txt")]) == 0
    assert capsys.readouterr().out == "8:8,4,3,1,0\n127:127,1,0\n"
    assert (tmp_path / "c.txt").read_text() == "8:8,4,3,1,0\n127:127,1,0\n"
    assert main(["find-poly", "2^20", "--at-least", "--no-cache"]) == 0
    assert int(capsys.readouterr().out.split(":")[0]) >= 1 << 20
    assert main(["find-poly", "1031", "--max-candidates", "1", "--no-cache"]) == 9


def test_bench_commands(tmp_path, capsys):
    fig = tmp_path / "m.png"
    assert main(["bench-mult", "--msg-bits", "2^12..2^13", "--key-bits", "64", "--workers",
                 "1,2", "--reps", "3", "--figure", str(fig)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("op,msg_bits,key_bits,workers")
    assert len(out) == 1 + 2 * 4
    assert fig.exists()
    assert main(["bench-reduce", "--msg-bits", "2^12", "--key-bits", "64", "--reps", "3",
                 "-o", str(tmp_path / "r.csv")]) == 0
    assert (tmp_path / "r.csv").read_text().startswith("op,")
    assert main(["bench-e2e", "--file-size", "64KiB", "--chunk-sizes", "16KiB,32KiB",
                 "--entropy-ratio", "0.5", "--reps", "3", "--figure", str(tmp_path / "e.png")]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3
    assert (tmp_path / "e.png").exists()
    assert main(["bench-mult", "--msg-bits", "2^12", "--key-bits", "64", "--reps", "1"]) == 3


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ese.cli", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ese ")
