import json
import os
import shutil

import pytest

from ese.entropy import (
    BuiltinAdapter,
    CommandAdapter,
    CompressorAdapter,
    EntropyReport,
    FileRatio,
    builtin_adapters,
    compress_ratio,
    estimate_entropy_corpus,
    get_adapter,
    load_adapters,
    recommend_key_params,
    recommend_whole_file,
    report_from_table,
)
from ese.errors import CompressorError, InvalidEstimateError, ParameterError

TEXT = b"the quick brown fox jumps over the lazy dog\n" * 200


def test_builtin_adapters_roundtrip():
    for name, a in builtin_adapters().items():
        assert a.name == name and a.lossless
        assert a.decompress(a.compress(TEXT)) == TEXT
    assert builtin_adapters()["store"].compress(b"abc")[-3:] == b"abc"
    with pytest.raises(CompressorError):
        builtin_adapters()["store"].decompress(b"junkjunkjunkjunk")


def test_compress_ratio_on_bytes_and_paths(tmp_path):
    lz = get_adapter("lzma")
    assert compress_ratio(TEXT, lz) < 0.1
    p = tmp_path / "t.txt"
    p.write_bytes(os.urandom(5000))
    assert compress_ratio(p, lz) > 0.99
    with pytest.raises(ParameterError):
        compress_ratio(b"", lz)


def test_report_statistics_exact():
    rep = report_from_table([("b", 10, 5), ("a", 10, 4), ("c", 10, 6)], "t")
    assert [f.name for f in rep.files] == ["a", "b", "c"]
    assert (rep.mean_ratio, rep.stddev_ratio, rep.heuristic_ratio) == (0.5, 0.1, 0.4)
    assert (rep.min_ratio, rep.max_ratio) == (0.4, 0.6)


def test_report_single_file_and_irrational_root():
    one = report_from_table([("a", 10, 3)])
    assert one.stddev_ratio == 0 and one.heuristic_ratio == 0.3
    two = report_from_table([("a", 10, 3), ("b", 10, 4)])
    assert abs(two.stddev_ratio - 0.0707106781) < 1e-9


def test_report_text_format():
    rep = report_from_table([("x", 1000, 43), ("y", 1000, 49), ("z", 1000, 55)], "lzma")
    lines = rep.to_text().splitlines()
    assert lines[0] == "filename,bytes,compressed_bytes,ratio"
    assert lines[1] == "x,1000,43,0.043000"
    assert lines[-1] == ("# compressor=lzma files=3 mean=0.049000 stddev=0.006000 "
                         "heuristic=0.043000")
    assert rep.to_text(sep="\t").splitlines()[1] == "x\t1000\t43\t0.043000"


def test_non_positive_heuristic_is_rejected():
    with pytest.raises(InvalidEstimateError):
        report_from_table([("a", 100, 1), ("b", 100, 99)])
    with pytest.raises(ParameterError):
        EntropyReport("x", [])
    with pytest.raises(ParameterError):
        report_from_table([("a", 0, 1)])


def test_estimate_corpus_with_audit(tmp_path):
    files = []
    for i in range(4):
        p = tmp_path / f"f{i}"
        p.write_bytes(TEXT[: 1000 + 500 * i] + os.urandom(100))
        files.append(p)
    rep = estimate_entropy_corpus(files, get_adapter("zlib"), workers=2, seed=1)
    assert len(rep.files) == 4 and rep.audited in {str(f) for f in files}
    assert rep.compressor == "zlib"
    assert 0 < rep.heuristic_ratio < rep.mean_ratio < 1
    with pytest.raises(ParameterError):
        estimate_entropy_corpus([], get_adapter("zlib"))


class _Lossy(CompressorAdapter):
    name, lossless = "lossy", True

    def compress(self, data):
        return data[: len(data) // 2]

    def decompress(self, data):
        return data


def test_audit_detects_lossy_compressor():
    with pytest.raises(CompressorError):
        estimate_entropy_corpus([TEXT], _Lossy(), seed=0)
    rep = estimate_entropy_corpus([TEXT], _Lossy(), audit=False)
    assert rep.mean_ratio == 0.5 and rep.audited is None


def test_declared_lossy_adapter_is_refused():
    a = BuiltinAdapter("x", lambda d: d, lambda d: d, lossless=False)
    with pytest.raises(CompressorError):
        compress_ratio(TEXT, a)


@pytest.mark.skipif(shutil.which("gzip") is None, reason="gzip not installed")
def test_command_adapter(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps([{"name": "gz", "compress": "gzip -9 -c {input} > {output}",
                                "decompress": "gzip -d -c {input} > {output}"}]))
    a = get_adapter("gz", cfg)
    assert isinstance(a, CommandAdapter)
    assert a.decompress(a.compress(TEXT)) == TEXT
    bad = CommandAdapter("bad", "false")
    with pytest.raises(CompressorError):
        bad.compress(TEXT)
    with pytest.raises(CompressorError):
        CommandAdapter("nodecomp", "cat {input} > {output}").decompress(b"x")


def test_adapter_config_errors(tmp_path, monkeypatch):
    with pytest.raises(ParameterError):
        get_adapter("nope")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps([{"name": "l", "compress": "cat", "lossless": False}]))
    with pytest.raises(ParameterError):
        load_adapters(cfg)
    cfg.write_text(json.dumps([{"compress": "cat"}]))
    with pytest.raises(ParameterError):
        load_adapters(cfg)
    with pytest.raises(ParameterError):
        load_adapters(tmp_path / "missing.json")
    cfg.write_text(json.dumps([{"name": "cp", "compress": "cp {input} {output}"}]))
    monkeypatch.setenv("ESE_COMPRESSORS", str(cfg))
    assert get_adapter("cp").name == "cp"


def test_recommendations():
    rep = report_from_table([("a", 1000, 43), ("b", 1000, 49), ("c", 1000, 55)])
    p = recommend_key_params(rep, 8 * 10**9, 128, data_ratio=0.049)
    assert p.t == (8 * 10**9 * 43) // 49
    assert p.ell == 8 * 10**9 - p.t + 256
    raw = recommend_key_params(rep, 8000, 128)
    assert raw.t == 344
    with pytest.raises(InvalidEstimateError):
        recommend_key_params(rep, 8000, 128, data_ratio=0.01)
    with pytest.raises(ParameterError):
        recommend_key_params(rep, 0)
    w = recommend_whole_file(40_000_000, 36_960_000, 128)
    assert w.ell == 3_040_256
    with pytest.raises(InvalidEstimateError):
        recommend_whole_file(100, 101)


def test_file_ratio():
    f = FileRatio("a", 8, 3)
    assert f.ratio == 0.375
