import json

import numpy as np
import pandas as pd
import pytest

from core.artifacts import (
    curve_config_hash,
    header_line,
    read_curve_csv,
    to_jsonable,
    write_csv,
    write_json,
)
from core.errors import CsvParseError
from core.storage.pole_cache import PoleCache, canonical_json, config_hash


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1.5, 2]}) == config_hash({"b": [1.5, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'


def test_pole_cache_round_trip(barrier_poles, barrier, params):
    cache = PoleCache()
    key = config_hash({"case": "round-trip"})
    path = cache.save_poles(key, {"case": "round-trip"}, barrier_poles)
    assert path.exists()
    loaded = cache.load_poles(key, barrier, params)
    assert loaded.resonance_count == barrier_poles.resonance_count
    assert len(loaded.imaginary) == len(barrier_poles.imaginary)
    for original, restored in zip(barrier_poles.resonances, loaded.resonances):
        assert restored.kappa.value == original.kappa.value
        np.testing.assert_allclose(restored.u_lo, original.u_lo, rtol=1e-12)
    assert loaded.lifetime_tau1 == barrier_poles.lifetime_tau1


def test_coefficient_cache_round_trip(gaussian_coeffs, gaussian, barrier_poles):
    cache = PoleCache()
    key = config_hash({"case": "coefficients"})
    cache.save_coefficients(key, {"case": "coefficients"}, gaussian_coeffs)
    loaded = cache.load_coefficients(key, gaussian, barrier_poles)
    np.testing.assert_array_equal(loaded.n, gaussian_coeffs.n)
    np.testing.assert_array_equal(loaded.kappa, gaussian_coeffs.kappa)
    np.testing.assert_array_equal(loaded.c, gaussian_coeffs.c)
    np.testing.assert_array_equal(loaded.c_bar, gaussian_coeffs.c_bar)


def test_coefficient_cache_rejects_other_state_or_pole_set(gaussian_coeffs, gaussian, sine, barrier_poles):
    cache = PoleCache()
    key = config_hash({"case": "stale"})
    path = cache.save_coefficients(key, {"case": "stale"}, gaussian_coeffs)
    assert cache.load_coefficients(key, sine, barrier_poles) is None
    assert cache.load_coefficients(key, gaussian, barrier_poles.truncated(20)) is None
    # 同样内容放在别的键下
    other = config_hash({"case": "moved"})
    path.rename(cache.directory / f"coefficients-{other}.jsonl")
    assert cache.load_coefficients(other, gaussian, barrier_poles) is None


def test_cache_miss_and_disabled(monkeypatch, barrier_poles, barrier, params):
    cache = PoleCache()
    assert cache.load_poles("missing", barrier, params) is None
    monkeypatch.setenv("DECAY_CACHE_ENABLED", "false")
    disabled = PoleCache()
    assert disabled.save_poles("k", {}, barrier_poles) is None
    assert disabled.load_poles("k", barrier, params) is None


def test_foreign_cache_file_is_ignored(barrier, params):
    cache = PoleCache()
    path = cache.directory / "poles-bad.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('{"format": "something-else", "version": 1}\n{"n": 1}\n', encoding="utf-8")
    assert cache.load_poles("bad", barrier, params) is None
    path.write_text("not json\n", encoding="utf-8")
    assert cache.load_poles("bad", barrier, params) is None


def test_write_csv_is_deterministic(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 0.1, 1.0 / 3.0], "S": [1.0, 0.987654321012345678, 2.0 ** -40]})
    first = write_csv(frame, tmp_path / "a.csv", "abc123")
    second = write_csv(frame, tmp_path / "b.csv", "abc123")
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text(encoding="utf-8").splitlines()
    assert lines[0] == header_line("abc123").rstrip("\n")
    assert lines[0].startswith("# config_sha256=abc123 resonant-decay=")
    assert lines[1] == "t,S"
    restored = read_curve_csv(first)
    np.testing.assert_array_equal(restored["t"].to_numpy(), frame["t"].to_numpy())
    np.testing.assert_array_equal(restored["S"].to_numpy(), frame["S"].to_numpy())
    assert curve_config_hash(first) == "abc123"


def test_read_curve_accepts_output_column_names(tmp_path):
    path = tmp_path / "oracle.csv"
    path.write_text("# header\nt_fs,S_oracle\n0,1\n0.5,0.75\n", encoding="utf-8")
    frame = read_curve_csv(path)
    assert list(frame.columns) == ["t", "S"]
    assert frame["S"].tolist() == [1.0, 0.75]
    path.write_text("t,S,sigma\n1,0.9,0.01\n", encoding="utf-8")
    assert list(read_curve_csv(path, require_sigma=True).columns) == ["t", "S", "sigma"]


@pytest.mark.parametrize(
    "content, line",
    [
        ("# c\nt,S\n0.1,0.9\n0.2,abc\n", 4),
        ("t,S\n0.1,0.9,5\n", 2),
        ("time,prob\n0.1,0.9\n", 1),
        ("# only a comment\n", 1),
    ],
)
def test_malformed_curves_report_line(tmp_path, content, line):
    path = tmp_path / "bad.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(CsvParseError) as excinfo:
        read_curve_csv(path)
    assert excinfo.value.line == line
    assert excinfo.value.exit_code == 2


def test_missing_sigma_and_missing_file(tmp_path):
    path = tmp_path / "curve.csv"
    path.write_text("t,S\n1,0.9\n", encoding="utf-8")
    with pytest.raises(CsvParseError):
        read_curve_csv(path, require_sigma=True)
    with pytest.raises(CsvParseError):
        read_curve_csv(tmp_path / "absent.csv")
    assert curve_config_hash(tmp_path / "absent.csv") is None


def test_jsonable_conversion(tmp_path):
    data = {
        "c": 1 + 2j,
        "arr": np.array([1.0, np.nan]),
        "n": np.int64(3),
        "x": np.float64(0.5),
        "inf": float("inf"),
        (1): ("a", np.complex128(-1j)),
    }
    assert to_jsonable(data) == {
        "c": {"re": 1.0, "im": 2.0},
        "arr": [1.0, None],
        "n": 3,
        "x": 0.5,
        "inf": None,
        "1": ["a", {"re": -0.0, "im": -1.0}],
    }
    path = write_json(data, tmp_path / "out" / "data.json")
    assert json.loads(path.read_text(encoding="utf-8"))["n"] == 3
