"""Command-line runner: schemas and config handling, plus caching with byte-identical outputs."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from fracproj import __version__
from fracproj.cli import SCHEMAS, atomic_write, config_hash, describe, main

FIXTURES = Path(__file__).parent / "fixtures"

BERNOULLI_FILE = {"maps": [{"r": [0, 1], "s": [0]}, {"r": [0, 1], "s": [1]}], "interval": [0.55, 0.65]}

# small but complete invocations of every subcommand
SMALL = {
    "scan-bernoulli": ["--lambda", "0.60:0.63:0.01", "--depth", "9"],
    "entropy-profile": ["--grid", "0.55:0.65:0.05", "--depth", "8"],
    "transversality": ["--depth", "4", "--t-grid", "11"],
    "overlaps": ["--length", "3"],
    "project-cantor": ["--theta-grid", "6", "--depth", "8"],
    "assouad": ["--k", "2", "--m", "6", "--theta", "1:1"],
    "scenery": ["--measure", "four-corner-fiber", "--steps", "30", "--l", "6", "--seed", "7"],
    "uniform-entropy": ["--measure", "cantor3", "--n", "6", "--l", "4"],
    "spreading": ["--measure", "digits03", "--n", "10", "--l", "3"],
    "sumset-growth": ["--preset", "failed", "--n", "10"],
    "regularize": ["--measure", "random", "--T", "2", "--l", "3", "--seed", "4"],
    "porosity": ["--set", "point", "--n", "8", "--point", "5"],
}


@pytest.fixture(autouse=True)
def no_cache(monkeypatch):
    monkeypatch.delenv("FRACPROJ_CACHE", raising=False)


def invoke(sub, args, out, tmp_path):
    extra = []
    if sub == "entropy-profile":
        path = tmp_path / "bernoulli.json"
        path.write_text(json.dumps(BERNOULLI_FILE))
        extra = ["--ifs", str(path)]
    return main([sub, *args, *extra, "--out", str(out)])


def read_dir(path: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


# ----------------------------------------------------------------------
# describe
def test_describe_scan_bernoulli(capsys):
    """The scan schema lists its grid fields and carries a runnable example."""
    assert main(["describe", "scan-bernoulli"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert {"lambda", "depth", "guard"} <= set(out["fields"])
    assert out["fields"]["lambda"]["type"] == "str"
    assert out["example"]["subcommand"] == "scan-bernoulli"


def test_describe_scenery_presets():
    """The scenery schema names its three measure presets."""
    out = describe("scenery")
    assert sorted(out["measure_presets"]) == ["bernoulli", "cantor3", "four-corner-fiber"]
    assert out["fields"]["measure"]["choices"] == ["bernoulli", "cantor3", "four-corner-fiber"]


def test_describe_unknown_suggests(capsys):
    """A misspelt subcommand exits with status 2 and suggests the closest name."""
    assert main(["describe", "scan-bernul"]) == 2
    err = capsys.readouterr().err
    assert "scan-bernoulli" in err and "unknown subcommand" in err


@pytest.mark.parametrize("sub", sorted(SCHEMAS))
def test_describe_examples_run(sub, tmp_path):
    """Every example config validates and runs (with its cheap knobs)."""
    example = describe(sub)["example"]
    cfg_path = tmp_path / "cfg.json"
    if sub == "entropy-profile":
        ifs_path = tmp_path / "bernoulli.json"
        ifs_path.write_text(json.dumps(BERNOULLI_FILE))
        example = {**example, "ifs": str(ifs_path), "depth": 8}
    cfg_path.write_text(json.dumps(example))
    assert main([sub, "--config", str(cfg_path), "--out", str(tmp_path / "out")]) == 0


# ----------------------------------------------------------------------
# determinism and headers
@pytest.mark.parametrize("sub", sorted(SMALL))
def test_outputs_byte_identical(sub, tmp_path):
    """Two runs of the same config write identical bytes, and every file carries its provenance header."""
    a, b = tmp_path / "a", tmp_path / "b"
    assert invoke(sub, SMALL[sub], a, tmp_path) == 0
    assert invoke(sub, SMALL[sub], b, tmp_path) == 0
    first, second = read_dir(a), read_dir(b)
    assert first == second
    assert first
    for name, data in first.items():
        text = data.decode()
        if name.endswith(".csv"):
            head = text.splitlines()[0]
            assert head.startswith(f"# fracproj {__version__} {sub} config_hash=")
            assert "seed=" in head
        else:
            meta = json.loads(text)["meta"]
            assert meta["version"] == __version__
            assert meta["subcommand"] == sub
            assert meta["config_hash"] == config_hash(sub, meta["config"])
            assert "seed" in meta


def test_jobs_do_not_change_output(tmp_path):
    """A parallel sweep writes the same bytes as a serial one."""
    args = ["--lambda", "0.58:0.64:0.02", "--depth", "9"]
    assert main(["scan-bernoulli", *args, "--out", str(tmp_path / "a")]) == 0
    assert main(["scan-bernoulli", *args, "--jobs", "2", "--out", str(tmp_path / "b")]) == 0
    assert read_dir(tmp_path / "a") == read_dir(tmp_path / "b")


def test_sumset_growth_matches_fixture(tmp_path):
    """The positive preset at n = 12 reproduces the additive module's frozen record."""
    assert main(["sumset-growth", "--n", "12", "--gamma", "0.25", "--preset", "positive", "--out", str(tmp_path)]) == 0
    result = json.loads((tmp_path / "growth.json").read_text())["result"]
    assert result == json.loads((FIXTURES / "growth_positive_n12.json").read_text())


def test_scan_bernoulli_flags_golden(tmp_path):
    """A sweep through the golden ratio writes the profile CSV and names the overlap witness."""
    assert main(["scan-bernoulli", "--lambda", "0.61:0.63:0.002", "--depth", "12", "--threshold", "0.0103", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "profile.csv").read_text().splitlines()
    assert rows[1] == "t,n,entropy_bits,normalized,sd,deficit,flagged"
    assert len(rows) == 2 + 11
    dips = json.loads((tmp_path / "dips.json").read_text())["result"]
    assert [d["index"] for d in dips["flagged"]] == [4]
    assert set(dips["flagged"][0]["witness"]["words"]) == {"011", "100"}


@pytest.mark.slow
def test_scan_bernoulli_documented_example(tmp_path):
    """The documented sweep over [0.50, 0.65] at depth 14 writes 31 rows and starts at full entropy."""
    assert main(["scan-bernoulli", "--lambda", "0.50:0.65:0.005", "--depth", "14", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 31
    assert float(rows[0][0]) == 0.5 and float(rows[0][3]) == 1.0
    assert all(0.0 < float(r[3]) <= 1.0 for r in rows)
    dips = json.loads((tmp_path / "dips.json").read_text())["result"]
    assert all(0 <= d["index"] < 31 for d in dips["flagged"])


# ----------------------------------------------------------------------
# configs
def test_config_overrides_flags(tmp_path):
    """Values from the config file win over command-line flags."""
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 10, "preset": "failed"}))
    assert main(["sumset-growth", "--n", "8", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "growth.json").read_text())["meta"]
    assert meta["config"]["n"] == 10


def test_config_unknown_field(tmp_path, capsys):
    """An unknown key is reported with its line and the closest field name."""
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "preset": "failed",\n  "gama": 0.3\n}\n')
    assert main(["sumset-growth", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:3:" in err and "'gama'" in err and "did you mean 'gamma'" in err


def test_config_type_error(tmp_path, capsys):
    """A value of the wrong type names the field and the expected type."""
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n": "twelve"}')
    assert main(["sumset-growth", "--config", str(cfg)]) == 2
    assert "field 'n': expected int" in capsys.readouterr().err


def test_config_invalid_json(tmp_path, capsys):
    """Malformed JSON is reported with line and column."""
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "n": 12,\n}')
    assert main(["sumset-growth", "--config", str(cfg)]) == 2
    assert f"{cfg}:3:1: invalid JSON" in capsys.readouterr().err


def test_config_wrong_subcommand(tmp_path, capsys):
    """A config written for another subcommand is rejected."""
    cfg = tmp_path / "c.json"
    cfg.write_text('{"subcommand": "porosity"}')
    assert main(["sumset-growth", "--config", str(cfg)]) == 2
    assert "not 'sumset-growth'" in capsys.readouterr().err


def test_bad_range_and_jobs(capsys, tmp_path):
    """Malformed grids and a zero worker count are configuration errors."""
    assert main(["scan-bernoulli", "--lambda", "0.6:0.5:0.01", "--out", str(tmp_path)]) == 2
    assert main(["scenery", "--jobs", "0", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "field 'lambda'" in err and "--jobs" in err


def test_failed_hypothesis_exit_status(capsys, tmp_path):
    """A porosity run on the full grid exits with status 4 and names the failing point."""
    assert main(["porosity", "--set", "full", "--n", "8", "--out", str(tmp_path)]) == 4
    assert "single-child hypothesis fails" in capsys.readouterr().err


# ----------------------------------------------------------------------
# cache and atomic writes
def test_cache_hit_reproduces_bytes(tmp_path, monkeypatch, capsys):
    """With a cache directory the second run is served from it and writes the same bytes."""
    monkeypatch.setenv("FRACPROJ_CACHE", str(tmp_path / "cache"))
    args = ["spreading", "--n", "10", "--l", "2", "--measure", "lebesgue"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert capsys.readouterr().out.startswith("wrote ")
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    assert capsys.readouterr().out.startswith("cached ")
    assert read_dir(tmp_path / "a") == read_dir(tmp_path / "b")
    assert main([*args, "--no-cache", "--out", str(tmp_path / "c")]) == 0
    assert capsys.readouterr().out.startswith("wrote ")
    manifests = list((tmp_path / "cache" / "spreading").glob("*/MANIFEST"))
    assert len(manifests) == 1
    assert manifests[0].read_text().split() == ["spreading.json"]


def test_cache_key_changes_with_config(tmp_path, monkeypatch):
    """Different configs occupy different cache entries."""
    monkeypatch.setenv("FRACPROJ_CACHE", str(tmp_path / "cache"))
    for n in (8, 10):
        assert main(["spreading", "--n", str(n), "--out", str(tmp_path / str(n))]) == 0
    assert len(list((tmp_path / "cache" / "spreading").iterdir())) == 2


def test_atomic_write_replaces_and_cleans(tmp_path):
    """The target is replaced in one step and no temporary files remain."""
    target = tmp_path / "sub" / "f.txt"
    atomic_write(target, "one\n")
    atomic_write(target, "two\n")
    assert target.read_text() == "two\n"
    assert [p.name for p in target.parent.iterdir()] == ["f.txt"]


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    """A failed write leaves the previous content untouched."""
    target = tmp_path / "f.txt"
    atomic_write(target, "old\n")
    with pytest.raises(TypeError):
        atomic_write(target, 12345)
    assert target.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]


def test_module_entry_point():
    """``python -m fracproj`` runs the same parser."""
    out = subprocess.run([sys.executable, "-m", "fracproj", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == f"fracproj {__version__}"
