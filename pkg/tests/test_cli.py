import json
import os
import subprocess
import sys

import numpy as np
import pytest

from compbf import _io
from compbf.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, argv_from_manifest, main
from compbf.montecarlo import read_ccdf_csv


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    return main(argv + ["--out-dir", str(out)]), out


def files(path):
    return sorted(p.name for p in path.iterdir()) if path.exists() else []


def test_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert run(["bogus"], tmp_path)[0] == EXIT_USAGE
    assert run(["tables", "--which", "3"], tmp_path)[0] == EXIT_USAGE
    assert run(["tables"], tmp_path)[0] == EXIT_USAGE
    assert run(["optimize", "--coherence", ""], tmp_path)[0] == EXIT_USAGE
    assert run(["optimize", "--coherence", "20", "--mode", "fixed-nt"], tmp_path)[0] == EXIT_USAGE
    assert run(["ccdf", "--k", "x"], tmp_path)[0] == EXIT_USAGE
    assert run(["ccdf"], tmp_path)[0] == EXIT_USAGE
    assert run(["ccdf", "--k", "2", "--mode", "conditional"], tmp_path)[0] == EXIT_USAGE
    assert run(["validate", "--only", "nope"], tmp_path)[0] == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err
    assert files(tmp_path / "out") == []


def test_domain_errors_leave_no_files(tmp_path, capsys):
    code, out = run(["ccdf", "--k", "2", "--beta", "2", "--kinds", "upper_bound"], tmp_path)
    assert code == EXIT_DOMAIN
    assert "beta" in capsys.readouterr().err
    # a later curve fails after earlier ones were written: everything is rolled back
    code, out = run(["ccdf", "--k", "1,3", "--nt", "2", "--kinds", "upper_bound"], tmp_path)
    assert code == EXIT_DOMAIN and files(out) == []
    assert run(["optimize", "--coherence", "3", "--mode", "fixed-nt", "--nt", "4"], tmp_path)[0] == EXIT_DOMAIN


def test_tables_output(tmp_path, capsys):
    code, out = run(["tables", "--which", "1"], tmp_path)
    assert code == EXIT_OK
    assert files(out) == ["manifest.json", "table1.csv"]
    lines = (out / "table1.csv").read_text().splitlines()
    assert lines[0] == "# compbf-csv v1" and lines[1] == "# table=table1"
    assert lines[2].split(",") == ["row", "K", "delta1", "alpha", "C", "gain_vs_K1_percent",
                                   "reference", "rel_err"]
    assert len(lines) == 6
    C = [float(l.split(",")[4]) for l in lines[3:]]
    assert C == pytest.approx([5.377, 3.3361, 2.1318], rel=1e-3)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "tables" and manifest["outputs"] == ["table1.csv"]
    assert manifest["version"] and manifest["seed"] == 0


def test_ccdf_analytic_and_byte_identical_rerun(tmp_path):
    argv = ["ccdf", "--k", "2", "--nt", "2,4", "--kinds", "upper_bound,lower_bound,approximation"]
    code, a = run(argv, tmp_path, "a")
    assert code == EXIT_OK
    assert len(files(a)) == 7
    code, b = run(argv, tmp_path, "b")
    for name in files(a):
        if name != "manifest.json":
            assert (a / name).read_bytes() == (b / name).read_bytes()
    curve = read_ccdf_csv(a / "ccdf_marginal_K2_nt4_b4_upper_bound.csv")
    assert np.all(np.diff(curve["ccdf"]) <= 0)


def test_ccdf_empirical_and_manifest_replay(tmp_path):
    argv = ["ccdf", "--k", "2", "--kinds", "empirical", "--trials", "3000", "--seed", "9",
            "--gamma-db=-5,0,5"]
    code, a = run(argv, tmp_path, "a")
    assert code == EXIT_OK
    assert files(a) == ["ccdf_marginal_K2_nt2_b4_empirical.csv",
                        "ccdf_marginal_K2_nt2_b4_empirical.json", "manifest.json"]
    manifest = json.loads((a / "manifest.json").read_text())
    replay = argv_from_manifest(manifest)
    replay = [x for x in replay if not x.startswith("--out-dir=")] + [f"--out-dir={tmp_path / 'b'}"]
    assert main(replay) == EXIT_OK
    name = "ccdf_marginal_K2_nt2_b4_empirical.csv"
    assert (a / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    side = json.loads((a / name.replace(".csv", ".json")).read_text())
    assert side["seed"] == 9 and side["trials"] == 3000


def test_ccdf_fig_presets(tmp_path):
    code, out = run(["ccdf", "--fig", "2"], tmp_path, "f2")
    assert code == EXIT_OK and len(files(out)) == 13
    code, out = run(["ccdf", "--fig", "3"], tmp_path, "f3")
    assert code == EXIT_OK and len(files(out)) == 6
    code, out = run(["ccdf", "--fig", "8", "--k", "1", "--trials", "500"], tmp_path, "f8")
    assert code == EXIT_OK
    assert files(out) == ["ccdf_grid_K1_nt1_b4_empirical.csv", "ccdf_grid_K1_nt1_b4_empirical.json",
                          "manifest.json"]


def test_optimize_output(tmp_path, capsys):
    code, out = run(["optimize", "--coherence", "20,200"], tmp_path)
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "K*=2" in text and "K*=5" in text
    rows = (out / "optimize.csv").read_text().splitlines()[3:]
    stars = [r.split(",") for r in rows if r.endswith(",1")]
    assert [(s[2], s[3]) for s in stars] == [("20.0", "2"), ("200.0", "5")]
    code, _ = run(["optimize", "--coherence", "200", "--mode", "fixed-nt", "--nt", "4"], tmp_path, "b")
    assert code == EXIT_OK and "K*=2" in capsys.readouterr().out


def test_validate_only_and_injected_failure(tmp_path, capsys, monkeypatch):
    code, out = run(["validate", "--only", "special_functions,table1"], tmp_path, "a")
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [l.split()[0] for l in lines] == ["PASS", "PASS"]
    assert files(out) == ["manifest.json", "validation.csv"]
    monkeypatch.setenv("COMPBF_INJECT_FAILURE", "table1")
    code, out = run(["validate", "--only", "special_functions,table1"], tmp_path, "b")
    assert code == EXIT_VALIDATION
    captured = capsys.readouterr()
    assert "FAIL table1" in captured.out and "table1" in captured.err
    assert "PASS special_functions" in captured.out


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "compbf.cli", "tables", "--which", "7",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == EXIT_USAGE


def test_atomic_write_keeps_old_file_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "sub" / "x.csv"
    _io.atomic_write_text(target, "old\n")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        _io.atomic_write_text(target, "new\n")
    assert target.read_text() == "old\n"
    assert files(target.parent) == ["x.csv"]
