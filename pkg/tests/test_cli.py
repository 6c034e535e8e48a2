import json
import os

import pytest

from coulomb_lab.cli import OUTPUT_ENV, SCHEMAS, ReportRow, emit_report, main

GOLDEN = {
    "critical-scan": "N,F_cr,F_cr_over_N",
    "gibbs-variance": "N,d_N,scaled_d_N,method",
    "density-profile": "bin_center,rho",
    "tent-minima": "minimum_id,energy,num_pinned_left",
    "lclt-check": "N,sup_error",
    "bessel-check": "alpha,z,lhs,rhs,rel_err",
}

FAST = {
    "critical-scan": ["--L", "1", "--N", "5,10"],
    "gibbs-variance": ["--family", "power", "--alpha", "1", "--N", "5"],
    "density-profile": ["--N", "100", "--c", "2", "--bins", "10"],
    "tent-minima": ["--c", "10", "--seeds", "10", "--seed", "1"],
    "lclt-check": ["--family", "power", "--N", "8,16"],
    "bessel-check": ["--alpha", "0,1", "--lam", "10", "--beta", "1"],
}


def read(path):
    with open(path) as fh:
        return fh.read()


@pytest.mark.parametrize("command", sorted(GOLDEN))
def test_golden_headers(tmp_path, command):
    out = tmp_path / f"{command}.csv"
    assert main([command, *FAST[command], "--output", str(out), "--jobs", "1"]) == 0
    assert read(out).splitlines()[0] == GOLDEN[command]
    assert ",".join(SCHEMAS[command]) == GOLDEN[command]
    manifest = json.loads(read(tmp_path / f"{command}.manifest.json"))
    assert manifest["command"] == command
    assert {"inputs", "seed", "versions", "wall_time_s"} <= set(manifest)


@pytest.mark.parametrize("command", ["tent-minima", "critical-scan", "bessel-check"])
def test_deterministic_output(tmp_path, command):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main([command, *FAST[command], "--output", str(a), "--jobs", "1"])
    main([command, *FAST[command], "--output", str(b), "--jobs", "2"])
    assert read(a) == read(b)


def test_ground_state_uniform(tmp_path):
    out = tmp_path / "gs.csv"
    assert main(["ground-state", "--N", "100", "--L", "1", "--force", "0", "--output", str(out), "--check"]) == 0
    lines = read(out).splitlines()
    assert lines[0] == "k,position,spacing"
    spacings = [float(l.split(",")[2]) for l in lines[2:]]
    assert max(abs(s - 0.01) for s in spacings) < 1e-10


def test_gibbs_variance_json(tmp_path):
    out = tmp_path / "gv.json"
    assert main(["gibbs-variance", "--family", "power", "--alpha", "1", "--N", "5", "--format", "json",
                 "--output", str(out)]) == 0
    rec = json.loads(read(out))[0]
    assert rec["d_N"] == pytest.approx(2 / 75, rel=0.005)
    assert rec["method"] == "grid_convolution"


def test_seventeen_digits(tmp_path):
    out = tmp_path / "b.csv"
    main(["bessel-check", "--alpha", "1", "--lam", "10", "--beta", "1", "--output", str(out)])
    lhs = read(out).splitlines()[1].split(",")[2]
    assert len(lhs.replace(".", "").lstrip("0")) >= 16


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "envdir"))
    assert main(["bessel-check", "--alpha", "1", "--lam", "10", "--beta", "1"]) == 0
    assert (tmp_path / "envdir" / "bessel-check.csv").exists()
    assert (tmp_path / "envdir" / "bessel-check.manifest.json").exists()


def test_exit_codes(tmp_path):
    # validation: unknown flag, bad N list, missing seed
    assert main(["critical-scan", "--N", "5", "--bogus", "1", "--output", str(tmp_path / "x.csv")]) == 2
    assert main(["critical-scan", "--N", "10,5", "--output", str(tmp_path / "x.csv")]) == 2
    assert main(["gibbs-sample", "--family", "power", "--N", "10", "--output", str(tmp_path / "x.csv")]) == 2
    assert main(["gibbs-variance", "--family", "power", "--alpha", "0.5", "--N", "2",
                 "--output", str(tmp_path / "x.csv")]) == 2
    # unwritable
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["bessel-check", "--alpha", "1", "--lam", "10", "--beta", "1",
                 "--output", str(blocker / "sub" / "x.csv")]) == 4
    # a checked row that fails
    assert main(["tent-minima", "--c", "10", "--seeds", "5", "--seed", "1", "--min-count", "50",
                 "--check", "--output", str(tmp_path / "t.csv")]) == 1


def test_nonconvergence_exit(tmp_path, monkeypatch):
    import coulomb_lab.cli as cli

    def boom(args):
        raise cli.NonConvergence("stalled")

    monkeypatch.setitem(cli.COMMANDS, "bessel-check", boom)
    assert main(["bessel-check", "--output", str(tmp_path / "x.csv")]) == 3
    manifest = json.loads(read(tmp_path / "x.manifest.json"))
    assert manifest["status"] == 3 and manifest["error"] == "stalled"


def test_report_rows(capsys):
    rows = [ReportRow("exponent", "exponent -3.02 (target -3 ± 0.1)", -3.02, -3.0, 0.1)]
    assert emit_report(rows, checking=True) == 0
    assert capsys.readouterr().out.strip() == "exponent -3.02 (target -3 ± 0.1): PASS"
    rows = [ReportRow("a", "a", 1.0, 0.0, 0.1), ReportRow("b", "b", 0.0, 0.0, 0.1)]
    assert emit_report(rows, checking=False) == 0
    assert capsys.readouterr().out.splitlines() == ["a: INFO", "b: INFO"]
    assert emit_report(rows, checking=True) == 1
    assert capsys.readouterr().out.splitlines() == ["a: FAIL", "b: PASS"]
    with pytest.raises(ValueError):
        emit_report([], checking=True)


def test_gibbs_sweep_report(tmp_path, capsys):
    rc = main(["gibbs-variance", "--family", "coulomb", "--beta", "1", "--N", "20,40,80,160", "--check",
               "--output", str(tmp_path / "g.csv")])
    out = capsys.readouterr().out
    assert rc == 0
    assert any(l.startswith("exponent -2.9") and l.endswith("(target -3 ± 0.1): PASS") for l in out.splitlines())


def test_gibbs_sample_compare(tmp_path, capsys):
    rc = main(["gibbs-sample", "--family", "power", "--alpha", "1", "--N", "10", "--samples", "20000",
               "--seed", "5", "--compare", "--check", "--output", str(tmp_path / "s.csv")])
    assert rc == 0
    assert "standard errors" in capsys.readouterr().out
