import csv
import json
from pathlib import Path

import pytest

from quintsym.cli import SCHEMA_VERSION, main, run_verification_suite
from quintsym.model import load_registry

ROOT = Path(__file__).resolve().parent.parent


def test_verify_single_case_with_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify", "symmetries", "--case", "5a", "--report", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["schema_version"] == SCHEMA_VERSION
    (check,) = report["checks"]
    assert check["outcome"] == "pass"
    assert [g["name"] for g in check["details"]["generators"]] == ["X1", "X2", "X3", "X4", "X5"]
    assert "PASS" in capsys.readouterr().out


def test_flagged_row_does_not_fail(capsys):
    assert main(["verify", "selfadjoint", "--row", "11"]) == 0
    assert "FLAGGED  T2-11" in capsys.readouterr().out


def test_structure_suite_passes():
    report = run_verification_suite("structure", load_registry())
    ids = {c["id"] for c in report["checks"]}
    assert {"h-elimination", "reflection:eq221p", "square-form", "total-x-derivative"} <= ids
    assert report["summary"]["fail"] == 0


def test_every_row_once_per_suite():
    reg = load_registry()
    report = run_verification_suite("selfadjoint", reg)
    ids = [c["id"] for c in report["checks"]]
    assert len(ids) == len(set(ids)) == sum(r.phi is not None for r in reg.rows)
    assert ids == sorted(ids)


def test_failing_registry_row_exits_one(tmp_path):
    reg = tmp_path / "r.toml"
    reg.write_text('[[row]]\ntable = "T1"\ncase = "x"\nconstraints = []\n'
                   'generators = [{ name = "X4", field = "u*Du" }]\n')
    assert main(["--registry", str(reg), "verify", "symmetries"]) == 1


def test_input_errors_exit_two(tmp_path, capsys):
    assert main(["verify", "symmetries", "--case", "nope"]) == 2
    assert main(["verify", "unknown-suite"]) == 2
    bad = tmp_path / "r.toml"
    bad.write_text("[[row]]\ntable = 3")
    assert main(["--registry", str(bad), "verify", "symmetries"]) == 2
    assert main(["derive-claw", "--case", "general", "--symmetry", "Dx*Du", "--phi", "1"]) == 2
    capsys.readouterr()


def test_derive_claw(capsys):
    assert main(["derive-claw", "--case", "gnsa", "--symmetry", "t*Dt - u*Du", "--phi", "u[2x]"]) == 0
    out = capsys.readouterr().out
    assert "normalized density: u[x]^2" in out
    assert main(["derive-claw", "--case", "general", "--symmetry", "x*Dx", "--phi", "1"]) == 1


def test_simulate_writes_csv(tmp_path, capsys):
    out = tmp_path / "drift.csv"
    assert main(["simulate", "--config", str(ROOT / "configs" / "case13.toml"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert float(rows[-1]["t"]) == pytest.approx(0.01)
    assert max(float(r["drift_H1"]) for r in rows) < 1e-11
    capsys.readouterr()


def test_simulate_positivity_and_abort(tmp_path, capsys):
    cfg = tmp_path / "neg.toml"
    cfg.write_text('[parameters]\np1 = 1\np3 = 0\nbeta = 0\nq0 = 0\nq1 = 0\nq2 = 0\n'
                   '[simulation]\nu0 = "cos(x)"\nmonitors = ["H2"]\n')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2
    assert "positive" in capsys.readouterr().err
    cfg.write_text('[parameters]\np1 = 1\np3 = 1\nbeta = 0\nq0 = 1\nq1 = 1\nq2 = 1\n'
                   '[simulation]\nmin_step = 1e-6\n')
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 1
    assert len(out.read_text().splitlines()) >= 2
    assert main(["simulate", "--config", str(tmp_path / "missing.toml"), "--out", str(out)]) == 2
