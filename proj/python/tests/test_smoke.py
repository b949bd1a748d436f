import csv
import json
import math

import pytest

import dktax


def test_rates_and_liability():
    s86, s87 = dktax.system_1986(), dktax.system_1987()
    for li, r86, r87 in [(100000, 0.479, 0.510), (150000, 0.623, 0.570), (300000, 0.730, 0.690)]:
        rec = dktax.IncomeRecord(li)
        assert dktax.effective_mtr(rec, s86) == pytest.approx(r86, abs=1e-12)
        assert dktax.effective_mtr(rec, s87) == pytest.approx(r87, abs=1e-12)
    hand = 0.28 * (150000 - 20700) + 0.199 * (150000 - 23200) + 0.144 * (150000 - 113400)
    assert dktax.tax_liability(dktax.IncomeRecord(150000), s86) == pytest.approx(hand, abs=1e-6)


def test_joint_transfer_and_bracket():
    sys = dktax.parse_tax_system(str(dktax.system_1987()))
    rec = dktax.IncomeRecord(150000, married=True, li_w=100000)
    assert dktax.joint_middle_transfer(rec, sys) == 120000
    assert dktax.bracket_location(rec, sys) == "BOTTOM"
    assert dktax.mechanical_ntr_change(
        dktax.IncomeRecord(150000), dktax.system_1986(), dktax.deflate_system(sys, 1.02)
    ) == pytest.approx(math.log(0.43 / 0.377), abs=1e-9)


def test_elasticity_and_balance():
    e = dktax.elasticity(-0.044, 0.008, -0.164, -0.044)
    assert e["epsilon"] == pytest.approx(0.367, abs=0.003)
    assert e["se"] == pytest.approx(0.067, abs=0.003)
    assert dktax.normalized_difference(148596, 142386, 8202, 10625) == pytest.approx(0.654, abs=1e-3)
    assert dktax.gamma_for_elasticity(0.4) == pytest.approx(0.1)
    with pytest.raises(dktax.Error):
        dktax.elasticity(0.1, 0.01, -0.05, -0.05)


def test_generate_panel(tmp_path):
    path = tmp_path / "panel.csv"
    rows = dktax.generate_panel(str(path), n_individuals=200, seed=3)
    with open(path) as fh:
        data = list(csv.DictReader(fh))
    assert len(data) == rows
    assert {r["year"] for r in data} >= {"1981", "1986", "1993"}


def test_pipeline_run(tmp_path):
    out = tmp_path / "out"
    files = dktax.run("pipeline", out=str(out), n_individuals=2000, seed=4, groups="120000:160000")
    assert str(out / "manifest.json") in files
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    with open(out / "elasticities.csv") as fh:
        groups = {r["group"] for r in csv.DictReader(fh)}
    assert "low" in groups and "medium" not in groups


def test_pipeline_errors(tmp_path):
    with pytest.raises(dktax.Error, match="panel.csv"):
        dktax.run("estimate", out=str(tmp_path / "empty"))
    with pytest.raises(dktax.Error):
        dktax.run("nonsense", out=str(tmp_path / "x"))
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("unknown_key: 1\n")
    with pytest.raises(dktax.Error, match="unknown_key"):
        dktax.run(config=str(cfg))


def test_dump_config():
    assert "deflation_factor: 1.02" in dktax.dump_config()
