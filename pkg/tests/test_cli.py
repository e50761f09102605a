"""Command-line behavior: output, exit codes and config handling."""

import csv
import json
import subprocess
import sys

import pytest

from relobi.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, load_config, main
from relobi.codec import build_hsiao
from relobi.conformance import check_secded, corrupt_code, run_conformance


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_widths_default(capsys, tmp_path):
    out = tmp_path / "w.json"
    assert main(["widths", "-o", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "137" in text and "177" in text and "~29%" in text
    rep = json.loads(out.read_text())
    assert rep["total_width"] == 137 and rep["plan_width"] == 177
    assert rep["tmr_overhead"] + rep["ecc_overhead"] == 40


def test_widths_zero_optional(capsys, tmp_path):
    zero = {"auser_width": 0, "wuser_width": 0, "ruser_width": 0, "id_width": 0, "atop_width": 0,
            "memtype_width": 0, "prot_width": 0, "dbg_width": 0, "has_rready": False, "has_err": False,
            "has_exokay": False}
    path = write(tmp_path, {"bus": zero})
    assert main(["widths", "-c", path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "104" in out and "134" in out


@pytest.mark.parametrize("content,needle", [
    ('{"design": "relobi",', "cfg.json:"),
    ("[1, 2]", "JSON object"),
    ({"colour": "red"}, "colour"),
    ({"bus": {"data_width": 32, "be_width": 3}}, "be_width"),
    ({"plan": {"groups": [{"name": "x", "members": ["addr"]}]}}, "partition"),
])
def test_malformed_config_exits_2(tmp_path, capsys, content, needle):
    path = write(tmp_path, content)
    assert main(["widths", "-c", path]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error" in err and needle in err


def test_missing_config_file(capsys):
    assert main(["campaign", "-c", "/nonexistent/cfg.json"]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_flags_override_file(tmp_path):
    path = write(tmp_path, {"seed": 5, "design": "obi", "txns_per_manager": 7})
    cfg = load_config(path, {"seed": 9, "design": None})
    assert cfg.seed == 9 and cfg.design == "obi" and cfg.txns_per_manager == 7


def test_conformance_passes(capsys, tmp_path):
    path = write(tmp_path, {"topology": {"n_managers": 2, "n_subordinates": 2}})
    assert main(["conformance", "-c", path, "--txns", "20", "--seeds", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.strip().endswith("conformance: PASS")
    assert "FAIL " not in out


def test_conformance_reports_corrupted_matrix():
    res = run_conformance(codes=[corrupt_code(build_hsiao(32), 3, 17)], txns=5)
    assert len(res) == 1 and not res[0].passed
    assert "(3, 17)" in res[0].detail
    assert check_secded(build_hsiao(32), single_words=2, double_words=1).passed


SMALL = {"topology": {"n_managers": 2, "n_subordinates": 2}, "txns_per_manager": 10, "seed": 2}


def test_campaign_outputs(tmp_path, capsys):
    path = write(tmp_path, SMALL)
    rep, log = tmp_path / "r.json", tmp_path / "r.csv"
    code = main(["campaign", "-c", path, "--faults", "30", "-o", str(rep), "--csv", str(log), "-q"])
    assert code == EXIT_OK
    d = json.loads(rep.read_text())
    assert d["totals"]["injected"] == 30 and d["design"] == "relobi"
    rows = list(csv.reader(log.open()))
    assert len(rows) == 31
    out = capsys.readouterr().out
    assert "relobi" in out and "golden run" in out


def test_campaign_fault_class_flag(tmp_path):
    path = write(tmp_path, SMALL)
    rep = tmp_path / "r.json"
    assert main(["campaign", "-c", path, "--faults", "10", "--fault-class", "port", "-o", str(rep),
                 "-q"]) == EXIT_OK
    assert list(json.loads(rep.read_text())["by_class"]) == ["PORT"]


def test_campaign_obi_failures_do_not_fail_the_command(tmp_path):
    # unprotected failures are the expected result, not an error
    path = write(tmp_path, {**SMALL, "design": "obi"})
    rep = tmp_path / "r.json"
    assert main(["campaign", "-c", path, "--faults", "80", "-o", str(rep), "-q"]) == EXIT_OK
    assert json.loads(rep.read_text())["buckets"]["UndetectedIncorrect"] > 0


def test_campaign_unwritable_output(tmp_path, capsys):
    path = write(tmp_path, SMALL)
    code = main(["campaign", "-c", path, "--faults", "2", "-o", str(tmp_path / "no" / "r.json"), "-q"])
    assert code == EXIT_FAIL


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "relobi", "widths"], capture_output=True, text=True)
    assert out.returncode == 0 and "177" in out.stdout
    bad = write(tmp_path, "{")
    out = subprocess.run([sys.executable, "-m", "relobi", "widths", "-c", bad], capture_output=True, text=True)
    assert out.returncode == 2
