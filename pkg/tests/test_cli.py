import json
import subprocess
import sys

import numpy as np
import pytest

from fstar.cli import main
from fstar.config import ConfigError, builtin_names, load
from fstar.grid import GridFn


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def builtin_doc(name):
    return json.loads(json.dumps(load(name).doc))


def run_cli(*args):
    return main([str(a) for a in args])


def test_list_shows_every_builtin(capsys):
    assert run_cli("list") == 0
    assert capsys.readouterr().out.split() == builtin_names()


def test_example8_golden(tmp_path, capsys):
    assert run_cli("example8", "--config", "example8_golden", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["scenario"] == "example8_golden"
    names = [c["name"] for c in summary["checks"]]
    assert "B_K is F-subharmonic" in names
    assert all(c["pass"] for c in summary["checks"])
    assert (tmp_path / "bk.csv").read_text().splitlines()[0] == "x1,x2,B_K,closed_form,laplacian"
    assert "PASS example8_golden" in capsys.readouterr().out


def test_example8_deficit_reports_the_origin_laplacian(tmp_path):
    assert run_cli("example8", "--config", "example8_deficit", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "summary.json").read_text())["report"]
    assert rep["laplacian_origin"]["exact"] == pytest.approx(-0.44, abs=1e-12)
    assert rep["laplacian_origin"]["discrete"] == pytest.approx(-0.44, abs=5e-3)


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli("interp", "--config", "interp_interval", "--out", out) == 0
    files = sorted(p.name for p in a.iterdir() if p.name != "timings.json")
    assert files == sorted(p.name for p in b.iterdir() if p.name != "timings.json")
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_interval_interpolation_tables(tmp_path):
    assert run_cli("interp", "--config", "interp_interval", "--out", tmp_path) == 0
    rows = (tmp_path / "supports.csv").read_text().splitlines()
    assert rows[0] == "x1,lo,hi"
    body = np.array([[float(c) for c in r.split(",")] for r in rows[1:]])
    t = body[:, 0]
    np.testing.assert_allclose(body[:, 1], 2 * t, atol=1e-9)
    np.testing.assert_allclose(body[:, 2], 1 + 3 * t, atol=1e-9)
    text = (tmp_path / "Phi.csv").read_text()
    assert ",inf\n" in text
    Phi = GridFn.read_csv(text, split=(1, 1))
    assert Phi.shape == (11, 161)
    # the CSV carries the exact values: writing it again gives the same text
    assert Phi.to_csv() == text


def test_json_tables(tmp_path):
    assert run_cli("bm", "--config", "bm_interval", "--out", tmp_path, "--format", "json") == 0
    doc = json.loads((tmp_path / "supports.json").read_text())
    assert doc["columns"] == ["x1", "lo", "hi"]


def test_seed_override_is_recorded(tmp_path):
    assert run_cli("structural", "--config", "structural_pos", "--out", tmp_path, "--seed", "7") == 0
    assert json.loads((tmp_path / "summary.json").read_text())["seed"] == 7


def test_failing_check_exits_one(tmp_path):
    doc = builtin_doc("example8_golden")
    doc["options"]["max_seconds"] = 1e-12
    assert run_cli("example8", "--config", write_config(tmp_path, doc), "--out", tmp_path / "o") == 1
    checks = json.loads((tmp_path / "o" / "summary.json").read_text())["checks"]
    runtime = next(c for c in checks if c["name"].startswith("pipeline runtime"))
    assert not runtime["pass"] and runtime["margin"] < 0


@pytest.mark.parametrize("edit, pointer", [
    (lambda d: d["grid"]["x"].__setitem__(0, [1, -1, 11]), "/grid/x/0"),
    (lambda d: d.pop("id"), "/"),
    (lambda d: d["data"]["params"].__setitem__("lam", "one"), "/data/params/lam"),
    (lambda d: d["F"].__setitem__("kind", "banana"), "/F"),
])
def test_malformed_config_exits_two(tmp_path, capsys, edit, pointer):
    doc = builtin_doc("example8_golden")
    edit(doc)
    assert run_cli("example8", "--config", write_config(tmp_path, doc)) == 2
    err = capsys.readouterr().err
    assert err.startswith(f"config error at {pointer}")


def test_invalid_json_and_missing_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run_cli("example8", "--config", p) == 2
    assert "invalid JSON" in capsys.readouterr().err
    assert run_cli("example8", "--config", tmp_path / "nope.json") == 2


def test_command_mismatch(capsys):
    assert run_cli("bm", "--config", "example8_golden") == 2
    assert "config error at /command" in capsys.readouterr().err


def test_missing_grid_is_a_config_error(tmp_path, capsys):
    doc = builtin_doc("interp_interval")
    del doc["grid"]["u"]
    assert run_cli("interp", "--config", write_config(tmp_path, doc), "--out", tmp_path / "o") == 2
    assert "/grid/u" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "fstar.cli", "list"], capture_output=True, text=True, check=True)
    assert "example8_golden" in out.stdout.split()


def test_every_builtin_loads():
    for name in builtin_names():
        scn = load(name)
        assert scn.id == name


def test_load_rejects_unknown_names():
    with pytest.raises(ConfigError) as exc:
        load("no_such_scenario")
    assert exc.value.pointer == "/"
