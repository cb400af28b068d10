import json
import math

import pytest

from gaussbmo.cli import cli_main

ONE = '{"kind": "constant", "value": 1.0}'


def run(capsys, *argv):
    code = cli_main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_measure_ball(capsys):
    code, out, _ = run(capsys, "measure", "ball", "--center", "0", "--radius", "1")
    assert code == 0
    assert json.loads(out)["result"]["gamma"] == pytest.approx(math.erf(1.0), rel=1e-15)


def test_measure_derivative_sign(capsys):
    code, out, _ = run(capsys, "measure", "derivative", "--x", "0", "--y", "1", "--index", "0")
    assert code == 0
    assert json.loads(out)["result"]["dV"] == pytest.approx(2 * math.exp(-1) / math.sqrt(math.pi), rel=1e-9)


def test_apply_and_norm(capsys):
    code, out, _ = run(capsys, "apply", "I", "--f", ONE, "--points", "0;1.5", "--beta", "0.5")
    assert code == 0
    vals = [r["value"] for r in json.loads(out)["result"]]
    assert vals[0] == pytest.approx(1.83597471910318, rel=1e-9)
    code, out, _ = run(capsys, "norm", "lp", "--f", '{"kind": "constant", "value": -2.0}', "--p", "3")
    assert code == 0 and json.loads(out)["result"]["lp"] == 2.0


def test_missing_required_flag_exits_2(capsys):
    code, _, err = run(capsys, "apply", "I", "--points", "0")
    assert code == 2 and err


def test_bad_function_spec_exits_2(capsys):
    code, _, err = run(capsys, "norm", "lp", "--f", '{"kind": "nonsense"}')
    assert code == 2 and "error" in err


def test_verify_writes_identical_reports(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        code, _, _ = run(capsys, "verify", "E4.13", "--output", str(p))
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    d = json.loads(paths[0].read_text())
    assert d["pass"] is True


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", "E4.13", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0].startswith("theorem_id,case")


def test_config_file_errors_are_anchored(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "n": 1,\n  "beta": "half"\n}\n')
    code, _, err = run(capsys, "verify", "E4.13", "--config", str(cfg))
    assert code == 2
    assert f"{cfg}:3:" in err and "beta" in err
    cfg.write_text('{"unknown_key": 1}')
    code, _, err = run(capsys, "verify", "E4.13", "--config", str(cfg))
    assert code == 2 and "unknown_key" in err
    cfg.write_text('{"n": 1,')
    code, _, err = run(capsys, "verify", "E4.13", "--config", str(cfg))
    assert code == 2


def test_config_file_applies(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 0.5, "identity_samples": 4}))
    code, out, _ = run(capsys, "verify", "E4.13", "--config", str(cfg))
    assert code == 0
    d = json.loads(out)
    assert d["config"]["a"] == 0.5 and len(d["cases"]) >= 4


def test_sweep(capsys):
    code, out, _ = run(capsys, "sweep", "E4.13", "--param", "a", "--values", "0.5,2", "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3 and lines[1].endswith("true")


def test_covering_command(capsys):
    code, out, _ = run(capsys, "covering", "--half", "2", "--tau", "2")
    assert code == 0
    assert json.loads(out)["result"]["overlap"] >= 1
