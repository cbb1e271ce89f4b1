import csv
import json

import numpy as np
import pytest

from realbranch import cli
from realbranch.config import parse_config
from realbranch.errors import ConfigError

CHAIN = {
    "schema_version": 1,
    "model": {"name": "measurement_chain", "params": {"alpha": float(np.sqrt(0.3)), "n_env": 2}},
    "decomposition": {"kind": "basis"},
    "horizons": [6, 7, 8, 9, 10],
    "times": [0, 0.25, 2.5, 4, 5],
    "seed": 7,
}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc, indent=2), encoding="utf-8")
    return str(path)


def test_validate_ok(tmp_path, capsys):
    assert cli.main(["validate", write(tmp_path, CHAIN)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_rejects_decreasing_horizons(tmp_path, capsys):
    bad = dict(CHAIN, horizons=[6, 5, 7])
    assert cli.main(["validate", write(tmp_path, bad)]) == 2
    err = capsys.readouterr().err
    assert "horizons" in err and "line" in err


def test_validate_unknown_kind_lists_allowed(tmp_path, capsys):
    bad = dict(CHAIN, decomposition={"kind": "energy"})
    assert cli.main(["validate", write(tmp_path, bad)]) == 2
    err = capsys.readouterr().err
    for kind in ("basis", "fourier", "schmidt"):
        assert kind in err


def test_unknown_keys_rejected_with_line_number():
    text = json.dumps(dict(CHAIN, colour="blue"), indent=2)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    line = next(i for i, s in enumerate(text.splitlines(), 1) if '"colour"' in s)
    assert info.value.line == line
    assert "colour" in str(info.value)


def test_unknown_model_param_rejected():
    doc = json.loads(json.dumps(CHAIN))
    doc["model"]["params"]["gamma"] = 1
    with pytest.raises(ConfigError, match="gamma"):
        parse_config(json.dumps(doc, indent=2))


def test_invalid_json_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "model": {\n  "name": }\n}')
    assert info.value.line == 3


def test_invalid_model_parameters():
    doc = json.loads(json.dumps(CHAIN))
    doc["model"]["params"]["alpha"] = 1.5
    with pytest.raises(ConfigError, match="model"):
        parse_config(json.dumps(doc))


def test_times_beyond_first_horizon():
    with pytest.raises(ConfigError, match="times"):
        parse_config(json.dumps(dict(CHAIN, times=[0, 7])))


def test_run_measurement_chain(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, CHAIN), "--out", str(out), "--quiet"]) == 0
    for name in ("branches.json", "convergence.json", "realized.json", "run.log",
                 "realstate_00.csv", "realstate_11.csv"):
        assert (out / name).exists()
    doc = json.loads((out / "branches.json").read_text())
    assert doc["schema_version"] == 1
    for h in doc["horizons"]:
        p = {b["label"]: b["probability"] for b in h["branches"]}
        assert p == pytest.approx({"00": 0.3, "11": 0.7}, abs=1e-9)
        assert all(0 <= v <= 1 for v in p.values())
        assert abs(h["residual"]) < 1e-12
    assert doc["converged"] is True
    conv = json.loads((out / "convergence.json").read_text())
    assert conv["schema_version"] == 1 and conv["converged"] is True
    realized = json.loads((out / "realized.json").read_text())
    assert realized["label"] in ("00", "11")
    assert realized["trajectory_file"] == f"realstate_{realized['label']}.csv"


def test_realstate_csv_layout(tmp_path):
    out = tmp_path / "out"
    cli.main(["run", write(tmp_path, CHAIN), "--out", str(out), "--quiet"])
    raw = (out / "realstate_11.csv").read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0] == ["t", "ρ_re_0_0", "ρ_re_0_1", "ρ_re_1_0", "ρ_re_1_1",
                       "ρ_im_0_0", "ρ_im_0_1", "ρ_im_1_0", "ρ_im_1_1"]
    assert [float(r[0]) for r in rows[1:]] == CHAIN["times"]
    # after the first record the real state of branch 11 is |1><1|
    assert float(rows[3][4]) == pytest.approx(1.0, abs=1e-10)


def test_static_config_constant_rows(tmp_path):
    cfg = {"model": {"name": "static", "params": {"d_A": 2, "d_B": 2, "a": 1, "b": 0}},
           "horizons": [1, 2, 3, 4, 5], "times": [0, 0.3, 0.6, 1.0]}
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, cfg), "--out", str(out), "--quiet"]) == 0
    rows = list(csv.reader((out / "realstate_0.csv").read_text().splitlines()))[1:]
    assert len({tuple(r[1:]) for r in rows}) == 1
    assert not (out / "realized.json").exists()


def test_seed_flag_overrides_and_is_deterministic(tmp_path):
    path = write(tmp_path, dict(CHAIN, seed=None))
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", path, "--out", str(a), "--seed", "42", "--quiet"]) == 0
    assert cli.main(["run", path, "--out", str(b), "--seed", "42", "--quiet"]) == 0
    for name in ("branches.json", "convergence.json", "realized.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert json.loads((a / "realized.json").read_text())["seed"] == 42


def test_exit_code_io(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", write(tmp_path, CHAIN), "--out", str(blocker), "--quiet"]) == 4
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == 4


def test_exit_code_numeric(tmp_path, monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(cli, "horizon_sweep", broken)
    assert cli.main(["run", write(tmp_path, CHAIN), "--out", str(tmp_path / "o"), "--quiet"]) == 3
    assert "horizon_sweep" in capsys.readouterr().err


def test_run_log_echoes_config(tmp_path):
    out = tmp_path / "out"
    cli.main(["run", write(tmp_path, CHAIN), "--out", str(out), "--quiet"])
    log = (out / "run.log").read_text()
    assert "measurement_chain" in log and "numpy" in log and "timestamp" in log


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "realbranch", "validate", write(tmp_path, CHAIN)],
                         capture_output=True, text=True)
    assert res.returncode == 0
