import json
from pathlib import Path

import numpy as np
import pytest

from truncem import cli
from truncem.model import custom_powerlaw


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _read_csv(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# ")
    return json.loads(lines[0][2:]), lines[1].split(","), [l.split(",") for l in lines[2:]]


SMALL = {"seed": 5, "model": "vq2", "policy": "cubic", "T": 2, "deltas": ["2^-6", "2^-7"],
         "delta_ref": "2^-8", "n_paths": 40}


def test_parse_step():
    assert cli.parse_step("2^-9") == 2.0 ** -9
    assert cli.parse_step("2**-3") == 0.125
    assert cli.parse_step(0.5) == 0.5
    with pytest.raises(cli.ConfigError):
        cli.parse_step("fast")
    with pytest.raises(cli.ConfigError):
        cli.parse_step(True)


def test_converge_small(tmp_path):
    assert cli.main(["converge", "--config", str(_write(tmp_path, SMALL)), "--out", str(tmp_path / "o")]) == 0
    man, header, rows = _read_csv(tmp_path / "o" / "errors.csv")
    assert header == ["delta", "error", "stderr", "n_paths"]
    assert [float(r[0]) for r in rows] == [2.0 ** -6, 2.0 ** -7]
    assert man["seed"] == 5 and man["command"] == "converge" and "generator" in man
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    rep = s["reports"][0]
    assert rep["policy"]["L"] == 8.0
    assert [h["holds"] for h in rep["hypothesis"]] == [False, False]
    assert s["manifest"] == man


def test_converge_rerun_is_bitwise(tmp_path):
    cfg = _write(tmp_path, SMALL)
    cli.run("converge", cfg, tmp_path / "a")
    cli.run("converge", cfg, tmp_path / "b", workers=3)
    for f in ("errors.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_multi_model_converge(tmp_path):
    cfg = dict(SMALL, models=["mul1", "mul2"], deltas=["2^-9"], delta_ref="2^-10", n_paths=8)
    del cfg["model"]
    assert cli.run("converge", cfg, tmp_path) == 0
    assert (tmp_path / "errors_mul1.csv").exists() and (tmp_path / "errors_mul2.csv").exists()


def test_incommensurate_step_exit_2(tmp_path, capsys):
    cfg = dict(SMALL, deltas=[0.3], delta_ref="2^-8")
    assert cli.run("converge", cfg, tmp_path) == 2
    assert "incommensurate" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [{"sede": 1}, {"seed": -1}, {"seed": 1, "modle": "vq2"}, {"seed": "1"}])
def test_bad_config_exit_2(tmp_path, bad):
    assert cli.run("validate", bad, tmp_path) == 2


def test_missing_config_file(tmp_path):
    assert cli.run("validate", tmp_path / "nope.json", tmp_path) == 2


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{seed: 1")
    assert cli.run("validate", p, tmp_path) == 2


def test_strict_policy_coarse_step_exit_2(tmp_path):
    cfg = dict(SMALL, policy={"L": 8, "upsilon": 3, "strict": True})
    assert cli.run("converge", cfg, tmp_path) == 2


def test_validate_vq2_ok(tmp_path):
    assert cli.run("validate", {"seed": 0, "model": "vq2"}, tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["passed"] and "alpha2_one_sided" in rep["report"]["records"]


def test_validate_superlinear_diffusion_exit_4(tmp_path):
    cfg = {"seed": 0, "model": "powerlaw",
           "model_params": {"beta": [[1.0, 2.0]], "sigma": 0.5, "l3": 0}, "box": [-10, 10]}
    assert cli.run("validate", cfg, tmp_path) == 4


def test_validate_model_override_exit_4(tmp_path):
    m = custom_powerlaw(beta=[[1.0, 2.0]], sigma=0.5, l3=0)
    assert cli.run("validate", {"seed": 0}, tmp_path, model=m) == 4


def test_validate_empty_box_exit_2(tmp_path):
    assert cli.run("validate", {"seed": 0, "model": "vq2", "box": [1, 1]}, tmp_path) == 2


def test_simulate_constant_model(tmp_path):
    cfg = {"seed": 1, "model": "powerlaw", "model_params": {"xi": 0.25}, "T": 1, "delta": 0.25, "n_paths": 1}
    assert cli.run("simulate", cfg, tmp_path) == 0
    _, header, rows = _read_csv(tmp_path / "paths.csv")
    assert header == ["path", "k", "t", "value", "exploded"]
    assert [float(r[3]) for r in rows] == [0.25] * 5


def test_simulate_deterministic(tmp_path):
    cfg = {"seed": 7, "model": "vq2", "policy": "cubic", "delta": "2^-5", "n_paths": 3}
    cli.run("simulate", cfg, tmp_path / "a")
    cli.run("simulate", cfg, tmp_path / "b")
    assert (tmp_path / "a" / "paths.csv").read_bytes() == (tmp_path / "b" / "paths.csv").read_bytes()


def test_simulate_classical_explosion_flags(tmp_path):
    cfg = {"seed": 3, "model": "cubic", "scheme": "classical", "delta": 0.25, "n_paths": 4}
    assert cli.run("simulate", cfg, tmp_path) == 0
    _, _, rows = _read_csv(tmp_path / "paths.csv")
    flags = {}
    for r in rows:
        flags[r[0]] = flags.get(r[0], False) or r[4] == "1"
    assert all(flags.values()) and len(flags) == 4


def test_csv_round_trip_precision(tmp_path):
    cfg = {"seed": 7, "model": "vq2", "policy": "cubic", "delta": "2^-5", "n_paths": 1, "T": 0.5}
    cli.run("simulate", cfg, tmp_path)
    _, _, rows = _read_csv(tmp_path / "paths.csv")
    for r in rows:
        assert repr(float(r[3])) == r[3]


def test_moments_gap_exit(tmp_path):
    base = {"seed": 2, "model": "vq2", "policy": "cubic", "n_paths": 16}
    assert cli.run("moments", dict(base, delta="2^-6"), tmp_path) == 0
    assert cli.run("gap", dict(base, deltas=["2^-6", "2^-7"]), tmp_path) == 0
    assert cli.run("exit-prob", dict(base, delta="2^-6", K=[4, 8]), tmp_path) == 0
    for f in ("moments.csv", "gap.csv", "exit.csv"):
        assert (tmp_path / f).exists()
    assert cli.run("exit-prob", dict(base, delta="2^-6", K=[2]), tmp_path) == 2


def test_yw_check(tmp_path):
    assert cli.run("yw-check", {"seed": 0, "n_x": 2000}, tmp_path) == 0
    out = json.loads((tmp_path / "yw.json").read_text())
    assert len(out["results"]) == 6 and out["passed"]


def test_packaged_config_resolves():
    cfg, raw = cli.load_config("vq2_fig1.json")
    assert cfg.model == "vq2" and cfg.n_paths == 500


def test_workers_must_be_positive(tmp_path):
    assert cli.run("validate", {"seed": 0, "model": "vq2"}, tmp_path, workers=0) == 2
