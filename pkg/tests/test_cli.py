import json
import math
import os
import time

import pytest

from qgtquench import cli, config, validate
from qgtquench.config import ConfigError, RunConfig, merge, parse_number
from qgtquench.presets import PRESETS


def _run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def _only_run(tmp_path):
    (d,) = [p for p in tmp_path.iterdir() if p.is_dir()]
    return d


def test_parse_number():
    assert parse_number("pi/100") == pytest.approx(math.pi / 100)
    assert parse_number("3*pi/4") == pytest.approx(3 * math.pi / 4)
    assert parse_number("-pi") == pytest.approx(-math.pi)
    assert parse_number("1e-3") == 1e-3
    with pytest.raises(ConfigError):
        parse_number("tau")
    with pytest.raises(ConfigError):
        parse_number(True)


def test_merge_precedence():
    cfg = merge({"T": 0.01, "substeps": 50}, {"T": 0.002, "substeps": None})
    assert cfg.T == 0.002 and cfg.substeps == 50
    assert RunConfig().T == 0.001
    with pytest.raises(ConfigError, match="unknown config key"):
        merge({"dlambda": 0.1})
    with pytest.raises(ConfigError):
        merge({"T": -1})
    with pytest.raises(ConfigError):
        merge({"pipeline": "curvature", "source": "quench"})


def test_run_id_ignores_threads_and_out():
    a = merge({"threads": 1, "out": "x"})
    b = merge({"threads": 8, "out": "y"})
    assert a.run_id("chern") == b.run_id("chern")
    assert a.run_id("chern") != merge({"T": 0.01}).run_id("chern")


def test_three_layer_precedence(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"T": 0.05, "delta_lambda": "pi/50", "grid": [6, 6]}))
    out = tmp_path / "out"
    rc = cli.main(["chern", "--config", str(cfg_file), "--T", "0.01", "--out", str(out), "--threads", "1"])
    assert rc == 0
    man = json.loads((_only_run(out) / "manifest.json").read_text())
    assert man["config"]["T"] == 0.01
    assert man["config"]["delta_lambda"] == pytest.approx(math.pi / 50)
    assert man["config"]["grid"] == [6, 6]
    assert man["config"]["substeps"] == 100


def test_bad_config_exit_codes(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["chern", "--config", str(cfg_file), "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert _run(tmp_path, "chern", "--family", "nope") == 2
    assert _run(tmp_path, "chern", "--delta-lambda", "banana") == 2
    assert _run(tmp_path, "chern", "--grid", "4", "4", "4") == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["chern", "--no-such-flag"])
    assert exc.value.code == 2


def test_numerical_error_exit_code(tmp_path):
    # the lattice model gaps out at k_z = pi/2 with all other momenta zero
    rc = _run(tmp_path, "metric", "--family", "dirac3d-lattice", "--threads", "1")
    assert rc == 2  # no preset or fixed point given
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"family": "dirac3d-lattice", "fixed": [0, 0, "pi/2"]}))
    assert cli.main(["metric", "--config", str(cfg_file), "--out", str(tmp_path)]) == 3


def test_presets_match_printed_angles():
    p = PRESETS["fig-1a"]
    assert p.fixed == (math.pi / 2, math.pi / 4) and p.family == "dirac3d-eff"
    assert len(p.sweep_values()) == 19
    assert PRESETS["fig-3a"].family == "lattice-4d"
    assert len(PRESETS["fig-3a"].sweep_values()) == 20


def test_fig2d_analytic_column(tmp_path):
    assert _run(tmp_path, "metric", "--preset", "fig-2d", "--threads", "1") == 0
    rows = (_only_run(tmp_path) / "metric.csv").read_text().splitlines()
    header = rows[0].split(",")
    for line in rows[1:]:
        r = dict(zip(header, line.split(",")))
        if r["j"] == "2" and r["jprime"] == "2" and r["part"] == "re":
            phi3 = float(r["sweep_value"])
            assert float(r["analytic"]) == pytest.approx(math.sin(phi3) ** 2 / 16, abs=1e-12)
            assert abs(float(r["quench"]) - float(r["analytic"])) <= 2e-2


@pytest.mark.parametrize("name", ["fig-1a", "fig-1c", "fig-3b", "fig-3c"])
def test_presets_self_consistent(tmp_path, name):
    assert _run(tmp_path, "metric", "--preset", name) == 0
    man = json.loads((_only_run(tmp_path) / "manifest.json").read_text())
    assert man["headline"]["max_abs_error_vs_oracle"] <= 2e-2


def test_validate_quick_and_corrupt(tmp_path):
    t0 = time.perf_counter()
    assert _run(tmp_path / "ok", "validate", "--quick") == 0
    assert time.perf_counter() - t0 < 10
    assert _run(tmp_path / "bad", "validate", "--quick", "--corrupt", "dirac-algebra") == 1
    rep = json.loads((_only_run(tmp_path / "bad") / "validate.json").read_text())
    assert rep["failed"] == ["dirac_algebra"]


def test_validate_suite_names():
    names = [c.name for c in validate.run_suite(0, quick=True)]
    assert "dirac_algebra" in names and "probability_conservation" in names
    assert len(names) == len(set(names))


def test_sweep_single_value_equals_chern(tmp_path):
    common = ["--grid", "8", "8", "--threads", "1"]
    assert _run(tmp_path / "a", "chern", "--T", "0.01", *common) == 0
    assert _run(tmp_path / "b", "sweep", "--param", "T", "--values", "0.01", *common) == 0
    c = json.loads((_only_run(tmp_path / "a") / "chern.json").read_text())["value"]
    s = json.loads((_only_run(tmp_path / "b") / "manifest.json").read_text())["headline"]["values"]
    assert s == [c]


def test_manifest_contents(tmp_path):
    assert _run(tmp_path, "chern", "--pipeline", "curvature", "--source", "analytic", "--grid", "10", "10") == 0
    d = _only_run(tmp_path)
    man = json.loads((d / "manifest.json").read_text())
    assert man["run_id"] == d.name
    assert {"command", "version", "started", "finished", "config", "outputs", "headline"} <= set(man)
    assert [o["path"] for o in man["outputs"]] == ["chern.json"]
    assert man["config"]["time_unit"] == "two-pi"
    assert set(man["config"]) == config.FIELDS


def test_rerun_overwrites_same_directory(tmp_path):
    args = ("chern", "--source", "analytic", "--grid", "6", "6")
    _run(tmp_path, *args, "--threads", "1")
    _run(tmp_path, *args, "--threads", "3")
    assert len(os.listdir(tmp_path)) == 1


def test_thread_count_determinism(tmp_path):
    outs = []
    for n in (1, 4):
        root = tmp_path / str(n)
        assert cli.main(["chern", "--grid", "50", "50", "--threads", str(n), "--out", str(root)]) == 0
        outs.append((_only_run(root) / "chern.json").read_bytes())
    assert outs[0] == outs[1]
