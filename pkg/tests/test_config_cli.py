import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from dynbridge import cli
from dynbridge.config import RunConfig, dump_config, load_config, parse_config
from dynbridge.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]


def test_default_round_trip():
    cfg = RunConfig()
    back = parse_config(dump_config(cfg))
    assert back == cfg
    assert back.hash() == cfg.hash()


def test_shipped_default_matches_builtin():
    assert load_config(ROOT / "examples" / "configs" / "default.toml") == RunConfig()


def test_hash_ignores_output_dir_only():
    cfg = RunConfig()
    assert cfg.with_overrides(out="elsewhere").hash() == cfg.hash()
    assert cfg.with_overrides(seed=1).hash() != cfg.hash()
    assert cfg.run_id == f"{cfg.hash()[:12]}-{cfg.seed}"


@pytest.mark.parametrize("text,field,line", [
    ("[run]\nseed = 1\nn_paths = -5\n", "run.n_paths", 3),
    ("[run]\nseed = 1\n\n[numerics]\ndt_base = 'fast'\n", "numerics.dt_base", 5),
    ("[run]\nexperiment = 'everything'\n", "run.experiment", 2),
    ("[run]\nseed = 1\nbogus = 2\n", "run.bogus", 3),
    ("[extras]\na = 1\n", "extras", 1),
    ("[thresholds]\nhitting_ks = -0.1\n", "thresholds.hitting_ks", 2),
    ("[checks]\nfilter_particles = [4000, 1000]\n", "checks.filter_particles", 2),
    ("[timechange]\nfamily = 'power'\nalpha = 1.5\n", "timechange", 1),
])
def test_errors_name_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_malformed_toml_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("[run]\nseed = 1\nseed =\n")
    assert info.value.line == 3


def test_seed_derivation():
    assert cli.check_seed(1, "a") == cli.check_seed(1, "a")
    assert cli.check_seed(1, "a") != cli.check_seed(1, "b")
    assert 0 <= cli.check_seed(2**63, "verify-bm") < 2**32


def _write(tmp_path, body):
    p = tmp_path / "run.toml"
    p.write_text(body)
    return p


def test_exit_zero_and_layout(tmp_path):
    cfg = _write(tmp_path, '[run]\nexperiment = "kernels-table"\n')
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
    (run_dir,) = (tmp_path / "o").iterdir()
    assert run_dir.name.endswith("-3")
    for f in ("manifest", "config.toml", "reports.csv", "summary.txt", "kernels.csv"):
        assert (run_dir / f).exists(), f
    man = json.loads((run_dir / "manifest").read_text())
    assert man["passed"] and man["master_seed"] == 3 and man["run_id"] == run_dir.name
    assert set(man["check_seeds"]) == {"kernels-table"}
    assert load_config(run_dir / "config.toml").seed == 3
    rows = list(csv.DictReader(open(run_dir / "kernels.csv")))
    assert len(rows) == 6 * 4 * 3 and float(rows[0]["q"]) > 0


def test_exit_one_on_failed_check(tmp_path):
    cfg = _write(tmp_path, '[run]\nexperiment = "kernels-table"\n[thresholds]\nkernel_h_rel = 0.0\n')
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_exit_two_on_bad_config(tmp_path, capsys):
    cfg = _write(tmp_path, '[run]\nseed = 1\nhorizon = "long"\n')
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "line 3" in err and "run.horizon" in err
    assert cli.main(["--config", str(tmp_path / "missing.toml")]) == 2


def test_hitting_dist_table(tmp_path):
    cfg = _write(tmp_path, '[run]\nexperiment = "hitting-dist"\n[checks]\nhitting_paths = 500\n'
                           '[numerics]\ndt_base = 0.005\n')
    cli.main(["--config", str(cfg), "--out", str(tmp_path)])
    (run_dir,) = [p for p in tmp_path.iterdir() if p.is_dir()]
    rows = list(csv.reader(open(run_dir / "hitting_dist.csv")))
    assert rows[0] == ["t", "empirical_survival", "H"] and len(rows) == 201


def test_simulate_writes_paths(tmp_path):
    cfg = _write(tmp_path, '[run]\nexperiment = "simulate"\nn_paths = 40\n[checks]\ncsv_paths = 3\n'
                           '[numerics]\ndt_base = 0.01\n')
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path)]) == 0
    (run_dir,) = [p for p in tmp_path.iterdir() if p.is_dir()]
    assert sorted(p.name for p in (run_dir / "paths").iterdir()) == [
        "path_00000.csv", "path_00001.csv", "path_00002.csv"]
    assert (run_dir / "X.bin").stat().st_size > 0


def test_rerun_is_bitwise_identical(tmp_path):
    cfg = _write(tmp_path, '[run]\nexperiment = "verify-bm"\n[checks]\nbrownian_paths = 300\n'
                           '[numerics]\ndt_base = 0.005\n')
    mans = []
    for sub in ("a", "b"):
        cli.main(["--config", str(cfg), "--out", str(tmp_path / sub)])
        (run_dir,) = (tmp_path / sub).iterdir()
        mans.append(json.loads((run_dir / "manifest").read_text()))
        assert (run_dir / "reports.csv").read_text() == (
            next((tmp_path / "a").iterdir()) / "reports.csv").read_text()
    assert mans[0]["results_hash"] == mans[1]["results_hash"]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dynbridge.cli", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for flag in ("--config", "--seed", "--experiment", "--out"):
        assert flag in res.stdout
