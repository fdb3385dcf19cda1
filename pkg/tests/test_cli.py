import json
import subprocess
import sys
from pathlib import Path

import pytest

from lprec.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VIOLATION, cli_main
from lprec.harness.metrics import read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, **cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"schema_version": 1, **cfg}))
    return str(p)


def test_run_figure_config(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli_main(["run", "--config", str(CONFIGS / "lsq_figure.json"), "--steps", "30", "--out", str(out)])
    assert code == EXIT_OK
    arms = sorted(out.glob("lsq-figure_*_seed0.csv"))
    assert len(arms) == 4
    printed = capsys.readouterr().out.splitlines()
    assert sum("status=ok" in line for line in printed) == 4


def test_bad_format_exit_1(tmp_path, capsys):
    assert cli_main(["run", "--format", "E8M0", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_unknown_flag_exit_1(capsys):
    assert cli_main(["run", "--bogus"]) == EXIT_CONFIG
    assert "usage" in capsys.readouterr().err


def test_missing_subcommand_exit_1():
    assert cli_main([]) == EXIT_CONFIG


def test_bad_config_file(tmp_path):
    assert cli_main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert cli_main(["run", "--config", _write(tmp_path, kind="lsq-theory", lr=0.1)]) == EXIT_CONFIG


def test_numerical_failure_exit_2(tmp_path):
    cfg = _write(tmp_path, kind="lsq-theory", format="E5M10", w_range=[0.0, 1e5], steps=50, n=64)
    assert cli_main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_NUMERIC


def test_sweep_continues_past_failures(tmp_path):
    cfg = _write(tmp_path, kind="format-sweep", formats=["E5M10", "E8M7"], policies=["nearest"],
                 w_range=[0.0, 1e5], steps=50, n=64)
    assert cli_main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert len(read_csv(tmp_path / "o" / "sweep_summary.csv")) == 2
    # narrowing to the failing format leaves nothing that ran
    assert cli_main(["sweep", "--config", cfg, "--format", "E5M10", "--out", str(tmp_path / "p")]) == EXIT_NUMERIC


def test_bounds_check_exit_codes(tmp_path):
    ok = _write(tmp_path, kind="bounds-check", seeds=[0, 1], n=64, steps=300, n_probes=10, formats=["E8M7"])
    assert cli_main(["bounds-check", "--config", ok, "--out", str(tmp_path / "a")]) == EXIT_OK
    # too few steps to pass below the floor: the separation check fails
    short = _write(tmp_path, kind="bounds-check", seeds=[0], n=64, steps=50, n_probes=10, formats=["E8M7"],
                   checkpoints=[10])
    assert cli_main(["bounds-check", "--config", short, "--out", str(tmp_path / "b")]) == EXIT_VIOLATION


def test_cancellation_rejects_stochastic(tmp_path):
    assert cli_main(["cancellation", "--policy", "stochastic", "--steps", "10", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_seed_override(tmp_path):
    cfg = _write(tmp_path, kind="lsq-theory", seeds=[0, 1, 2], steps=10, n=64)
    assert cli_main(["run", "--config", cfg, "--seed", "7", "--out", str(tmp_path / "o")]) == EXIT_OK
    assert [p.name for p in (tmp_path / "o").glob("*seed*.csv")] == ["lsq-theory_nearest_seed7.csv"]


def test_formats_command(capsys):
    assert cli_main(["formats", "--format", "bf16", "--format", "E5M10"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[1].split()[:3] == ["E8M7", "16", "0.00390625"]
    assert out[2].split()[0] == "E5M10" and "65504" in out[2]


def test_formats_unknown(capsys):
    assert cli_main(["formats", "--format", "E9M99"]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lprec", "formats"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and "E8M7" in proc.stdout


# thm1.json runs in full in the acceptance suite
@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json") if p.name != "thm1.json"))
def test_shipped_configs_run_briefly(tmp_path, name):
    cmd = {"lsq-figure": "run", "cancellation": "cancellation", "format-sweep": "sweep", "mlp-demo": "run"}
    kind = json.loads((CONFIGS / name).read_text())["kind"]
    assert cli_main([cmd[kind], "--config", str(CONFIGS / name), "--steps", "20", "--out", str(tmp_path)]) == EXIT_OK
