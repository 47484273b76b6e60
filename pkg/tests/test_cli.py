"""Command-line interface: subcommands, exit codes, and file outputs."""

import json
import shutil
import subprocess

import numpy as np
import pytest

from cbfsim import builtin_config, trace_columns
from cbfsim.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _write_json(tmp_path, obj, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


# ------------------------------------------------------------------- run

def test_run_builtin_writes_csv(tmp_path, capsys):
    out = tmp_path / "fig2.csv"
    code, stdout, _ = _run(
        capsys, "run", "--config", "fig2", "--out", str(out), "--duration", "0.05"
    )
    assert code == 0
    assert f"51 rows -> {out}" in stdout
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 52
    assert lines[0] == ",".join(trace_columns(2, 2, 1))


def test_run_json_config(tmp_path, capsys):
    path = _write_json(tmp_path, {
        "scenario": "DoubleIntegratorPosOnly",
        "dt": 1e-3,
        "duration": 0.1,
        "x0": [-1.75, 0.0],
    })
    out = tmp_path / "pos.csv"
    code, stdout, _ = _run(capsys, "run", "--config", path, "--out", str(out))
    assert code == 0
    assert "101 rows" in stdout
    header = out.read_text(encoding="utf-8").splitlines()[0]
    assert "y1" in header and "y2" not in header


def test_run_step_and_duration_overrides(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, stdout, _ = _run(
        capsys, "run", "--config", "fig2", "--out", str(out),
        "--dt", "0.01", "--duration", "0.1",
    )
    assert code == 0
    assert "11 rows" in stdout


def test_run_unknown_config_name(tmp_path, capsys):
    code, _, stderr = _run(
        capsys, "run", "--config", "fig9", "--out", str(tmp_path / "x.csv")
    )
    assert code == 2
    assert stderr.startswith("error:")
    assert "neither a builtin" in stderr


def test_run_invalid_json_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    code, _, stderr = _run(
        capsys, "run", "--config", str(bad), "--out", str(tmp_path / "x.csv")
    )
    assert code == 2
    assert stderr.startswith("error:")


def test_run_divergence_writes_partial_trace(tmp_path, capsys):
    path = _write_json(tmp_path, {
        "scenario": "DoubleIntegratorFull",
        "dt": 1e-3,
        "duration": 0.1,
        "x0": [-1.75, 0.0],
        "xhat0": [-1.7, 0.1],
        "kalman": {"K": [[1e30, 0.0], [0.0, 1e30]]},
    })
    out = tmp_path / "partial.csv"
    code, _, stderr = _run(capsys, "run", "--config", path, "--out", str(out))
    assert code == 1
    assert f"diverged; partial trace written to {out}" in stderr
    assert "error: simulation diverged" in stderr
    lines = out.read_text(encoding="utf-8").splitlines()
    assert 2 <= len(lines) < 102  # header plus the completed rows


# ------------------------------------------------------------------ gain

def test_gain_explicit(capsys):
    code, stdout, _ = _run(capsys, "gain", "--config", "fig2")
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0] == "K (2x2, row-major):"
    K = np.array([[float(v) for v in line.split()] for line in lines[1:3]])
    assert np.array_equal(K, builtin_config("fig2").kalman.K)
    assert lines[3] == "CARE residual: n/a (gain given explicitly by the configuration)"


def test_gain_designed_matches_preset(tmp_path, capsys):
    # no kalman block: the default design prior reproduces the preset gain
    path = _write_json(tmp_path, {
        "scenario": "DoubleIntegratorFull",
        "dt": 1e-3,
        "duration": 0.5,
        "x0": [-1.75, 0.0],
    })
    code, stdout, _ = _run(capsys, "gain", "--config", path)
    assert code == 0
    lines = stdout.splitlines()
    K = np.array([[float(v) for v in line.split()] for line in lines[1:3]])
    assert np.max(np.abs(K - builtin_config("fig2").kalman.K)) <= 1e-6
    label, value = lines[3].split(": ")
    assert label == "CARE residual"
    assert float(value) <= 1e-8


# ---------------------------------------------------------------- verify

def test_verify_passes(capsys):
    code, stdout, _ = _run(capsys, "verify")
    assert code == 0
    lines = stdout.splitlines()
    assert len(lines) >= 12
    for line in lines[:-1]:
        assert line.startswith("PASS  "), line
    n = len(lines) - 1
    assert lines[-1] == f"{n}/{n} checks passed"


# ------------------------------------------------------------- packaging

def test_console_script_installed(tmp_path):
    exe = shutil.which("cbfsim")
    if exe is None:
        pytest.skip("console script not on PATH")
    out = tmp_path / "cli.csv"
    proc = subprocess.run(
        [exe, "run", "--config", "fig3-posonly", "--out", str(out),
         "--duration", "0.02"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main([])
    assert exc_info.value.code == 2
    capsys.readouterr()


def test_unknown_backend_rejected_by_parser(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["run", "--config", "fig2", "--out", str(tmp_path / "x.csv"),
              "--backend", "warp"])
    assert exc_info.value.code == 2
    capsys.readouterr()
