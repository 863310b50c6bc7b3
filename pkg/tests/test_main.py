import json
import math
from types import SimpleNamespace
from unittest.mock import patch

import pytest

from privsense import utils
from privsense.dispatcher import dispatch_task
from privsense.errors import ConfigError, OutputError
from privsense.models import SWEEP_HEADER, SweepRecord


def _write_config(path, **overrides):
    config = {
        "M_list": [2, 3],
        "n_th_list": [0.0, 1.0],
        "N_grid": {"min": 1.0, "max": 10.0, "points": 2, "spacing": "log"},
        "objective": "precision",
    }
    config.update(overrides)
    path.write_text(json.dumps(config))
    return path


# --- state ---

def test_state_privacy_tmsv(run_cli):
    """Privacy-optimal two-mode state with one photon is the TMSV."""
    code, out, _ = run_cli("state", "--M", 2, "--nth", 0, "--N", 1, "--objective", "privacy")
    assert code == 0
    report = json.loads(out)
    assert report["privacy"] == pytest.approx(1.0, abs=1e-8)
    assert report["xi"] == pytest.approx(12.0, rel=1e-6)
    assert set(SWEEP_HEADER) <= set(report)
    assert report["r_hd"] == pytest.approx(6.125 / 12.0, rel=1e-4)


def test_state_precision_optimum(run_cli):
    code, out, _ = run_cli("state", "--M", 2, "--nth", 0, "--N", 1, "--objective", "precision")
    assert code == 0
    report = json.loads(out)
    assert report["xi"] == pytest.approx(16.0, rel=1e-8)
    assert report["privacy"] == pytest.approx(0.8, abs=1e-8)
    assert report["one_minus_privacy"] == pytest.approx(1 - report["privacy"], abs=1e-15)


def test_state_below_thermal_floor(run_cli):
    code, out, err = run_cli("state", "--M", 3, "--nth", 1, "--N", 2)
    assert code == 2
    assert out == ""
    assert "thermal floor" in err


def test_state_writes_report(run_cli, tmp_path):
    target = tmp_path / "reports" / "state.json"
    code, out, _ = run_cli("state", "--M", 3, "--nth", 0, "--N", 5, "--out", target)
    assert code == 0
    assert json.loads(target.read_text()) == json.loads(out)


def test_usage_error_is_a_config_error(run_cli):
    code, _, err = run_cli("state", "--M", 2)
    assert code == 1
    assert "required" in err


# --- sweep ---

def test_sweep_rows_and_order(run_cli, tmp_path):
    """One row per grid tuple in lexicographic order; infeasible rows are kept."""
    config = _write_config(tmp_path / "sweep.json", objective="both")
    target = tmp_path / "out.csv"
    code, _, _ = run_cli("sweep", "--config", config, "--out", target)
    assert code == 0

    rows = utils.read_csv(target)
    assert list(rows[0]) == SWEEP_HEADER
    keys = [(int(r["M"]), float(r["n_th"]), float(r["N_tot"]), r["objective"]) for r in rows]
    assert len(keys) == 2 * 2 * 2 * 2
    assert keys == sorted(keys, key=lambda k: (k[0], k[1], k[2], 0 if k[3] == "precision" else 1))

    infeasible = [r for r in rows if r["feasible"] == "false"]
    assert {(r["M"], r["N_tot"]) for r in infeasible} == {("2", "1"), ("3", "1")}
    assert all(r["xi"] == "" for r in infeasible)


def test_sweep_pure_rows_reach_ultimate_precision(run_cli, tmp_path):
    config = _write_config(tmp_path / "sweep.json", n_th_list=[0.0])
    target = tmp_path / "out.csv"
    assert run_cli("sweep", "--config", config, "--out", target)[0] == 0
    for row in utils.read_csv(target):
        N = float(row["N_tot"])
        assert float(row["xi"]) == pytest.approx(8 * N * (N + 1), rel=1e-8)


def test_sweep_csv_round_trips(run_cli, tmp_path):
    """17 significant digits survive the CSV."""
    config = _write_config(tmp_path / "sweep.json", M_list=[4], n_th_list=[0.0])
    target = tmp_path / "out.csv"
    assert run_cli("sweep", "--config", config, "--out", target)[0] == 0
    for row in utils.read_csv(target):
        parsed = {k: (None if v == "" else v) for k, v in row.items()}
        parsed["feasible"] = row["feasible"] == "true"
        record = SweepRecord.model_validate(parsed)
        assert utils.format_value(record.xi) == row["xi"]


def test_sweep_is_deterministic(run_cli, tmp_path):
    config = _write_config(tmp_path / "sweep.json", objective="both")
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli("sweep", "--config", config, "--out", first)
    run_cli("sweep", "--config", config, "--out", second)
    assert first.read_bytes() == second.read_bytes()


def test_sweep_empty_grid(run_cli, tmp_path):
    config = _write_config(tmp_path / "sweep.json", N_grid={"min": 1.0, "max": 10.0, "points": 0})
    code, _, err = run_cli("sweep", "--config", config)
    assert code == 1
    assert "N_grid.points" in err


def test_sweep_bad_json(run_cli, tmp_path):
    config = tmp_path / "broken.json"
    config.write_text('{"M_list": [2,\n')
    code, _, err = run_cli("sweep", "--config", config)
    assert code == 1
    assert "line 2" in err


def test_sweep_unknown_field(run_cli, tmp_path):
    config = _write_config(tmp_path / "sweep.json", colour="blue")
    assert run_cli("sweep", "--config", config)[0] == 1


# --- figures ---

def test_figures_small_grid(run_cli, tmp_path, monkeypatch):
    """Figure sweeps with a reduced default grid."""
    from privsense.config import settings

    monkeypatch.setattr(settings, "FIGURE_M", [2])
    monkeypatch.setattr(settings, "FIGURE_NTH", [0.0])
    monkeypatch.setattr(settings, "FIGURE_N_MIN", 10.0)
    monkeypatch.setattr(settings, "FIGURE_N_MAX", 100.0)
    monkeypatch.setattr(settings, "FIGURE_N_POINTS", 2)

    code, out, _ = run_cli("figures", "--which", 3, 4, "--outdir", tmp_path, "--json")
    assert code == 0
    assert len(json.loads(out)["outputs"]) == 2

    for row in utils.read_csv(tmp_path / "fig3.csv"):
        assert float(row["privacy"]) == pytest.approx(1.0, abs=1e-8)
        assert row["xi_hd"] == ""
    fig4 = utils.read_csv(tmp_path / "fig4.csv")
    assert 0.45 <= float(fig4[0]["r_hd"]) <= 0.55


@patch("privsense.main.dispatch_task")
def test_figures_dispatch(mock_dispatch, run_cli):
    """The CLI hands parsed arguments to the dispatcher."""
    mock_dispatch.return_value = {"status": "success", "message": "Wrote fig3.csv", "outputs": []}
    code, out, _ = run_cli("figures", "--which", 3)
    assert code == 0
    assert out.strip() == "Wrote fig3.csv"
    mock_dispatch.assert_called_with("figures", {"which": [3], "outdir": None, "workers": None})


@patch("privsense.main.dispatch_task")
def test_output_failure_exit_code(mock_dispatch, run_cli):
    mock_dispatch.side_effect = OutputError("disk full")
    code, _, err = run_cli("figures")
    assert code == 4
    assert "disk full" in err


def test_unknown_command_in_dispatcher():
    with pytest.raises(ConfigError):
        dispatch_task("plot", {})


# --- mc ---

def test_mc_rejects_single_sample(run_cli):
    code, _, _ = run_cli("mc", "--M", 2, "--nth", 0, "--N", 1, "--samples", 1, "--trials", 10, "--seed", 1)
    assert code == 1


def test_mc_is_reproducible(run_cli):
    argv = ("mc", "--M", 2, "--nth", 0, "--N", 1, "--samples", 2000, "--trials", 30, "--seed", 42)
    code, first, _ = run_cli(*argv)
    assert code == 0
    _, second, _ = run_cli(*argv)
    assert first == second
    report = json.loads(first)
    assert report["seed"] == 42
    assert report["crb"] == pytest.approx(1 / (2000 * report["xi_hd"]), rel=1e-6)
    assert math.isfinite(report["ratio"])


# --- paths ---

def test_relative_outputs_land_in_data_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(utils, "settings", SimpleNamespace(DATA_DIR=tmp_path))
    assert utils.resolve_output("data/sweeps/x.csv") == (tmp_path / "sweeps" / "x.csv").resolve()
    assert utils.resolve_output("figures/y.csv").parent.is_dir()


def test_format_value():
    assert utils.format_value(None) == ""
    assert utils.format_value(True) == "true"
    assert utils.format_value(0.1) == "0.10000000000000001"
    assert utils.format_value(3) == "3"


@pytest.mark.parametrize("name", ["fig2", "fig3", "fig4", "quick"])
def test_shipped_configs_validate(name):
    from privsense.config import settings

    config = utils.load_sweep_config(str(settings.DATA_DIR / "configs" / f"{name}.json"))
    assert config.M_list
    assert config.N_grid.values()[0] == config.N_grid.min
