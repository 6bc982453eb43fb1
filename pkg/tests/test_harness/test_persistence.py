"""
Tests for output tables, sidecars and the run directory layout.
"""

import json

import pandas as pd
import pytest

from antifragile_rl import __version__
from antifragile_rl.exceptions import CalibrationMissingError, CheckpointMissingError
from antifragile_rl.harness import (
    RunLayout,
    build_id,
    load_calibration,
    read_table,
    require_checkpoint,
    save_calibration,
    write_table,
)
from antifragile_rl.harness.persistence import sidecar_path
from antifragile_rl.shift import ShiftReport


@pytest.fixture
def frame():
    return pd.DataFrame({"sampler": ["dts", "ts"], "total_regret": [12.5, 30.0]})


class TestTables:

    def test_sidecar(self, tmp_path, frame):
        path = write_table(frame, tmp_path / "out" / "regret.csv", "abc123", 4, "bandit-sim",
                           {"schedule": {"segments": [[800, [0.45, 0.6]]]}})
        meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
        assert sidecar_path(path).name == "regret.csv.meta.json"
        assert meta["config_hash"] == "abc123"
        assert meta["seed"] == 4
        assert meta["command"] == "bandit-sim"
        assert meta["build_id"] == f"antifragile-rl {__version__}"
        assert meta["columns"] == ["sampler", "total_regret"]
        assert meta["rows"] == 2
        assert meta["schedule"]["segments"][0][0] == 800

    def test_read_back(self, tmp_path, frame):
        path = write_table(frame, tmp_path / "regret.csv", "abc123", 0, "bandit-sim")
        loaded, meta = read_table(path)
        pd.testing.assert_frame_equal(loaded, frame)
        assert meta["rows"] == 2

    def test_rewrite_is_identical(self, tmp_path, frame):
        path = tmp_path / "regret.csv"
        write_table(frame, path, "abc123", 0, "bandit-sim")
        first = (path.read_bytes(), sidecar_path(path).read_bytes())
        write_table(frame, path, "abc123", 0, "bandit-sim")
        assert (path.read_bytes(), sidecar_path(path).read_bytes()) == first

    def test_missing_sidecar(self, tmp_path, frame):
        path = tmp_path / "bare.csv"
        frame.to_csv(path, index=False)
        _, meta = read_table(path)
        assert meta == {}

    def test_missing_table(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_table(tmp_path / "absent.csv")

    def test_build_id(self):
        assert build_id().startswith("antifragile-rl ")


class TestRunLayout:

    def test_paths(self, tmp_path):
        layout = RunLayout(str(tmp_path))
        assert layout.root == tmp_path
        assert layout.seed_dir(2) == tmp_path / "seed_2"
        assert layout.ensemble_dir(0) == tmp_path / "seed_0" / "ensemble"
        assert layout.member_checkpoint(0, "alpha_0.10") == tmp_path / "seed_0" / "ensemble" / "alpha_0.10.npz"
        assert layout.baseline_checkpoint(1, "pr_mdp") == tmp_path / "seed_1" / "baselines" / "pr_mdp.npz"
        assert layout.calibration_file(0) == tmp_path / "seed_0" / "calibration.json"
        assert layout.table("evaluation") == tmp_path / "evaluation.csv"

    def test_require_checkpoint(self, tmp_path):
        with pytest.raises(CheckpointMissingError, match="train-ensemble"):
            require_checkpoint(tmp_path / "ensemble.json")
        path = tmp_path / "ensemble.json"
        path.write_text("{}", encoding="utf-8")
        assert require_checkpoint(path) == path


class TestCalibrationFile:

    def test_save_load(self, tmp_path):
        reports = [ShiftReport(0.0, [0.1, 0.2], [0.9, 0.45], alphas=[0.0, 0.1]),
                   ShiftReport(0.5, [0.4, 0.2], [0.45, 0.9], alphas=[0.0, 0.1], attack="pgd")]
        path = save_calibration(reports, tmp_path / "seed_0" / "calibration.json")
        assert load_calibration(path) == reports

    def test_missing(self, tmp_path):
        with pytest.raises(CalibrationMissingError, match="calibrate"):
            load_calibration(tmp_path / "calibration.json")
