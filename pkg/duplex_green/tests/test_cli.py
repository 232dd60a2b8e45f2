"""
Integration tests for the batch command line.
"""

import json
import math
from pathlib import Path

import pandas as pd
import pytest

from duplex_green import cli
from duplex_green.config import EXIT_IDENTITY_FAILURE, EXIT_INPUT_ERROR, EXIT_OK, THREADS_ENV_VAR

CONFIGS = Path(__file__).resolve().parents[2] / "configs"

SLAB_MATERIALS = {
    "schema_version": 1,
    "background": "vacuum",
    "media": {"lossy": {"eps_static": [2.0, 0.3]}},
    "layers": [{"material": "lossy", "z_min": -0.5, "z_max": 0.5}],
}

CHAIN = {
    "schema_version": 1,
    "background": "vacuum",
    "media": {"lossy": {"eps_static": [2.0, 0.3]}, "glass": {"eps_static": 2.25}},
    "layers": [
        {"material": "lossy", "z_min": 0.0, "z_max": 1.0},
        {"material": "glass", "z_min": 1.0, "z_max": 2.0},
    ],
    "stages": [
        {"label": "first", "z_in": -0.5, "z_out": 1.0},
        {"label": "second", "z_in": 1.0, "z_out": 2.5},
    ],
}


def write_config(tmp_path, **fields):
    document = {"schema_version": 1, "frequencies": [1.0], "output_dir": "out"}
    document.update(fields)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def diagnostic(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    return json.loads(lines[-1])


def verify_geometry():
    return {"dimension": 1, "bounds": [-1.0, 1.0], "points": [-0.3, 0.7]}


class TestParser:
    """Tests for the argument parser."""

    @pytest.mark.parametrize("command", ["green", "verify", "cascade", "material-info"])
    def test_subcommands(self, command):
        """Test that every subcommand parses with the shared flags."""
        args = cli.build_parser().parse_args([command, "--config", "run.json", "--tol", "1e-4"])
        assert args.command == command
        assert args.tol == 1e-4

    def test_missing_subcommand(self):
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args([])

    def test_bad_units(self):
        """Test that unknown units are rejected by the parser."""
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["verify", "--config", "run.json", "--units", "cgs"])


class TestVerify:
    """Tests for the verify command."""

    def test_passing_run(self, tmp_path):
        """Test exit 0, the report files and the manifest."""
        path = write_config(tmp_path, identities=["reciprocity"], geometry=verify_geometry())
        assert cli.main(["verify", "--config", str(path)]) == EXIT_OK
        out = tmp_path / "out"
        reports = json.loads((out / "reports.json").read_text(encoding="utf-8"))
        assert reports["summary"]["reciprocity"]["passed"] == 1
        summary = pd.read_csv(out / "summary.csv")
        assert list(summary["identity"]) == ["reciprocity"]
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "verify"
        assert set(manifest["outputs"]) == {"manifest.json", "reports.json", "summary.csv"}
        assert manifest["tasks"] == [{"task": "reciprocity", "runs": 1, "pass": True}]
        assert "numpy" in manifest["versions"]

    def test_identity_failure(self, tmp_path):
        """Test exit 1 when a residual exceeds the tolerance."""
        (tmp_path / "materials.json").write_text(json.dumps(SLAB_MATERIALS), encoding="utf-8")
        path = write_config(
            tmp_path,
            material_file="materials.json",
            identities=["optical_theorem"],
            geometry=verify_geometry(),
            quadrature={"volume_order": 2},
        )
        assert cli.main(["verify", "--config", str(path), "--tol", "1e-12"]) == EXIT_IDENTITY_FAILURE
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["tasks"][0]["pass"] is False

    def test_out_flag_wins(self, tmp_path):
        """Test that --out overrides the configured output directory."""
        path = write_config(tmp_path, identities=["reciprocity"], geometry=verify_geometry())
        target = tmp_path / "elsewhere"
        assert cli.main(["verify", "--config", str(path), "--out", str(target)]) == EXIT_OK
        assert (target / "manifest.json").is_file()
        assert not (tmp_path / "out").exists()

    def test_missing_material_file(self, tmp_path, capsys):
        """Test exit 2 and a JSON diagnostic when a referenced file is missing."""
        path = write_config(tmp_path, material_file="absent.json", geometry=verify_geometry())
        assert cli.main(["verify", "--config", str(path)]) == EXIT_INPUT_ERROR
        payload = diagnostic(capsys)
        assert payload["exit_code"] == EXIT_INPUT_ERROR
        assert "absent.json" in payload["message"]

    def test_unknown_identity(self, tmp_path, capsys):
        """Test exit 2 for identities outside the catalog."""
        path = write_config(tmp_path, geometry=verify_geometry())
        assert cli.main(["verify", "--config", str(path), "--identities", "triangle"]) == EXIT_INPUT_ERROR
        payload = diagnostic(capsys)
        assert payload["error"] == "ValueError"
        assert "triangle" in payload["message"]

    def test_planar_identity_on_sphere(self, tmp_path, capsys):
        """Test that planar-only identities are refused on a 3D geometry."""
        geometry = {"dimension": 3, "radius": 1.0, "points": [[0.1, 0.0, 0.0], [0.0, 0.2, 0.0]]}
        path = write_config(tmp_path, identities=["cascade"], geometry=geometry)
        assert cli.main(["verify", "--config", str(path)]) == EXIT_INPUT_ERROR
        assert "planar" in diagnostic(capsys)["message"]

    def test_bad_threads_env(self, tmp_path, monkeypatch):
        """Test that a non-integer thread count in the environment is an input error."""
        monkeypatch.setenv(THREADS_ENV_VAR, "many")
        path = write_config(tmp_path, identities=["reciprocity"], geometry=verify_geometry())
        assert cli.main(["verify", "--config", str(path)]) == EXIT_INPUT_ERROR

    def test_unexpected_error(self, tmp_path, monkeypatch, capsys):
        """Test that an unexpected exception exits with the input-error code and a diagnostic."""

        def boom(problem, manifest):
            raise RuntimeError("solver blew up")

        monkeypatch.setitem(cli.COMMANDS, "verify", boom)
        path = write_config(tmp_path, identities=["reciprocity"], geometry=verify_geometry())
        assert cli.main(["verify", "--config", str(path)]) == EXIT_INPUT_ERROR
        payload = diagnostic(capsys)
        assert payload == {"error": "RuntimeError", "message": "solver blew up", "exit_code": EXIT_INPUT_ERROR}


class TestDemoConfigs:
    """Tests for the configurations shipped under configs/."""

    def test_verify(self, tmp_path):
        """Test that every identity passes on the demo stack at every frequency."""
        out = tmp_path / "verify"
        assert cli.main(["verify", "--config", str(CONFIGS / "demo_verify.json"), "--out", str(out)]) == EXIT_OK
        reports = json.loads((out / "reports.json").read_text(encoding="utf-8"))
        assert all(entry["passed"] == entry["runs"] == 5 for entry in reports["summary"].values())

    def test_verify_rerun_is_identical(self, tmp_path):
        """Test that two runs of the same configuration write identical reports."""
        first, second = tmp_path / "first", tmp_path / "second"
        for out in (first, second):
            cli.main(["verify", "--config", str(CONFIGS / "demo_verify.json"), "--out", str(out)])
        for name in ("reports.json", "summary.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_cascade(self, tmp_path):
        """Test the demo chain budget with direct noise integrals and the sweep figure."""
        out = tmp_path / "cascade"
        assert cli.main(["cascade", "--config", str(CONFIGS / "demo_cascade.json"), "--out", str(out)]) == EXIT_OK
        budget = json.loads((out / "cascade.json").read_text(encoding="utf-8"))
        assert [entry["labels"] for entry in budget["budgets"]][0] == ["absorber", "window", "second_absorber"]
        assert all(entry["pass"] for entry in budget["budgets"])
        assert (out / "cascade_sweep.png").is_file()

    def test_green(self, tmp_path):
        """Test the demo kernel dump."""
        out = tmp_path / "green"
        assert cli.main(["green", "--config", str(CONFIGS / "demo_green.json"), "--out", str(out)]) == EXIT_OK
        index = json.loads((out / "kernels.json").read_text(encoding="utf-8"))
        assert {entry["kernel"] for entry in index["kernels"]} == {"homogeneous_1d", "stratified", "homogeneous_3d"}


class TestGreen:
    """Tests for the green command."""

    def test_homogeneous_samples(self, tmp_path):
        """Test the kernel CSV and its index."""
        path = write_config(tmp_path, kernels=["homogeneous_1d"], samples={"pairs": [[0.7, -0.3]]})
        assert cli.main(["green", "--config", str(path)]) == EXIT_OK
        out = tmp_path / "out"
        table = pd.read_csv(out / "green_homogeneous_1d_w0_k0.csv")
        assert abs(table["re_00"][0] + 0.5 * math.sin(1.0)) < 1e-12
        assert abs(table["im_00"][0] - 0.5 * math.cos(1.0)) < 1e-12
        index = json.loads((out / "kernels.json").read_text(encoding="utf-8"))
        assert index["kernels"][0]["components"] == [0, 4]

    def test_no_pairs(self, tmp_path):
        """Test that a kernel without sample pairs is an input error."""
        path = write_config(tmp_path, kernels=["homogeneous_1d"])
        assert cli.main(["green", "--config", str(path)]) == EXIT_INPUT_ERROR


class TestCascade:
    """Tests for the cascade command."""

    def test_budget(self, tmp_path):
        """Test the budget file and the frequency sweep."""
        (tmp_path / "chain.json").write_text(json.dumps(CHAIN), encoding="utf-8")
        path = write_config(tmp_path, frequencies=[0.9, 1.1], chain_file="chain.json")
        assert cli.main(["cascade", "--config", str(path)]) == EXIT_OK
        out = tmp_path / "out"
        budget = json.loads((out / "cascade.json").read_text(encoding="utf-8"))
        assert len(budget["budgets"]) == 2
        assert budget["budgets"][0]["labels"] == ["first", "second"]
        assert all(entry["pass"] for entry in budget["budgets"])
        sweep = pd.read_csv(out / "cascade_sweep.csv")
        assert list(sweep["omega"]) == [0.9, 1.1]
        assert not (out / "cascade_sweep.png").exists()

    def test_needs_chain(self, tmp_path, capsys):
        """Test that a missing chain_file entry is an input error."""
        path = write_config(tmp_path)
        assert cli.main(["cascade", "--config", str(path)]) == EXIT_INPUT_ERROR
        assert "chain_file" in diagnostic(capsys)["message"]


class TestMaterialInfo:
    """Tests for the material-info command."""

    def test_table(self, tmp_path):
        """Test one row per medium and frequency with passivity flags."""
        (tmp_path / "materials.json").write_text(json.dumps(SLAB_MATERIALS), encoding="utf-8")
        path = write_config(tmp_path, frequencies=[0.5, 1.0], material_file="materials.json")
        assert cli.main(["material-info", "--config", str(path)]) == EXIT_OK
        table = pd.read_csv(tmp_path / "out" / "material_info.csv")
        assert len(table) == 4
        lossy = table[table["medium"] == "lossy"]
        assert (abs(lossy["loss_max"] - 0.3) < 1e-12).all()
        assert (table[table["medium"] == "vacuum"]["loss_max"].abs() < 1e-15).all()
        assert table["passive"].all()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
