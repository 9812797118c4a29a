import json
from pathlib import Path

import numpy as np
import pytest

from src.core.cap_geometry import ScalarField, ell_field
from src.models.capillary_models import GridMode, SolveReport
from src.models.errors import ArtifactError, InvalidArgumentError, InvalidDataError
from src.pipelines.measures_pipeline import read_mask
from src.tools.config_tool import dump_config, load_config
from src.tools.field_io_tool import FieldReaderTool, read_field, sidecar_line, write_field, write_table
from src.tools.mesh_export_tool import mesh_faces
from src.tools.report_tool import read_report, write_report

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_field_csv_layout(full_grid, tmp_path) -> None:
    path = write_field(tmp_path / "h.csv", ell_field(full_grid))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == sidecar_line(full_grid)
    assert lines[1] == "rho,phi,value"
    assert len(lines) == full_grid.n_nodes + 2


def test_field_reload_is_exact(full_grid, axi_grid, tmp_path) -> None:
    for name, grid in (("full.csv", full_grid), ("axi.csv", axi_grid)):
        field = ell_field(grid)
        loaded = read_field(write_field(tmp_path / name, field))
        assert loaded.grid == grid
        np.testing.assert_array_equal(loaded.values, field.values)


def test_axisymmetric_layout_has_no_phi_column(axi_grid, tmp_path) -> None:
    lines = write_field(tmp_path / "h.csv", ell_field(axi_grid)).read_text(encoding="utf-8").splitlines()
    assert lines[1] == "rho,value"
    assert "mode=axisymmetric" in lines[0]


def test_field_reader_errors(full_grid, coarse_grid, tmp_path) -> None:
    path = write_field(tmp_path / "h.csv", ell_field(full_grid))
    with pytest.raises(InvalidArgumentError):
        read_field(path, coarse_grid)
    with pytest.raises(ArtifactError):
        read_field(tmp_path / "missing.csv")

    lines = path.read_text(encoding="utf-8").splitlines()
    truncated = tmp_path / "truncated.csv"
    truncated.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(InvalidDataError):
        read_field(truncated)

    headerless = tmp_path / "headerless.csv"
    headerless.write_text("\n".join(lines[1:]) + "\n", encoding="utf-8")
    with pytest.raises(InvalidDataError):
        read_field(headerless)

    renamed = tmp_path / "renamed.csv"
    renamed.write_text("\n".join([lines[0], "rho,phi,h"] + lines[2:]) + "\n", encoding="utf-8")
    with pytest.raises(InvalidDataError):
        read_field(renamed)

    shuffled = tmp_path / "shuffled.csv"
    shuffled.write_text("\n".join(lines[:2] + [lines[3], lines[2]] + lines[4:]) + "\n", encoding="utf-8")
    with pytest.raises(InvalidDataError):
        read_field(shuffled)


def test_reader_status_records_failures(tmp_path) -> None:
    tool = FieldReaderTool()
    with pytest.raises(ArtifactError):
        tool.run(path=str(tmp_path / "missing.csv"))
    status = tool.get_status()
    assert not status.available
    assert "could not read field" in status.error_message


def test_table_writer(full_grid, tmp_path) -> None:
    path = write_table(tmp_path / "W_diag.csv", full_grid,
                       {"w11": np.ones(full_grid.n_nodes), "w22": np.zeros(full_grid.n_nodes)})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[1] == "rho,phi,w11,w22"
    assert lines[2].endswith(",1,0")


def test_report_is_deterministic(tmp_path) -> None:
    report = SolveReport(n=2, k=1, theta=1.0, mode=GridMode.FULL, n_rho=8, n_phi=8,
                         homotopy_steps=1, newton_total=2, t_reached=1.0, final_residual=1e-12,
                         projected_residual=1e-13, min_eigenvalue_W=1.0, rank_profile=[1.0, 1.0],
                         ortho_defect=[0.0, 0.0], robin_defect=1e-5)
    a = write_report(tmp_path / "a.json", report, extra={"error": {"kind": "x"}})
    b = write_report(tmp_path / "b.json", report, extra={"error": {"kind": "x"}})
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text(encoding="utf-8")
    assert text.endswith("}\n")
    data = read_report(a)
    assert list(data) == sorted(data)
    assert data["error"] == {"kind": "x"}
    assert data["mode"] == "full"
    with pytest.raises(ArtifactError):
        read_report(tmp_path / "missing.json")


def test_report_writes_non_finite_values_as_null(tmp_path) -> None:
    path = write_report(tmp_path / "r.json", {"a": float("nan"), "b": [1.0, float("inf")], "c": {"d": -np.inf}})
    assert path.read_text(encoding="utf-8").count("null") == 3
    assert read_report(path) == {"a": None, "b": [1.0, None], "c": {"d": None}}


def test_mesh_faces_cover_the_grid(coarse_grid) -> None:
    faces = mesh_faces(coarse_grid)
    n_rho, n_phi = coarse_grid.shape
    assert len(faces) == n_phi + 2 * n_phi * (n_rho - 1)
    used = {index for face in faces for index in face}
    assert used == set(range(1, n_rho * n_phi + 2))
    assert all(len(set(face)) == 3 for face in faces)


def test_mask_file(tmp_path) -> None:
    path = tmp_path / "mask.txt"
    path.write_text("0, 1 2\n# skipped 9\n3,4  # trailing\n", encoding="utf-8")
    np.testing.assert_array_equal(read_mask(path), [0, 1, 2, 3, 4])
    path.write_text("0, one\n", encoding="utf-8")
    with pytest.raises(InvalidArgumentError):
        read_mask(path)
    with pytest.raises(ArtifactError):
        read_mask(tmp_path / "missing.txt")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.toml")))
def test_shipped_configs_load(name: str) -> None:
    config = load_config(CONFIG_DIR / name)
    assert config.problem.k <= config.problem.n
    assert config.source_path.endswith(name)


def test_config_load(write_config) -> None:
    config = load_config(write_config(k=1, solver_block="tol_newton_rel = 1e-9"))
    assert config.problem.mode is GridMode.FULL
    assert config.f.builtin == "constant"
    assert config.solver.tol_newton_rel == 1e-9
    assert config.output.artifacts == ["h", "report", "body", "vertex_data"]


def test_config_json_copy_reloads(write_config, tmp_path) -> None:
    config = load_config(write_config(k=1))
    copy = write_report(tmp_path / "run_config.json", dump_config(config))
    reloaded = load_config(copy)
    assert reloaded.problem == config.problem
    assert reloaded.solver == config.solver
    assert "source_path" not in json.loads(copy.read_text(encoding="utf-8"))


def test_config_errors(write_config, tmp_path) -> None:
    with pytest.raises(InvalidDataError):
        load_config(write_config(k=3))
    with pytest.raises(InvalidDataError):
        load_config(write_config(f_block='builtin = "constant"\ncsv = "f.csv"'))
    with pytest.raises(InvalidDataError):
        load_config(write_config(f_block='csv = "does_not_exist.csv"'))
    with pytest.raises(InvalidDataError):
        load_config(write_config(solver_block="unknown_knob = 1"))
    broken = tmp_path / "broken.toml"
    broken.write_text("[problem\nn = 2\n", encoding="utf-8")
    with pytest.raises(InvalidDataError):
        load_config(broken)
    with pytest.raises(ArtifactError):
        load_config(tmp_path / "missing.toml")


def test_config_resolves_csv_relative_to_its_directory(write_config, full_grid, tmp_path) -> None:
    write_field(tmp_path / "f.csv", ScalarField.constant(full_grid, 2.0))
    config = load_config(write_config(f_block='csv = "f.csv"'))
    assert Path(config.f.csv) == (tmp_path / "f.csv").resolve()


def test_threads_from_environment(write_config, monkeypatch) -> None:
    monkeypatch.setenv("CAPCMK_THREADS", "3")
    assert load_config(write_config()).solver.threads == 3
    assert load_config(write_config(solver_block="threads = 2")).solver.threads == 2
