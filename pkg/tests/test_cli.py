import json
import shutil

import numpy as np
import pytest

from capcmk import build_parser, main, parse_arguments
from src.core.cap_geometry import ScalarField, ell_field, kernel_fields
from src.core.hessian_operator import residual
from src.generators.builtin_fields import radial_support
from src.models.capillary_models import PipelineOutcome
from src.pipelines.common_pipeline import CommandPipeline
from src.pipelines.solve_pipeline import create_solve_pipeline
from src.tools.field_io_tool import read_field, write_field
from src.tools.report_tool import read_report


@pytest.fixture
def solved(write_config, tmp_path):
    """Exact-cap solution directory: k = 1, f = 2, solution ell."""
    config = write_config("exact.toml", k=1, f_block='builtin = "constant"\nvalue = 2.0')
    assert main(["solve", "--config", str(config), "--quiet"]) == 0
    return tmp_path / "out"


def test_parse_arguments_accepts_global_flags_anywhere() -> None:
    before = parse_arguments(["--verbose", "verify", "out"])
    after = parse_arguments(["verify", "out", "-v"])
    assert before.verbose and after.verbose
    assert before.config is None and after.out is None
    measures = parse_arguments(["measures", "out", "--k", "0", "2", "--mask", "m.txt"])
    assert measures.ks == [0, 2]
    assert measures.mask == "m.txt"
    assert build_parser().prog == "capcmk"


def test_usage_errors_exit_with_invalid_data(capsys) -> None:
    assert main([]) == 4
    assert main(["frobnicate"]) == 4
    assert main(["solve", "--quiet"]) == 4
    assert main(["--help"]) == 0


def test_solve_writes_every_artifact(solved, full_grid) -> None:
    for name in ("h.csv", "f.csv", "report.json", "run_config.json", "body.obj", "vertex_data.csv"):
        assert (solved / name).exists(), name
    h = read_field(solved / "h.csv")
    np.testing.assert_allclose(h.values, ell_field(full_grid).values, atol=1e-10)
    report = read_report(solved / "report.json")
    assert report["newton_total"] == 1
    assert report["t_reached"] == 1.0
    assert report["warnings"] == []


def test_solve_axisymmetric_skips_the_mesh(write_config, tmp_path) -> None:
    config = write_config(n=3, k=2, mode="axisymmetric", n_rho=128, n_phi=1,
                          f_block='builtin = "constant"\nvalue = 3.0')
    assert main(["solve", str(config), "-q"]) == 0
    assert (tmp_path / "out" / "h.csv").exists()
    assert not (tmp_path / "out" / "body.obj").exists()


def test_verify_passes_on_the_exact_cap(solved) -> None:
    assert main(["verify", str(solved), "-q"]) == 0
    report = read_report(solved / "verify.json")
    assert report["passed"]
    names = {check["name"] for check in report["checks"]}
    assert {"residual", "robin_defect", "minkowski", "steiner", "convexity",
            "contact_angle", "boundary_height", "self_adjointness"} <= names


def test_verify_fails_on_a_perturbed_solution(solved, tmp_path, rng) -> None:
    target = tmp_path / "perturbed"
    shutil.copytree(solved, target)
    h = read_field(target / "h.csv")
    write_field(target / "h.csv", h + ScalarField(h.grid, 1e-4 * rng.normal(size=h.grid.n_nodes)))
    assert main(["verify", str(target), "-q"]) == 1
    checks = {c["name"]: c for c in read_report(target / "verify.json")["checks"]}
    assert not checks["residual"]["passed"]


def test_verify_ignores_horizontal_translations(solved, tmp_path) -> None:
    target = tmp_path / "translated"
    shutil.copytree(solved, target)
    h = read_field(target / "h.csv")
    v1, v2 = kernel_fields(h.grid)
    write_field(target / "h.csv", h + 0.1 * v1 - 0.05 * v2)
    assert main(["verify", str(target), "-q"]) == 0


def test_verify_missing_directory(tmp_path) -> None:
    assert main(["verify", str(tmp_path / "nowhere"), "-q"]) == 4


def test_forward_of_ell(solved) -> None:
    assert main(["forward", str(solved / "h.csv"), "--k", "1", "-q"]) == 0
    f = read_field(solved / "forward" / "f.csv")
    np.testing.assert_allclose(f.values, 2.0, atol=1e-9)
    assert (solved / "forward" / "W_diag.csv").exists()
    assert read_report(solved / "forward" / "forward.json")["k"] == 1


def test_forward_warns_on_robin_violation(full_grid, tmp_path) -> None:
    ell = ell_field(full_grid)
    write_field(tmp_path / "h.csv", ell * ell)
    assert main(["forward", str(tmp_path / "h.csv"), "--k", "1", "-q"]) == 2
    assert read_report(tmp_path / "forward" / "forward.json")["warnings"]


def test_forward_needs_an_order(solved) -> None:
    assert main(["forward", str(solved / "h.csv"), "-q"]) == 4
    assert main(["forward", str(solved / "h.csv"), "--k", "3", "-q"]) == 4


def test_measures_with_mask(solved, tmp_path) -> None:
    mask = tmp_path / "half.txt"
    mask.write_text(" ".join(str(i) for i in range(32 * 16)) + "\n", encoding="utf-8")
    assert main(["measures", str(solved), "--k", "0", "1", "2", "--mask", str(mask), "-q"]) == 0
    report = read_report(solved / "measures.json")
    assert report["mask_size"] == 32 * 16
    values = [report["measures"][key] for key in ("0", "1", "2")]
    assert values[1] == pytest.approx(values[0], rel=1e-9)
    assert values[2] == pytest.approx(values[0], rel=1e-9)


def test_export_formats(solved, tmp_path) -> None:
    out = tmp_path / "export"
    assert main(["export", str(solved), "--format", "csv", "--out", str(out), "-q"]) == 0
    rows = (out / "vertex_data.csv").read_text(encoding="utf-8").splitlines()
    assert len(rows) == 32 * 32 + 1
    assert main(["export", str(solved), "-f", "obj", "-o", str(out), "-q"]) == 0
    assert (out / "body.obj").exists()
    assert main(["export", str(solved), "--format", "stl", "-q"]) == 4


def test_inconsistent_csv_data(write_config, full_grid, tmp_path) -> None:
    v1 = kernel_fields(full_grid)[0]
    write_field(tmp_path / "f_bad.csv", 2.0 + 0.5 * v1)
    config = write_config(k=1, f_block='csv = "f_bad.csv"')
    assert main(["solve", str(config), "-q"]) == 4
    assert not (tmp_path / "out" / "h.csv").exists()


def test_manufactured_from_a_support_function(write_config, full_grid, tmp_path) -> None:
    h, _, _ = radial_support(full_grid, 0.05)
    write_field(tmp_path / "h_star.csv", ScalarField(full_grid, h))
    config = write_config(k=2, f_block='manufactured_from = "h_star.csv"')
    assert main(["solve", str(config), "-q"]) in (0, 2)
    report = read_report(tmp_path / "out" / "report.json")
    assert report["recovery_error"] < 1e-6


def test_stuck_continuation_writes_a_partial_report(write_config, tmp_path) -> None:
    config = write_config(
        k=2, n_rho=16, n_phi=16, f_block='builtin = "manufactured"\neps = 0.05',
        solver_block="max_newton = 1\ninitial_step = 1.0\nstep_floor = 0.5\ntry_direct_step = false")
    pipeline = create_solve_pipeline(str(config))
    outcome = pipeline.kickoff()
    assert outcome.exit_code == 3
    assert outcome.error_kind == "continuation-stuck"
    report = read_report(tmp_path / "out" / "report.json")
    assert report["error"]["kind"] == "continuation-stuck"
    assert (tmp_path / "out" / "h.csv").exists()


def test_unexpected_errors_map_to_solver_failure() -> None:
    class Broken(CommandPipeline):
        command = "broken"

        def _execute(self) -> PipelineOutcome:
            raise RuntimeError("boom")

    outcome = Broken().kickoff()
    assert outcome.exit_code == 3
    assert outcome.error_kind == "unexpected"
    assert "boom" in outcome.message


def _strict_json(path):
    def reject(token):
        raise ValueError(f"non-standard JSON constant {token}")

    return json.loads(path.read_text(encoding="utf-8"), parse_constant=reject)


def test_non_convex_solution_skips_the_steiner_check(solved, tmp_path) -> None:
    target = tmp_path / "non_convex"
    shutil.copytree(solved, target)
    ell = read_field(target / "h.csv")
    write_field(target / "h.csv", ell - 3.0 * (ell * ell))

    assert main(["measures", str(target), "-q"]) == 0
    assert _strict_json(target / "measures.json")["steiner_residual"] is None

    assert main(["verify", str(target), "-q"]) == 1
    checks = {c["name"]: c for c in _strict_json(target / "verify.json")["checks"]}
    assert checks["steiner"]["skipped"]
    assert checks["steiner"]["detail"] == "skipped (not strictly convex)"
    assert not checks["convexity"]["passed"]


def test_repeated_solves_are_identical(write_config, tmp_path) -> None:
    reports = []
    for out in ("first", "second"):
        config = write_config(f"{out}.toml", k=2, n_rho=16, n_phi=16,
                              f_block='builtin = "manufactured"\neps = 0.05', out=out)
        assert main(["solve", str(config), "-q"]) in (0, 2)
        report = read_report(tmp_path / out / "report.json")
        report.pop("wall_time")
        reports.append(report)
    assert reports[0] == reports[1]
    assert (tmp_path / "first" / "h.csv").read_bytes() == (tmp_path / "second" / "h.csv").read_bytes()


def test_final_residual_matches_the_stored_solution(solved) -> None:
    h = read_field(solved / "h.csv")
    f = read_field(solved / "f.csv")
    recomputed = float(np.max(np.abs(residual(h, f, 1).values)))
    assert read_report(solved / "report.json")["final_residual"] == pytest.approx(recomputed, abs=1e-12)
