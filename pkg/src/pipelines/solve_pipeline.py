import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..constants import get_exit_code
from ..core.capillary_body import contact_angle_check, export_mesh
from ..core.continuity_solver import solve
from ..models.capillary_models import GridMode, PipelineOutcome, ProblemSpec, SolveReport
from ..models.errors import ContinuationStuckError
from ..tools.config_tool import CONFIG_FILE_NAME, dump_config, load_config
from ..tools.field_io_tool import write_field
from ..tools.report_tool import write_report
from .common_pipeline import (
    F_FILE,
    H_FILE,
    OBJ_FILE,
    REPORT_FILE,
    VERTEX_FILE,
    CommandPipeline,
    grid_from_config,
    prepare_data,
    recovery_error,
)

logger = logging.getLogger(__name__)


class SolvePipeline(CommandPipeline):
    """validate -> solve -> reconstruct -> light verification -> artifacts."""

    command = "solve"

    def __init__(self, config_path: str, out_dir: Optional[str] = None, verbose: bool = False):
        """
        Initialize the solve pipeline.

        Args:
            config_path: TOML run configuration
            out_dir: Output directory, overriding [output] directory
            verbose: Whether to log solver progress
        """
        super().__init__(verbose=verbose)
        self.config_path = config_path
        self.out_dir = out_dir
        self.report: Optional[SolveReport] = None

    def _light_checks(self, body, report: SolveReport, settings) -> List[str]:
        """Residual and boundary checks run on every solve."""
        warnings = []
        f_max = body.f.max()
        if report.projected_residual > settings.verify_residual_rel * f_max:
            warnings.append(f"projected residual {report.projected_residual:.3e} above "
                            f"{settings.verify_residual_rel:g} * max f")
        if body.grid.mode is GridMode.FULL:
            _, height = contact_angle_check(body)
            size = float(abs(body.vertices).max())
            if height > settings.boundary_tol_rel * max(1.0, size):
                warnings.append(f"boundary ring height {height:.3e} is not on the supporting hyperplane")
        return warnings

    def _write_partial(self, out: Path, exc: ContinuationStuckError) -> None:
        if exc.report is None:
            return
        self._record(write_report(out / REPORT_FILE, exc.report,
                                  extra={"error": exc.to_dict()}))
        if exc.last_solution is not None:
            self._record(write_field(out / H_FILE, exc.last_solution.h))

    def _execute(self) -> PipelineOutcome:
        config = load_config(self.config_path)
        out = Path(self.out_dir or config.output.directory)
        grid = grid_from_config(config)
        f, exact = prepare_data(config, grid)
        spec = ProblemSpec(domain=config.domain, k=config.problem.k, f=f, settings=config.solver)
        artifacts = set(config.output.artifacts)

        try:
            h, body, report = solve(spec)
        except ContinuationStuckError as exc:
            self._write_partial(out, exc)
            raise

        report.warnings.extend(self._light_checks(body, report, config.solver))
        if exact is not None:
            report.recovery_error = recovery_error(h, exact)
            logger.info(f"Recovery error {report.recovery_error:.3e}")
        self.report = report

        self._record(write_field(out / H_FILE, h.h))
        self._record(write_field(out / F_FILE, f))
        self._record(write_report(out / CONFIG_FILE_NAME, dump_config(config)))
        self._record(write_report(out / REPORT_FILE, report))
        if grid.mode is GridMode.FULL and {"body", "vertex_data"} & artifacts:
            obj_path, csv_path = export_mesh(body, out / OBJ_FILE, out / VERTEX_FILE)
            self._record(obj_path)
            self._record(csv_path)
        elif grid.mode is not GridMode.FULL:
            logger.info("Axisymmetric grid: mesh artifacts skipped")

        if report.warnings:
            return self._outcome(get_exit_code('warnings'),
                                 f"converged with {len(report.warnings)} warning(s)", report.warnings)
        return self._outcome(get_exit_code('success'),
                             f"converged in {report.homotopy_steps} homotopy step(s), "
                             f"{report.newton_total} Newton iteration(s)")

    def get_pipeline_info(self) -> Dict[str, Any]:
        info = super().get_pipeline_info()
        info.update({"config": self.config_path, "out_dir": self.out_dir})
        return info


def create_solve_pipeline(config_path: str, out_dir: Optional[str] = None,
                          verbose: bool = False) -> SolvePipeline:
    """
    Factory function to create a solve pipeline.

    Args:
        config_path: TOML run configuration
        out_dir: Optional output directory override
        verbose: Whether to log solver progress

    Returns:
        Configured SolvePipeline instance
    """
    return SolvePipeline(config_path, out_dir=out_dir, verbose=verbose)
