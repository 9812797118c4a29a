"""
Verification suite for a solution directory.

Each check measures one invariant of the stored solution and compares it to
a tolerance from the run configuration. Every check is invariant under the
horizontal translations h -> h + <a, xi>, so a translated solution passes
exactly when the original does.
"""

import logging
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..constants import get_exit_code
from ..core.capillary_body import (
    contact_angle_check,
    minkowski_identity_check,
    reconstruct_surface,
    steiner_volume_check,
)
from ..core.cap_geometry import ScalarField
from ..core.continuity_solver import convexity_certificate, project_out_kernel
from ..core.hessian_operator import (
    SupportField,
    integral_identity,
    linearize,
    orthogonality_defect,
    resolve_threads,
    residual,
    robin_compatible_field,
)
from ..models.capillary_models import (
    GridMode,
    PipelineOutcome,
    SolverSettings,
    VerificationCheck,
    VerificationReport,
)
from ..models.errors import CapillaryError
from ..tools.report_tool import write_report
from .common_pipeline import CommandPipeline, SolutionDirectory

logger = logging.getLogger(__name__)

VERIFY_FILE = "verify.json"
SYMMETRY_SAMPLES = 10
SYMMETRY_SEED = 20240601


def _check(name: str, value: float, tolerance: float, detail: Optional[str] = None) -> VerificationCheck:
    finite = bool(np.isfinite(value))
    return VerificationCheck(name=name, value=float(value) if finite else None,
                             tolerance=float(tolerance), passed=bool(finite and value <= tolerance),
                             detail=detail)


def residual_check(h: SupportField, f: ScalarField, k: int, settings: SolverSettings) -> VerificationCheck:
    raw = residual(h, f, k, threads=resolve_threads(settings.threads)).values
    projected, _ = project_out_kernel(raw, f.grid)
    worst = int(np.argmax(np.abs(projected)))
    return _check("residual", float(np.max(np.abs(projected))), settings.verify_residual_rel * f.max(),
                  f"kernel-projected |sigma_k(W) - f|, worst node {worst}")


def robin_check(h: SupportField, settings: SolverSettings) -> VerificationCheck:
    return _check("robin_defect", h.robin_defect, settings.boundary_tol_rel * max(1.0, h.h.norm_inf()))


def orthogonality_check(f: ScalarField, settings: SolverSettings) -> VerificationCheck:
    defect = orthogonality_defect(f)
    return _check("orthogonality", max((abs(x) for x in defect), default=0.0),
                  settings.ortho_tol_rel * f.max() * f.grid.area,
                  "integrals of f against <xi, E_alpha>")


def integral_identity_check(h: SupportField, f: ScalarField, k: int,
                            settings: SolverSettings) -> VerificationCheck:
    values = integral_identity(h, k, resolve_threads(settings.threads))
    return _check("integral_identity", max((abs(x) for x in values), default=0.0),
                  settings.boundary_tol_rel * f.max() * f.grid.area,
                  "integrals of sigma_k(W) against <xi, E_alpha>")


def minkowski_check(h: SupportField, settings: SolverSettings) -> VerificationCheck:
    residuals = minkowski_identity_check(h)
    return _check("minkowski", max(residuals), settings.verify_minkowski,
                  "relative residuals " + ", ".join(f"{r:.2e}" for r in residuals))


def steiner_check(h: SupportField, settings: SolverSettings) -> VerificationCheck:
    if not reconstruct_surface(h).strictly_convex:
        return VerificationCheck(name="steiner", tolerance=settings.verify_steiner, passed=False,
                                 skipped=True, detail="skipped (not strictly convex)")
    return _check("steiner", steiner_volume_check(h), settings.verify_steiner,
                  "Steiner polynomial against parallel-body volume")


def convexity_check(h: SupportField, k: int, settings: SolverSettings) -> VerificationCheck:
    certificate = convexity_certificate(h, k, settings.convexity_eps_rel, cone_eps=settings.cone_eps)
    return VerificationCheck(
        name="convexity",
        value=certificate.global_min_eigenvalue,
        tolerance=certificate.epsilon,
        passed=certificate.strictly_convex,
        detail=f"min eigenvalue of W at node {certificate.worst_node} must exceed epsilon",
    )


def contact_check(h: SupportField, settings: SolverSettings) -> List[VerificationCheck]:
    body = reconstruct_surface(h)
    angle, height = contact_angle_check(body)
    size = float(np.max(np.abs(body.vertices)))
    return [
        _check("contact_angle", angle, settings.boundary_tol_rel,
               "<nu, e> - cos(pi - theta) with nu from the boundary tangents of the surface"),
        _check("boundary_height", height, settings.boundary_tol_rel * max(1.0, size),
               "height of the boundary ring above the supporting hyperplane"),
    ]


def symmetry_check(h: SupportField, k: int, settings: SolverSettings) -> VerificationCheck:
    system = linearize(h, k, threads=resolve_threads(settings.threads), cone_eps=settings.cone_eps)
    rng = np.random.default_rng(SYMMETRY_SEED)
    worst = 0.0
    for _ in range(SYMMETRY_SAMPLES):
        v = robin_compatible_field(h.grid, rng).values
        w = robin_compatible_field(h.grid, rng).values
        worst = max(worst, system.weighted_asymmetry(v, w))
    return _check("self_adjointness", worst, settings.verify_symmetry,
                  f"weighted asymmetry of the linearized operator over {SYMMETRY_SAMPLES} pairs")


def run_suite(h: SupportField, f: ScalarField, k: int, settings: SolverSettings) -> VerificationReport:
    """Measure every invariant; a check that cannot be evaluated is recorded as failed."""
    report = VerificationReport()
    suite: List[Tuple[str, Callable[[], object]]] = [
        ("residual", lambda: residual_check(h, f, k, settings)),
        ("robin_defect", lambda: robin_check(h, settings)),
        ("orthogonality", lambda: orthogonality_check(f, settings)),
        ("integral_identity", lambda: integral_identity_check(h, f, k, settings)),
        ("minkowski", lambda: minkowski_check(h, settings)),
        ("convexity", lambda: convexity_check(h, k, settings)),
        ("steiner", lambda: steiner_check(h, settings)),
        ("self_adjointness", lambda: symmetry_check(h, k, settings)),
    ]
    if h.grid.mode is GridMode.FULL:
        suite.append(("contact", lambda: contact_check(h, settings)))
    for name, run in suite:
        try:
            result = run()
        except CapillaryError as exc:
            report.checks.append(VerificationCheck(name=name, tolerance=0.0, passed=False,
                                                   detail=f"{exc.kind}: {exc.message}"))
            continue
        report.checks.extend(result if isinstance(result, list) else [result])
    for check in report.checks:
        if check.skipped:
            logger.info(f"{check.name}: {check.detail}")
            continue
        value = "n/a" if check.value is None else f"{check.value:.3e}"
        logger.info(f"{check.name}: {value} (tolerance {check.tolerance:.3e}) "
                    f"{'ok' if check.passed else 'FAILED'}")
    return report


class VerifyPipeline(CommandPipeline):
    """Audit a solution directory and write verify.json."""

    command = "verify"

    def __init__(self, directory: str, config_path: Optional[str] = None,
                 out_dir: Optional[str] = None, verbose: bool = False):
        super().__init__(verbose=verbose)
        self.directory = directory
        self.config_path = config_path
        self.out_dir = out_dir
        self.report: Optional[VerificationReport] = None

    def _execute(self) -> PipelineOutcome:
        solution = SolutionDirectory(self.directory, self.config_path)
        h = solution.support()
        f = solution.data()
        self.report = run_suite(h, f, solution.k, solution.config.solver)

        out = Path(self.out_dir) if self.out_dir else solution.path
        self._record(write_report(out / VERIFY_FILE, self.report))
        failed = [check.name for check in self.report.checks if not (check.passed or check.skipped)]
        if failed:
            return self._outcome(get_exit_code('verification-failed'),
                                 f"{len(failed)} check(s) failed: {', '.join(failed)}")
        skipped = [check.name for check in self.report.checks if check.skipped]
        message = f"all {len(self.report.checks) - len(skipped)} checks passed"
        if skipped:
            message += f", skipped: {', '.join(skipped)}"
        return self._outcome(get_exit_code('success'), message)


def create_verify_pipeline(directory: str, config_path: Optional[str] = None,
                           out_dir: Optional[str] = None, verbose: bool = False) -> VerifyPipeline:
    """
    Factory function to create a verification pipeline.

    Args:
        directory: Solution directory holding h.csv and run_config.json
        config_path: Optional configuration overriding the stored copy
        out_dir: Where verify.json goes, defaults to the solution directory
        verbose: Whether to log each check

    Returns:
        Configured VerifyPipeline instance
    """
    return VerifyPipeline(directory, config_path=config_path, out_dir=out_dir, verbose=verbose)
