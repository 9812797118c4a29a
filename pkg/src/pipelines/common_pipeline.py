"""
Shared plumbing for the command pipelines.

Every pipeline turns its inputs into a PipelineOutcome: solver and data
errors are caught in ``kickoff`` and mapped to exit codes through the error
kind table in the constants package.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..constants import get_error_description, get_exit_code, get_exit_code_for_error
from ..core.cap_geometry import CapGrid, ScalarField, build_grid
from ..core.continuity_solver import normalize_translation
from ..core.hessian_operator import SupportField, build_W, node_sigma_k
from ..generators.builtin_fields import create_builtin_field
from ..models.capillary_models import PipelineOutcome, RunConfig
from ..models.errors import ArtifactError, CapillaryError, InvalidDataError
from ..tools.config_tool import CONFIG_FILE_NAME, load_config
from ..tools.field_io_tool import read_field

logger = logging.getLogger(__name__)

H_FILE = "h.csv"
F_FILE = "f.csv"
REPORT_FILE = "report.json"
OBJ_FILE = "body.obj"
VERTEX_FILE = "vertex_data.csv"


class CommandPipeline:
    """Base class: subclasses implement ``_execute`` and return an outcome."""

    command: str = "command"

    def __init__(self, verbose: bool = False):
        self.verbose = verbose
        self.artifacts: List[str] = []

    def _execute(self) -> PipelineOutcome:
        raise NotImplementedError

    def _outcome(self, exit_code: int, message: str, warnings: Optional[List[str]] = None,
                 error_kind: Optional[str] = None) -> PipelineOutcome:
        return PipelineOutcome(command=self.command, exit_code=exit_code, message=message,
                               error_kind=error_kind, warnings=list(warnings or []),
                               artifacts=list(self.artifacts))

    def _record(self, path: Path) -> Path:
        self.artifacts.append(str(path))
        return path

    def kickoff(self) -> PipelineOutcome:
        """
        Run the pipeline.

        Returns:
            PipelineOutcome; failures are reported through the exit code, never raised
        """
        try:
            return self._execute()
        except CapillaryError as exc:
            logger.error(f"{self.command} failed ({exc.kind}): {exc.message}")
            message = f"{get_error_description(exc.kind)}: {exc.message}"
            return self._outcome(get_exit_code_for_error(exc.kind), message, error_kind=exc.kind)
        except Exception as exc:
            logger.exception(f"Unexpected failure in {self.command}")
            return self._outcome(get_exit_code('solver-failure'), f"unexpected error: {exc}",
                                 error_kind="unexpected")

    def get_pipeline_info(self) -> Dict[str, Any]:
        """Get information about the pipeline configuration."""
        return {"command": self.command, "verbose": self.verbose, "artifacts": list(self.artifacts)}


def grid_from_config(config: RunConfig) -> CapGrid:
    p = config.problem
    return build_grid(config.domain, p.n_rho, p.n_phi, p.mode)


def forward_map(h: ScalarField, k: int, threads: int = 1) -> ScalarField:
    """sigma_k(W(h)) on the grid of h."""
    values = node_sigma_k(build_W(h), k, threads)
    if not np.all(np.isfinite(values)):
        raise InvalidDataError("forward map produced non-finite values")
    return ScalarField(h.grid, values)


def prepare_data(config: RunConfig, grid: CapGrid) -> Tuple[ScalarField, Optional[ScalarField]]:
    """
    Build the right-hand side named by the [f] block.

    Returns:
        (f, exact solution when known)
    """
    source = config.f
    k = config.problem.k
    if source.builtin is not None:
        return create_builtin_field(source.builtin, grid, k, value=source.value, eps=source.eps,
                                    profile=source.profile, coefficients=source.coefficients)
    if source.csv is not None:
        return read_field(source.csv, grid), None
    exact = read_field(source.manufactured_from, grid)
    f = forward_map(exact, k, config.solver.threads)
    if f.min() <= 0.0:
        raise InvalidDataError(
            f"manufactured data from {source.manufactured_from} are not positive (min {f.min():.3e})")
    return f, exact


def recovery_error(h: SupportField, exact: ScalarField) -> float:
    """sup-norm distance after removing the horizontal translation of both fields."""
    return float(np.max(np.abs(normalize_translation(h).values - normalize_translation(exact).values)))


class SolutionDirectory:
    """The artifacts of a solve: configuration copy, h.csv and f.csv."""

    def __init__(self, directory, config_path: Optional[str] = None):
        self.path = Path(directory)
        if not self.path.is_dir():
            raise ArtifactError("solution directory not found", str(self.path))
        self.config_path = Path(config_path) if config_path else self.path / CONFIG_FILE_NAME
        for required in (self.config_path, self.path / H_FILE):
            if not required.exists():
                raise ArtifactError("missing solution artifact", str(required))
        self.config = load_config(self.config_path)
        self.grid = grid_from_config(self.config)

    @property
    def k(self) -> int:
        return self.config.problem.k

    def support(self) -> SupportField:
        return SupportField(read_field(self.path / H_FILE, self.grid))

    def data(self) -> ScalarField:
        """The stored right-hand side, rebuilt from the configuration when f.csv is absent."""
        stored = self.path / F_FILE
        if stored.exists():
            return read_field(stored, self.grid)
        f, _ = prepare_data(self.config, self.grid)
        return f
