import logging
from pathlib import Path
from typing import Optional

import numpy as np

from ..constants import get_exit_code
from ..core.hessian_operator import build_W, resolve_threads, robin_defect
from ..models.capillary_models import PipelineOutcome, SolverSettings
from ..models.errors import InvalidArgumentError
from ..tools.config_tool import load_config
from ..tools.field_io_tool import read_field, write_field, write_table
from ..tools.report_tool import write_report
from .common_pipeline import F_FILE, CommandPipeline, forward_map, grid_from_config

logger = logging.getLogger(__name__)

W_DIAG_FILE = "W_diag.csv"
FORWARD_REPORT_FILE = "forward.json"


class ForwardPipeline(CommandPipeline):
    """Evaluate f = sigma_k(W(h)) for a stored support function."""

    command = "forward"

    def __init__(self, h_path: str, k: Optional[int] = None, config_path: Optional[str] = None,
                 out_dir: Optional[str] = None, verbose: bool = False):
        """
        Initialize the forward pipeline.

        Args:
            h_path: Field CSV holding h
            k: Order; taken from the configuration when omitted
            config_path: Optional run configuration (grid check, order, tolerances)
            out_dir: Output directory, defaults to forward/ next to h
            verbose: Whether to log progress
        """
        super().__init__(verbose=verbose)
        self.h_path = h_path
        self.k = k
        self.config_path = config_path
        self.out_dir = out_dir

    def _execute(self) -> PipelineOutcome:
        config = load_config(self.config_path) if self.config_path else None
        settings = config.solver if config else SolverSettings()
        grid = grid_from_config(config) if config else None
        h = read_field(self.h_path, grid)

        k = self.k if self.k is not None else (config.problem.k if config else None)
        if k is None:
            raise InvalidArgumentError("forward needs an order: pass --k or a configuration")
        if not 1 <= k <= h.grid.n:
            raise InvalidArgumentError(f"order k must satisfy 1 <= k <= n={h.grid.n}, got {k}")

        f = forward_map(h, k, resolve_threads(settings.threads))
        W = build_W(h)
        defect = robin_defect(h)
        warnings = []
        tolerance = settings.boundary_tol_rel * max(1.0, h.norm_inf())
        if defect > tolerance:
            warnings.append(f"h violates the Robin condition: defect {defect:.3e} > {tolerance:.3e}")
        if f.min() <= 0.0:
            warnings.append(f"sigma_{k}(W(h)) is not positive: min {f.min():.3e}")
        for message in warnings:
            logger.warning(message)

        out = Path(self.out_dir) if self.out_dir else Path(self.h_path).parent / "forward"
        self._record(write_field(out / F_FILE, f))
        columns = {f"w{a + 1}{a + 1}": W.values[:, a, a] for a in range(h.grid.n)}
        self._record(write_table(out / W_DIAG_FILE, h.grid, columns))
        self._record(write_report(out / FORWARD_REPORT_FILE, {
            "k": k,
            "n": h.grid.n,
            "theta": h.grid.theta,
            "robin_defect": defect,
            "robin_tolerance": tolerance,
            "min_f": f.min(),
            "max_f": f.max(),
            "min_eigenvalue_W": float(np.min(W.eigenvalues())),
            "warnings": warnings,
        }))

        if warnings:
            return self._outcome(get_exit_code('warnings'), "forward map written with warnings", warnings)
        return self._outcome(get_exit_code('success'), f"sigma_{k}(W(h)) written to {out / F_FILE}")


def create_forward_pipeline(h_path: str, k: Optional[int] = None, config_path: Optional[str] = None,
                            out_dir: Optional[str] = None, verbose: bool = False) -> ForwardPipeline:
    return ForwardPipeline(h_path, k=k, config_path=config_path, out_dir=out_dir, verbose=verbose)
