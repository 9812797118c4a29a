import logging
import re
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ..constants import get_exit_code
from ..core.capillary_body import measure_report, reconstruct_surface
from ..models.capillary_models import MeasureReport, PipelineOutcome
from ..models.errors import ArtifactError, InvalidArgumentError
from ..tools.report_tool import write_report
from .common_pipeline import CommandPipeline, SolutionDirectory

logger = logging.getLogger(__name__)

MEASURES_FILE = "measures.json"


def read_mask(path) -> np.ndarray:
    """
    Node indices from a mask file.

    Indices are separated by commas or whitespace; text after ``#`` is ignored.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"could not read mask: {exc}", str(path))
    tokens = [tok for line in text.splitlines()
              for tok in re.split(r"[,\s]+", line.split("#", 1)[0]) if tok]
    try:
        return np.array([int(tok) for tok in tokens], dtype=int)
    except ValueError as exc:
        raise InvalidArgumentError(f"mask file {path} holds a non-integer index: {exc}")


class MeasuresPipeline(CommandPipeline):
    """Capillary area measures of a solved body, written to measures.json."""

    command = "measures"

    def __init__(self, directory: str, ks: Optional[Sequence[int]] = None, mask_path: Optional[str] = None,
                 config_path: Optional[str] = None, out_dir: Optional[str] = None, verbose: bool = False):
        """
        Initialize the measures pipeline.

        Args:
            directory: Solution directory
            ks: Orders to evaluate, defaults to 0..n
            mask_path: Optional file of node indices restricting the measures
            config_path: Optional configuration overriding the stored copy
            out_dir: Where measures.json goes, defaults to the solution directory
            verbose: Whether to log progress
        """
        super().__init__(verbose=verbose)
        self.directory = directory
        self.ks: Optional[List[int]] = list(ks) if ks else None
        self.mask_path = mask_path
        self.config_path = config_path
        self.out_dir = out_dir
        self.report: Optional[MeasureReport] = None

    def _execute(self) -> PipelineOutcome:
        solution = SolutionDirectory(self.directory, self.config_path)
        mask = read_mask(self.mask_path) if self.mask_path else None
        body = reconstruct_surface(solution.support(), f=solution.data(), k=solution.k)
        self.report = measure_report(body, self.ks, mask)

        out = Path(self.out_dir) if self.out_dir else solution.path
        self._record(write_report(out / MEASURES_FILE, self.report))
        summary = ", ".join(f"S_{k}={value:.6g}" for k, value in self.report.measures.items())
        logger.info(f"Measures over {self.report.mask_size} nodes: {summary}")
        if self.report.steiner_residual is None:
            summary += "; steiner skipped (not strictly convex)"
        return self._outcome(get_exit_code('success'), summary)


def create_measures_pipeline(directory: str, ks: Optional[Sequence[int]] = None,
                             mask_path: Optional[str] = None, config_path: Optional[str] = None,
                             out_dir: Optional[str] = None, verbose: bool = False) -> MeasuresPipeline:
    return MeasuresPipeline(directory, ks=ks, mask_path=mask_path, config_path=config_path,
                            out_dir=out_dir, verbose=verbose)
